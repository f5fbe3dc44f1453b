use std::cmp::Ordering;

use crate::error::{Error, Result};

/// A trained model with the numbers model selection looks at.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T> {
    pub model: T,
    pub seed: u64,
    pub val_accuracy: f64,
    /// Frobenius norm of the output weights.
    pub energy: f64,
}

/// Keeps candidates with validation accuracy at least `threshold` times the
/// best, then returns the one with the lowest energy. Equal energies go to
/// the lowest seed, so the result does not depend on candidate order.
pub fn select_model<T>(candidates: Vec<Candidate<T>>, threshold: f64) -> Result<Candidate<T>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "selection threshold must be in (0, 1], got {threshold}"
        )));
    }
    let best = candidates
        .iter()
        .map(|c| c.val_accuracy)
        .max_by(f64::total_cmp)
        .ok_or(Error::EmptyCandidates)?;
    let cutoff = threshold * best;
    candidates
        .into_iter()
        .filter(|c| c.val_accuracy >= cutoff)
        .min_by(|a, b| match a.energy.total_cmp(&b.energy) {
            Ordering::Equal => a.seed.cmp(&b.seed),
            o => o,
        })
        .ok_or(Error::EmptyCandidates)
}
