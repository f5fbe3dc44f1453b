mod common;

use common::{ridge_oracle, Mat};
use intelm::elm::{predict_batch, scores_float, train_detailed};
use intelm::{
    gen_weights, gen_weights_continuous, gen_weights_ternary, predict_float, train, DenseMatrix, FloatModel,
    LabeledTargets, ModelMeta, WeightDistribution, WeightMatrix,
};
use proptest::prelude::*;

fn problem() -> impl Strategy<Value = (Mat, Vec<usize>, usize, usize, u64, bool)> {
    (1usize..50, 1usize..20, 1usize..5, 1usize..8, any::<u64>(), any::<bool>()).prop_flat_map(
        |(rows, l, m, n, seed, ternary)| {
            (
                prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), rows),
                prop::collection::vec(0..m, rows),
                Just(m),
                Just(l),
                Just(seed),
                Just(ternary),
            )
        },
    )
}

fn weights(n: usize, l: usize, seed: u64, ternary: bool) -> WeightMatrix {
    let dist = if ternary { WeightDistribution::Ternary } else { WeightDistribution::UniformOpen01 };
    gen_weights(dist, n, l, seed).unwrap()
}

fn dense_rows(w: &DenseMatrix) -> Mat {
    (0..w.rows()).map(|r| w.row(r).to_vec()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn streaming_training_matches_explicit_oracle((x, labels, m, l, seed, ternary) in problem(), gamma in 0.1f64..10.0) {
        let w = weights(x[0].len(), l, seed, ternary);
        let expect = ridge_oracle(&x, &dense_rows(&w.to_dense()), &labels, m, gamma);
        let targets = LabeledTargets::new(labels, m).unwrap();
        let model = train(&DenseMatrix::from_rows(&x).unwrap(), &targets, w, gamma).unwrap();
        for (i, row) in expect.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                prop_assert!((model.beta().get(i, c) - v).abs() <= 1e-8, "beta[{i},{c}] {} vs {v}", model.beta().get(i, c));
            }
        }
    }

    #[test]
    fn positive_input_scale_keeps_predictions(
        (x, labels, m, l, seed, ternary) in problem(),
        c in prop_oneof![1e-3f64..1.0, 1.0f64..1e3],
    ) {
        let w = weights(x[0].len(), l, seed, ternary);
        let targets = LabeledTargets::new(labels, m).unwrap();
        let model = train(&DenseMatrix::from_rows(&x).unwrap(), &targets, w, 1.0).unwrap();
        for row in &x {
            let scaled: Vec<f64> = row.iter().map(|v| v * c).collect();
            let a = scores_float(&model, row).unwrap();
            let b = scores_float(&model, &scaled).unwrap();
            // Skip near-ties, where rounding alone can reorder the scores.
            let mut sorted = a.clone();
            sorted.sort_by(|p, q| q.total_cmp(p));
            if sorted.len() > 1 && sorted[0] - sorted[1] < 1e-9 * sorted[0].abs().max(1.0) {
                continue;
            }
            prop_assert_eq!(predict_float(&model, row).unwrap(), intelm::elm::argmax(&b));
        }
    }
}

#[test]
fn batch_and_single_prediction_agree() {
    let n = 6;
    let x: Vec<f64> = (0..600).map(|i| ((i * 37 % 101) as f64) / 50.0 - 1.0).collect();
    let x = DenseMatrix::from_vec(100, n, x).unwrap();
    let labels: Vec<usize> = (0..100).map(|i| i % 3).collect();
    let model = train(&x, &LabeledTargets::new(labels, 3).unwrap(), gen_weights_continuous(n, 30, 4).unwrap(), 2.0).unwrap();
    let batch = predict_batch(&model, &x).unwrap();
    for (r, &p) in batch.iter().enumerate() {
        assert_eq!(predict_float(&model, x.row(r)).unwrap(), p);
    }
}

#[test]
fn training_reports_small_residual() {
    let x = DenseMatrix::from_vec(40, 4, (0..160).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
    let labels = (0..40).map(|i| i % 2).collect();
    let (_, stats) = train_detailed(
        &x,
        &LabeledTargets::new(labels, 2).unwrap(),
        WeightMatrix::Ternary(gen_weights_ternary(4, 25, 9).unwrap()),
        1.0,
    )
    .unwrap();
    assert!(stats.residual <= 1e-10 * stats.rhs_norm.max(1.0), "{stats:?}");
}

#[test]
fn continuous_weights_are_uniform_open01() {
    let w = gen_weights_continuous(200, 500, 1).unwrap().to_dense();
    let v = w.as_slice();
    assert!(v.iter().all(|&a| a > 0.0 && a < 1.0));
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / v.len() as f64;
    assert!((var - 1.0 / 12.0).abs() < 0.002, "var {var}");
}

#[test]
fn ternary_symbols_are_equiprobable() {
    let t = gen_weights_ternary(300, 400, 2).unwrap();
    let counts = t.symbol_counts();
    let total = 300.0 * 400.0;
    for c in counts {
        assert!((c as f64 / total - 1.0 / 3.0).abs() < 0.01, "{counts:?}");
    }
    assert!(t.as_slice().iter().all(|v| (-1..=1).contains(v)));
}

#[test]
fn generation_is_deterministic_per_seed() {
    for dist in [WeightDistribution::UniformOpen01, WeightDistribution::Ternary, WeightDistribution::SymmetricUniform, WeightDistribution::Binary] {
        let a = gen_weights(dist, 7, 11, 42).unwrap();
        assert_eq!(a, gen_weights(dist, 7, 11, 42).unwrap());
        assert_ne!(a, gen_weights(dist, 7, 11, 43).unwrap());
    }
}

#[test]
fn degenerate_sizes_rejected() {
    assert!(gen_weights_continuous(0, 3, 1).is_err());
    assert!(gen_weights_ternary(3, 0, 1).is_err());
    let beta = DenseMatrix::zeros(2, 1);
    assert!(FloatModel::new(gen_weights_continuous(3, 3, 1).unwrap(), beta, 1.0, ModelMeta::default()).is_err());
}
