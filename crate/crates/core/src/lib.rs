//! Extreme learning machines with an integer-only classification path.
//!
//! Training is closed form (ridge-regularized least squares over ReLU hidden
//! features with zero bias). Input weights may be drawn from `{-1, 0, 1}`, in
//! which case the input projection needs only additions and subtractions.
//! Because the hidden layer is positively homogeneous, raw integer signals
//! classify exactly like their ℓ₂-normalized versions, and the output weights
//! can be replaced by integers (with an optional precision-halving ladder)
//! without touching floating point at inference time.

pub mod cli;
pub mod data;
pub mod elm;
pub mod error;
pub mod experiments;
pub mod format;
pub mod int_infer;
pub mod linalg;
pub mod quantize;
pub mod rng;

pub use elm::{
    gen_weights, gen_weights_continuous, gen_weights_ternary, hidden_features, predict_float,
    train, FloatModel, LabeledTargets, ModelMeta, TernaryWeights, WeightDistribution,
    WeightKind, WeightMatrix,
};
pub use error::{Error, Result};
pub use int_infer::{classify_int, relu_int, ternary_project, IntSample, QuantizedModel};
pub use linalg::{accumulate_gram, solve_spd, DenseMatrix, SpdSystem};
pub use quantize::{bit_width, quantize_beta, reduce_precision_step, IntegerBeta};
