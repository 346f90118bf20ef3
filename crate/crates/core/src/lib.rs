//! Geographically weighted graph learning.
//!
//! The crate builds spatial graphs from latitude/longitude points, trains a
//! graph-convolutional classifier on them, trains coordinate-as-feature
//! baselines for comparison, scores everything with a full classification
//! metric battery and provides a kernel-smoothing lab that measures how much
//! local averaging reduces the error of a noisy spatial estimator.
//!
//! Inner loops (matrix products, pairwise kernels, Monte-Carlo trials) run on
//! rayon when the default `parallel` feature is on and sequentially otherwise;
//! results are bitwise identical either way.

// `!(x > 0.0)` guards are deliberate: they reject NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod datagen;
pub mod error;
pub mod geoggnn;
pub mod geograph;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod smoothlab;
pub mod split;
pub mod tensor;
pub mod training;

mod par;

pub use error::{Error, Result};
pub use par::is_parallel;
