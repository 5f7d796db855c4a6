//! Nonparametric transfer-learning classifiers under distributed differential privacy.
//!
//! The data live on `m + 1` servers: server 0 is the target, servers `1..=m` are
//! sources whose regression functions share the target's Bayes decision boundary
//! but may carry a weaker or stronger signal (posterior drift). Each server
//! releases a kernel statistic perturbed by a Gaussian process calibrated to its
//! own `(ε_j, δ_j)` budget, and the target combines the releases into a weighted
//! statistic whose sign is the classifier.
//!
//! Modules:
//!
//! * [`kernels`]: kernel families, their constants and Gram matrices.
//! * [`privacy`]: RKHS sensitivity, noise calibration and correlated noise sampling.
//! * [`classifier`]: the non-adaptive weighted classifier.
//! * [`rates`]: the bandwidth equation, homogeneous rates and the phase diagram.
//! * [`adaptive`]: Lepski-type bandwidth and weight selection.
//! * [`simbench`]: simulation designs, baselines and sweeps.
//! * [`dataio`]: CSV ingestion and preprocessing for real multi-site data.

pub mod adaptive;
pub mod classifier;
pub mod dataio;
mod error;
pub mod kernels;
pub mod privacy;
pub mod rates;
pub mod seed;
pub mod simbench;

pub use error::{Error, Result};
