//! Weakly supervised video anomaly detection via Bayesian nonparametric
//! partitioning and submodular representative selection.
//!
//! The pipeline: pool clip features into segments ([`data`]), infer a
//! scene/component partition of each video with a sticky nonparametric
//! hidden Markov model ([`partition`]), pick a diverse set of high-scoring
//! representative segments per partition component ([`submodular`]), and
//! train a segment scorer against those representatives under
//! multiple-instance ranking losses ([`mil`]), optionally smoothing features
//! over similarity and temporal graphs first ([`graph`]). Synthetic
//! benchmark data ([`synth`]) and ROC evaluation ([`metrics`]) close the
//! loop.

pub mod data;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod mil;
pub mod partition;
pub mod rng;
pub mod submodular;
pub mod synth;

pub use error::{Error, Result};
