//! Weakly supervised scorer training: a logistic segment scorer with
//! optional graph propagation, ranking losses over bag score aggregates,
//! analytic subgradients with a finite-difference verifier, and the SGD
//! loop that ties them to partition-driven representative selection.

mod loss;
mod model;
mod train;

pub use loss::{
    derive_selection, finite_difference_check, loss_gradient, max_mil_loss,
    representative_mil_loss, selection_margin, topk_mil_loss, SelectionRule, StepGradient,
};
pub use model::{Propagation, ScorerModel};
pub use train::{train, MilLossKind, TrainConfig, TrainingLog};
