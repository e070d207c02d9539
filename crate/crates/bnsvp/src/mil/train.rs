//! SGD training of the segment scorer over positive/negative bag pairs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::data::{Bag, Dataset};
use crate::error::{Error, Result};
use crate::graph::{median_distance, pairwise_distances};
use crate::mil::loss::{loss_gradient, SelectionRule};
use crate::mil::model::ScorerModel;
use crate::partition::{run_gibbs, PartitionConfig, PartitionResult};
use crate::rng::{derive_seed, rng_from_seed};
use crate::submodular::greedy_representatives;

/// Which MIL loss drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilLossKind {
    /// Hinge on the single best positive segment.
    Max,
    /// Hinge on the mean of the k best positive segments.
    TopK,
    /// Hinge on the mean over partition-selected representatives.
    Bnsvp,
}

impl fmt::Display for MilLossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MilLossKind::Max => "max",
            MilLossKind::TopK => "topk",
            MilLossKind::Bnsvp => "bnsvp",
        })
    }
}

impl FromStr for MilLossKind {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        match text {
            "max" => Ok(MilLossKind::Max),
            "topk" => Ok(MilLossKind::TopK),
            "bnsvp" => Ok(MilLossKind::Bnsvp),
            other => Err(Error::Argument(format!(
                "unknown loss '{other}'; expected max, topk, or bnsvp"
            ))),
        }
    }
}

/// Settings for [`train`].
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub loss_kind: MilLossKind,
    /// Positive segments averaged by the topk loss.
    pub k: usize,
    pub learning_rate: f64,
    /// Weight-decay coefficient on the logistic weights.
    pub l2_coeff: f64,
    pub epochs: usize,
    /// Epochs between bnsvp partition refreshes; `None` partitions once
    /// before the first epoch and never again.
    pub partition_refresh_every: Option<usize>,
    /// Percentile of segment scores that representatives must reach.
    pub epsilon_percentile: f64,
    /// Sampler settings for bnsvp partitions.
    pub partition_config: PartitionConfig,
    /// Seed for bag shuffling; partition seeds derive from
    /// `partition_config.seed`.
    pub seed: u64,
    /// Score propagated features instead of raw ones.
    pub use_propagation: bool,
    /// Penalty on squared steps between consecutive positive-bag scores.
    pub smoothness_coeff: f64,
    /// Penalty on the sum of positive-bag scores.
    pub sparsity_coeff: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss_kind: MilLossKind::Max,
            k: 3,
            learning_rate: 0.001,
            l2_coeff: 0.001,
            epochs: 30,
            partition_refresh_every: None,
            epsilon_percentile: 35.0,
            partition_config: PartitionConfig::default(),
            seed: 0,
            use_propagation: true,
            smoothness_coeff: 0.0,
            sparsity_coeff: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Argument(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        for (name, value) in [
            ("l2_coeff", self.l2_coeff),
            ("smoothness_coeff", self.smoothness_coeff),
            ("sparsity_coeff", self.sparsity_coeff),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::Argument(format!(
                    "{name} must be non-negative and finite, got {value}"
                )));
            }
        }
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        if self.partition_refresh_every == Some(0) {
            return Err(Error::Argument(
                "partition_refresh_every must be at least 1; use None to disable".into(),
            ));
        }
        if !(0.0..=100.0).contains(&self.epsilon_percentile) || self.epsilon_percentile.is_nan() {
            return Err(Error::Argument(format!(
                "epsilon_percentile must lie in [0, 100], got {}",
                self.epsilon_percentile
            )));
        }
        self.partition_config.validate()
    }
}

/// Per-epoch mean training loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub epoch_mean_loss: Vec<f64>,
}

impl TrainingLog {
    /// CSV with an `epoch,mean_loss` header and 1-based epoch numbers.
    pub fn to_csv_string(&self) -> String {
        let mut text = String::from("epoch,mean_loss\n");
        for (epoch, loss) in self.epoch_mean_loss.iter().enumerate() {
            text.push_str(&format!("{},{}\n", epoch + 1, loss));
        }
        text
    }
}

fn partition_positive_bags(
    model: &ScorerModel,
    pos_bags: &[&Bag],
    config: &PartitionConfig,
    round: u64,
) -> Result<BTreeMap<usize, PartitionResult>> {
    let mut partitions = BTreeMap::new();
    for (idx, bag) in pos_bags.iter().enumerate() {
        let mut bag_config = config.clone();
        bag_config.seed = derive_seed(derive_seed(config.seed, round), idx as u64);
        let transformed = model.transform(&bag.features)?;
        partitions.insert(idx, run_gibbs(&transformed, &bag_config)?);
    }
    Ok(partitions)
}

/// Trains a scorer with SGD: each epoch shuffles the positive and negative
/// bags (seeded) and pairs them cyclically. With the bnsvp loss, positive
/// bags are partitioned on their current transformed features before the
/// first epoch (and again on the refresh schedule), and the representative
/// set is recomputed from current scores at every step.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(ScorerModel, TrainingLog)> {
    config.validate()?;
    let pos_bags: Vec<&Bag> = dataset.abnormal_bags().collect();
    let neg_bags: Vec<&Bag> = dataset.normal_bags().collect();
    if pos_bags.is_empty() || neg_bags.is_empty() {
        return Err(Error::Argument(format!(
            "training needs both bag labels, got {} positive and {} negative",
            pos_bags.len(),
            neg_bags.len()
        )));
    }

    let lengthscale = if config.use_propagation {
        let mut distances = Vec::new();
        for bag in &dataset.bags {
            distances.extend(pairwise_distances(&bag.features));
        }
        Some(median_distance(&distances))
    } else {
        None
    };
    let mut model = ScorerModel::zeroed(dataset.dim(), lengthscale)?;

    let mut partitions = if config.loss_kind == MilLossKind::Bnsvp {
        partition_positive_bags(&model, &pos_bags, &config.partition_config, 0)?
    } else {
        BTreeMap::new()
    };

    let mut rng = rng_from_seed(config.seed);
    let mut epoch_mean_loss = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        if config.loss_kind == MilLossKind::Bnsvp && epoch > 1 {
            if let Some(every) = config.partition_refresh_every {
                if (epoch - 1) % every == 0 {
                    let round = ((epoch - 1) / every) as u64;
                    partitions =
                        partition_positive_bags(&model, &pos_bags, &config.partition_config, round)?;
                }
            }
        }

        let mut pos_order: Vec<usize> = (0..pos_bags.len()).collect();
        pos_order.shuffle(&mut rng);
        let mut neg_order: Vec<usize> = (0..neg_bags.len()).collect();
        neg_order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for (slot, &pos_idx) in pos_order.iter().enumerate() {
            let neg_idx = neg_order[slot % neg_order.len()];
            let rule = match config.loss_kind {
                MilLossKind::Max => SelectionRule::Max,
                MilLossKind::TopK => SelectionRule::TopK(config.k),
                MilLossKind::Bnsvp => {
                    let scores = model.score_bag(pos_bags[pos_idx])?;
                    let set = greedy_representatives(
                        &partitions[&pos_idx],
                        &scores,
                        config.epsilon_percentile,
                    )?;
                    SelectionRule::Representatives(set.indices)
                }
            };
            let step = loss_gradient(&model, pos_bags[pos_idx], neg_bags[neg_idx], &rule, config)?;
            model.weights.axpy(-config.learning_rate, &step.weights, 1.0);
            model.bias -= config.learning_rate * step.bias;
            if let Some(propagation) = &mut model.propagation {
                let grad_f = step.feature_weight.as_ref().expect("propagation gradient");
                let grad_t = step.temporal_weight.as_ref().expect("propagation gradient");
                propagation.feature.weight -= grad_f * config.learning_rate;
                propagation.temporal.weight -= grad_t * config.learning_rate;
            }
            loss_sum += step.loss;
        }
        epoch_mean_loss.push(loss_sum / pos_bags.len() as f64);
    }

    Ok((model, TrainingLog { epoch_mean_loss }))
}
