//! Ranking losses over bag scores, their analytic subgradients, and a
//! finite-difference verifier.
//!
//! Every loss hinges the margin between an aggregate of positive-bag scores
//! and the best negative-bag score: the aggregate is the single best score,
//! the mean of the top k, or the mean over a representative set.

use nalgebra::{DMatrix, DVector};

use crate::data::Bag;
use crate::error::{Error, Result};
use crate::graph::renormalized_laplacian;
use crate::mil::model::{sigmoid, ScorerModel};
use crate::mil::train::{MilLossKind, TrainConfig};
use crate::partition::run_gibbs;
use crate::submodular::{greedy_representatives, RepresentativeSet};

/// Which positive segments feed the hinge margin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectionRule {
    /// The single best-scoring segment.
    Max,
    /// The k best-scoring segments, averaged.
    TopK(usize),
    /// A fixed set of segment indices, averaged.
    Representatives(Vec<usize>),
}

/// Margin loss against the best positive score: `[1 − max(pos) + max(neg)]₊`.
pub fn max_mil_loss(pos_scores: &[f64], neg_scores: &[f64]) -> Result<f64> {
    topk_mil_loss(pos_scores, neg_scores, 1)
}

/// Margin loss against the mean of the k best positive scores.
pub fn topk_mil_loss(pos_scores: &[f64], neg_scores: &[f64], k: usize) -> Result<f64> {
    if pos_scores.is_empty() || neg_scores.is_empty() {
        return Err(Error::Argument("score vectors must be non-empty".into()));
    }
    if k == 0 || k > pos_scores.len() {
        return Err(Error::Argument(format!(
            "k must lie in [1, {}], got {k}",
            pos_scores.len()
        )));
    }
    let selection = top_k_indices(pos_scores, k);
    Ok(selection_mean_loss(pos_scores, &selection, neg_scores))
}

/// Margin loss against the mean score of the kept representatives.
pub fn representative_mil_loss(
    pos_scores: &[f64],
    rep_set: &RepresentativeSet,
    neg_scores: &[f64],
) -> Result<f64> {
    if neg_scores.is_empty() {
        return Err(Error::Argument("score vectors must be non-empty".into()));
    }
    check_representatives(&rep_set.indices, pos_scores.len())?;
    Ok(selection_mean_loss(pos_scores, &rep_set.indices, neg_scores))
}

fn check_representatives(indices: &[usize], n: usize) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::DegenerateSelection(
            "representative set is empty; lower the epsilon percentile".into(),
        ));
    }
    let mut seen = vec![false; n];
    for &i in indices {
        if i >= n {
            return Err(Error::Argument(format!(
                "representative index {i} outside {n} segments"
            )));
        }
        if seen[i] {
            return Err(Error::Argument(format!("representative index {i} repeats")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Indices of the k largest scores, best first, ties to the lowest index.
fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

fn selection_mean_loss(pos_scores: &[f64], selection: &[usize], neg_scores: &[f64]) -> f64 {
    let mean: f64 =
        selection.iter().map(|&i| pos_scores[i]).sum::<f64>() / selection.len() as f64;
    let worst_negative = neg_scores[argmax(neg_scores)];
    (1.0 - mean + worst_negative).max(0.0)
}

/// One score pass over a bag, keeping what the backward pass needs.
struct Forward {
    fused: DMatrix<f64>,
    /// Propagated-but-unweighted features per branch.
    bases: Option<(DMatrix<f64>, DMatrix<f64>)>,
    probs: Vec<f64>,
}

fn forward(model: &ScorerModel, features: &DMatrix<f64>) -> Result<Forward> {
    let fused = model.transform(features)?;
    if fused.ncols() != model.weights.len() {
        return Err(Error::Argument(format!(
            "model expects {} fused features, bag provides {}",
            model.weights.len(),
            fused.ncols()
        )));
    }
    let probs: Vec<f64> = (0..fused.nrows())
        .map(|i| sigmoid(fused.row(i).transpose().dot(&model.weights) + model.bias))
        .collect();
    let bases = model
        .propagation
        .as_ref()
        .map(|p| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
            let feature = renormalized_laplacian(&p.feature.adjacency(features)?)? * features;
            let temporal = renormalized_laplacian(&p.temporal.adjacency(features)?)? * features;
            Ok((feature, temporal))
        })
        .transpose()?;
    Ok(Forward { fused, bases, probs })
}

fn resolve_selection(probs: &[f64], rule: &SelectionRule) -> Result<Vec<usize>> {
    match rule {
        SelectionRule::Max => Ok(vec![argmax(probs)]),
        SelectionRule::TopK(k) => {
            if *k == 0 || *k > probs.len() {
                return Err(Error::Argument(format!(
                    "k must lie in [1, {}], got {k}",
                    probs.len()
                )));
            }
            Ok(top_k_indices(probs, *k))
        }
        SelectionRule::Representatives(indices) => {
            check_representatives(indices, probs.len())?;
            Ok(indices.clone())
        }
    }
}

/// Loss value and full-objective gradient of one positive/negative bag pair.
#[derive(Debug, Clone)]
pub struct StepGradient {
    /// The hinge loss alone.
    pub loss: f64,
    /// Hinge plus weight decay and the optional regularizers; this is the
    /// quantity the finite-difference check differentiates.
    pub objective: f64,
    pub weights: DVector<f64>,
    pub bias: f64,
    pub feature_weight: Option<DMatrix<f64>>,
    pub temporal_weight: Option<DMatrix<f64>>,
}

/// Analytic subgradient of the hinge objective for one bag pair.
///
/// Argmax and top-k ties resolve to the lowest segment index; a hinge
/// sitting exactly at zero contributes nothing. Weight decay
/// `l2_coeff·‖w‖²` applies to the logistic weights only; the optional
/// smoothness and sparsity terms act on the positive bag's scores.
pub fn loss_gradient(
    model: &ScorerModel,
    pos_bag: &Bag,
    neg_bag: &Bag,
    rule: &SelectionRule,
    config: &TrainConfig,
) -> Result<StepGradient> {
    pinned_loss_gradient(model, pos_bag, neg_bag, rule, None, config)
}

/// [`loss_gradient`] with the negative-bag pick optionally pinned, so the
/// finite-difference check can hold it at the base point.
fn pinned_loss_gradient(
    model: &ScorerModel,
    pos_bag: &Bag,
    neg_bag: &Bag,
    rule: &SelectionRule,
    pinned_negative: Option<usize>,
    config: &TrainConfig,
) -> Result<StepGradient> {
    let pos = forward(model, &pos_bag.features)?;
    let neg = forward(model, &neg_bag.features)?;
    if neg.probs.is_empty() {
        return Err(Error::Argument("negative bag has no segments".into()));
    }
    let selection = resolve_selection(&pos.probs, rule)?;
    let neg_best = pinned_negative.unwrap_or_else(|| argmax(&neg.probs));
    let mean: f64 =
        selection.iter().map(|&i| pos.probs[i]).sum::<f64>() / selection.len() as f64;
    let loss = (1.0 - mean + neg.probs[neg_best]).max(0.0);
    let active = loss > 0.0;

    let n_pos = pos.probs.len();
    let mut pos_coeff = DVector::zeros(n_pos);
    if active {
        let share = -1.0 / selection.len() as f64;
        for &i in &selection {
            pos_coeff[i] += share * pos.probs[i] * (1.0 - pos.probs[i]);
        }
    }

    let mut objective = loss + config.l2_coeff * model.weights.norm_squared();
    if config.sparsity_coeff != 0.0 {
        objective += config.sparsity_coeff * pos.probs.iter().sum::<f64>();
        for i in 0..n_pos {
            pos_coeff[i] += config.sparsity_coeff * pos.probs[i] * (1.0 - pos.probs[i]);
        }
    }
    if config.smoothness_coeff != 0.0 {
        for i in 0..n_pos.saturating_sub(1) {
            let step = pos.probs[i + 1] - pos.probs[i];
            objective += config.smoothness_coeff * step * step;
            let pull = 2.0 * config.smoothness_coeff * step;
            pos_coeff[i] -= pull * pos.probs[i] * (1.0 - pos.probs[i]);
            pos_coeff[i + 1] += pull * pos.probs[i + 1] * (1.0 - pos.probs[i + 1]);
        }
    }

    let mut neg_coeff = DVector::zeros(neg.probs.len());
    if active {
        neg_coeff[neg_best] = neg.probs[neg_best] * (1.0 - neg.probs[neg_best]);
    }

    let mut grad_weights = pos.fused.tr_mul(&pos_coeff) + neg.fused.tr_mul(&neg_coeff);
    grad_weights += model.weights.scale(2.0 * config.l2_coeff);
    let grad_bias = pos_coeff.sum() + neg_coeff.sum();

    let (feature_weight, temporal_weight) = match (&model.propagation, &pos.bases, &neg.bases) {
        (Some(propagation), Some(pos_bases), Some(neg_bases)) => {
            let m_feature = propagation.feature.weight.ncols();
            let m_temporal = propagation.temporal.weight.ncols();
            let head_feature = model.weights.rows(0, m_feature).into_owned();
            let head_temporal = model.weights.rows(m_feature, m_temporal).into_owned();
            let grad_f = (pos_bases.0.tr_mul(&pos_coeff) + neg_bases.0.tr_mul(&neg_coeff))
                * head_feature.transpose();
            let grad_t = (pos_bases.1.tr_mul(&pos_coeff) + neg_bases.1.tr_mul(&neg_coeff))
                * head_temporal.transpose();
            (Some(grad_f), Some(grad_t))
        }
        _ => (None, None),
    };

    Ok(StepGradient {
        loss,
        objective,
        weights: grad_weights,
        bias: grad_bias,
        feature_weight,
        temporal_weight,
    })
}

/// Builds the selection rule a config implies at the current model state;
/// the bnsvp kind partitions the positive bag's transformed features.
pub fn derive_selection(
    model: &ScorerModel,
    pos_bag: &Bag,
    config: &TrainConfig,
) -> Result<SelectionRule> {
    match config.loss_kind {
        MilLossKind::Max => Ok(SelectionRule::Max),
        MilLossKind::TopK => Ok(SelectionRule::TopK(config.k)),
        MilLossKind::Bnsvp => {
            let transformed = model.transform(&pos_bag.features)?;
            let partition = run_gibbs(&transformed, &config.partition_config)?;
            let scores = model.score_bag(pos_bag)?;
            let set = greedy_representatives(&partition, &scores, config.epsilon_percentile)?;
            Ok(SelectionRule::Representatives(set.indices))
        }
    }
}

/// Distance to the nearest gradient kink: the hinge itself, the selection
/// boundary in the positive bag, and the argmax tie in the negative bag.
/// Fixed representative sets have no positive-side boundary.
pub fn selection_margin(
    model: &ScorerModel,
    pos_bag: &Bag,
    neg_bag: &Bag,
    rule: &SelectionRule,
) -> Result<f64> {
    let pos = forward(model, &pos_bag.features)?;
    let neg = forward(model, &neg_bag.features)?;
    let selection = resolve_selection(&pos.probs, rule)?;
    let loss = selection_mean_loss(&pos.probs, &selection, &neg.probs);

    let mut margin = loss.abs();
    let boundary = match rule {
        SelectionRule::Max => Some(1),
        SelectionRule::TopK(k) => Some(*k),
        SelectionRule::Representatives(_) => None,
    };
    if let Some(k) = boundary {
        if k < pos.probs.len() {
            let mut sorted = pos.probs.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            margin = margin.min(sorted[k - 1] - sorted[k]);
        }
    }
    if neg.probs.len() > 1 {
        let mut sorted = neg.probs.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        margin = margin.min(sorted[0] - sorted[1]);
    }
    Ok(margin)
}

/// Worst relative disagreement between the analytic gradient and central
/// finite differences (step 1e-5) over every parameter.
///
/// The positive-segment selection and the negative-bag pick are frozen at
/// the base point, so the differenced objective is smooth away from the
/// hinge and matches the true loss wherever those choices are locally
/// constant.
pub fn finite_difference_check(
    model: &ScorerModel,
    pos_bag: &Bag,
    neg_bag: &Bag,
    config: &TrainConfig,
) -> Result<f64> {
    const STEP: f64 = 1e-5;
    let rule = derive_selection(model, pos_bag, config)?;
    let base_scores = model.score_bag(pos_bag)?;
    let frozen = SelectionRule::Representatives(resolve_selection(&base_scores, &rule)?);
    let neg_pick = Some(argmax(&model.score_bag(neg_bag)?));
    let analytic = pinned_loss_gradient(model, pos_bag, neg_bag, &frozen, neg_pick, config)?;

    let objective = |m: &ScorerModel| -> Result<f64> {
        Ok(pinned_loss_gradient(m, pos_bag, neg_bag, &frozen, neg_pick, config)?.objective)
    };
    let mut worst = 0.0_f64;
    let mut compare = |analytic_entry: f64, perturb: &mut dyn FnMut(&mut ScorerModel, f64)| {
        let mut plus = model.clone();
        perturb(&mut plus, STEP);
        let mut minus = model.clone();
        perturb(&mut minus, -STEP);
        let numeric = (objective(&plus)? - objective(&minus)?) / (2.0 * STEP);
        let scale = analytic_entry.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic_entry - numeric).abs() / scale);
        Ok::<(), Error>(())
    };

    for idx in 0..model.weights.len() {
        compare(analytic.weights[idx], &mut |m, d| m.weights[idx] += d)?;
    }
    compare(analytic.bias, &mut |m, d| m.bias += d)?;
    if let Some(propagation) = &model.propagation {
        let shape_f = propagation.feature.weight.shape();
        let grad_f = analytic.feature_weight.as_ref().expect("propagation gradient");
        for r in 0..shape_f.0 {
            for c in 0..shape_f.1 {
                compare(grad_f[(r, c)], &mut |m, d| {
                    m.propagation.as_mut().unwrap().feature.weight[(r, c)] += d;
                })?;
            }
        }
        let shape_t = propagation.temporal.weight.shape();
        let grad_t = analytic.temporal_weight.as_ref().expect("propagation gradient");
        for r in 0..shape_t.0 {
            for c in 0..shape_t.1 {
                compare(grad_t[(r, c)], &mut |m, d| {
                    m.propagation.as_mut().unwrap().temporal.weight[(r, c)] += d;
                })?;
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BagLabel;
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn rep_set(indices: Vec<usize>) -> RepresentativeSet {
        RepresentativeSet {
            epsilon: 0.0,
            indices,
            winners: Default::default(),
        }
    }

    #[test]
    fn max_loss_hand_cases() {
        assert_abs_diff_eq!(
            max_mil_loss(&[0.9, 0.3], &[0.1, 0.05]).unwrap(),
            0.2,
            epsilon = 1e-15
        );
        assert_eq!(max_mil_loss(&[1.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(max_mil_loss(&[0.0], &[1.0]).unwrap(), 2.0);
        assert!(max_mil_loss(&[], &[0.5]).is_err());
        assert!(max_mil_loss(&[0.5], &[]).is_err());
    }

    #[test]
    fn topk_loss_hand_cases() {
        assert_abs_diff_eq!(
            topk_mil_loss(&[0.8, 0.6, 0.1], &[0.2], 2).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        let constant = topk_mil_loss(&[0.4, 0.4, 0.4], &[0.3], 3).unwrap();
        assert_abs_diff_eq!(constant, 1.0 - 0.4 + 0.3, epsilon = 1e-12);
        assert!(topk_mil_loss(&[0.5], &[0.5], 0).is_err());
        assert!(topk_mil_loss(&[0.5], &[0.5], 2).is_err());
    }

    #[test]
    fn representative_loss_hand_cases() {
        assert_abs_diff_eq!(
            representative_mil_loss(&[0.1, 0.8], &rep_set(vec![1]), &[0.2]).unwrap(),
            0.4,
            epsilon = 1e-12
        );
        let all = representative_mil_loss(&[0.8, 0.6], &rep_set(vec![0, 1]), &[0.2]).unwrap();
        assert_eq!(all, topk_mil_loss(&[0.8, 0.6], &[0.2], 2).unwrap());
        assert_eq!(
            representative_mil_loss(&[1.0, 1.0], &rep_set(vec![0, 1]), &[0.0]).unwrap(),
            0.0
        );
        assert!(matches!(
            representative_mil_loss(&[0.5], &rep_set(vec![]), &[0.5]),
            Err(Error::DegenerateSelection(_))
        ));
        assert!(representative_mil_loss(&[0.5], &rep_set(vec![3]), &[0.5]).is_err());
    }

    proptest! {
        #[test]
        fn topk_with_k_one_is_exactly_max(
            pos in proptest::collection::vec(0.0..1.0_f64, 1..12),
            neg in proptest::collection::vec(0.0..1.0_f64, 1..12),
        ) {
            prop_assert_eq!(
                topk_mil_loss(&pos, &neg, 1).unwrap(),
                max_mil_loss(&pos, &neg).unwrap()
            );
        }

        #[test]
        fn losses_stay_within_the_margin_range(
            pos in proptest::collection::vec(0.001..0.999_f64, 1..12),
            neg in proptest::collection::vec(0.001..0.999_f64, 1..12),
            k_seed in 0usize..100,
        ) {
            let k = k_seed % pos.len() + 1;
            for loss in [
                max_mil_loss(&pos, &neg).unwrap(),
                topk_mil_loss(&pos, &neg, k).unwrap(),
            ] {
                prop_assert!((0.0..=2.0).contains(&loss));
            }
        }

        #[test]
        fn losses_ignore_score_order(
            pos in proptest::collection::vec(0.0..1.0_f64, 2..10),
            neg in proptest::collection::vec(0.0..1.0_f64, 2..10),
            k_seed in 0usize..100,
        ) {
            let k = k_seed % pos.len() + 1;
            let mut pos_rev = pos.clone();
            pos_rev.reverse();
            let mut neg_rev = neg.clone();
            neg_rev.reverse();
            prop_assert_eq!(
                topk_mil_loss(&pos, &neg, k).unwrap(),
                topk_mil_loss(&pos_rev, &neg_rev, k).unwrap()
            );
        }
    }

    fn bag(id: &str, label: BagLabel, rows: usize, dim: usize, seed: u64) -> Bag {
        let mut rng = rng_from_seed(seed);
        let features = DMatrix::from_fn(rows, dim, |_, _| StandardNormal.sample(&mut rng));
        Bag::new(id.to_string(), features, label, None).unwrap()
    }

    fn plain_config(loss_kind: MilLossKind) -> TrainConfig {
        TrainConfig {
            loss_kind,
            use_propagation: false,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn gradient_matches_hand_derivation_in_one_dimension() {
        let model = ScorerModel {
            weights: DVector::from_row_slice(&[0.3]),
            bias: -0.1,
            propagation: None,
        };
        let pos = Bag::new(
            "pos",
            DMatrix::from_row_slice(1, 1, &[2.0]),
            BagLabel::Abnormal,
            None,
        )
        .unwrap();
        let neg = Bag::new(
            "neg",
            DMatrix::from_row_slice(1, 1, &[-1.0]),
            BagLabel::Normal,
            None,
        )
        .unwrap();
        let config = plain_config(MilLossKind::Max);
        let step = loss_gradient(&model, &pos, &neg, &SelectionRule::Max, &config).unwrap();

        let p_pos = sigmoid(0.3 * 2.0 - 0.1);
        let p_neg = sigmoid(0.3 * -1.0 - 0.1);
        assert_abs_diff_eq!(step.loss, 1.0 - p_pos + p_neg, epsilon = 1e-15);
        let expected_w = -p_pos * (1.0 - p_pos) * 2.0 + p_neg * (1.0 - p_neg) * -1.0
            + 2.0 * config.l2_coeff * 0.3;
        let expected_b = -p_pos * (1.0 - p_pos) + p_neg * (1.0 - p_neg);
        assert_abs_diff_eq!(step.weights[0], expected_w, epsilon = 1e-14);
        assert_abs_diff_eq!(step.bias, expected_b, epsilon = 1e-14);
    }

    #[test]
    fn saturated_hinge_leaves_only_weight_decay() {
        let model = ScorerModel {
            weights: DVector::from_row_slice(&[100.0]),
            bias: 0.0,
            propagation: None,
        };
        let pos = Bag::new(
            "pos",
            DMatrix::from_row_slice(1, 1, &[8.0]),
            BagLabel::Abnormal,
            None,
        )
        .unwrap();
        let neg = Bag::new(
            "neg",
            DMatrix::from_row_slice(1, 1, &[-8.0]),
            BagLabel::Normal,
            None,
        )
        .unwrap();
        let config = plain_config(MilLossKind::Max);
        let step = loss_gradient(&model, &pos, &neg, &SelectionRule::Max, &config).unwrap();
        assert_eq!(step.loss, 0.0);
        assert_eq!(step.weights[0], 2.0 * config.l2_coeff * 100.0);
        assert_eq!(step.bias, 0.0);

        let fd = finite_difference_check(&model, &pos, &neg, &config).unwrap();
        assert!(fd < 1e-6, "saturated-point disagreement {fd}");
    }

    #[test]
    fn finite_differences_confirm_plain_gradients() {
        let pos = bag("pos", BagLabel::Abnormal, 6, 3, 11);
        let neg = bag("neg", BagLabel::Normal, 4, 3, 12);
        let config = plain_config(MilLossKind::Max);
        let zero = ScorerModel::zeroed(3, None).unwrap();
        let err = finite_difference_check(&zero, &pos, &neg, &config).unwrap();
        assert!(err < 1e-4, "zero-model disagreement {err}");

        let mut rng = rng_from_seed(13);
        let model = ScorerModel {
            weights: DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng)),
            bias: 0.2,
            propagation: None,
        };
        let err = finite_difference_check(&model, &pos, &neg, &config).unwrap();
        assert!(err < 1e-4, "random-model disagreement {err}");
    }

    #[test]
    fn finite_differences_confirm_propagation_gradients() {
        let pos = bag("pos", BagLabel::Abnormal, 5, 3, 21);
        let neg = bag("neg", BagLabel::Normal, 5, 3, 22);
        let mut rng = rng_from_seed(23);
        let mut model = ScorerModel::zeroed(3, Some(1.5)).unwrap();
        model.weights = DVector::from_fn(6, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            0.5 * v
        });
        model.bias = -0.1;
        let config = TrainConfig {
            loss_kind: MilLossKind::TopK,
            k: 2,
            ..TrainConfig::default()
        };
        let err = finite_difference_check(&model, &pos, &neg, &config).unwrap();
        assert!(err < 1e-4, "propagation disagreement {err}");
    }

    #[test]
    fn finite_differences_confirm_regularizer_gradients() {
        let pos = bag("pos", BagLabel::Abnormal, 6, 2, 31);
        let neg = bag("neg", BagLabel::Normal, 4, 2, 32);
        let mut rng = rng_from_seed(33);
        let model = ScorerModel {
            weights: DVector::from_fn(2, |_, _| StandardNormal.sample(&mut rng)),
            bias: 0.05,
            propagation: None,
        };
        let config = TrainConfig {
            loss_kind: MilLossKind::Max,
            smoothness_coeff: 0.3,
            sparsity_coeff: 0.2,
            use_propagation: false,
            ..TrainConfig::default()
        };
        let err = finite_difference_check(&model, &pos, &neg, &config).unwrap();
        assert!(err < 1e-4, "regularizer disagreement {err}");
    }

    #[test]
    fn selection_margin_reports_tie_distances() {
        let model = ScorerModel::zeroed(2, None).unwrap();
        let pos = bag("pos", BagLabel::Abnormal, 4, 2, 41);
        let neg = bag("neg", BagLabel::Normal, 3, 2, 42);
        // The zero model ties every score at 0.5.
        let margin = selection_margin(&model, &pos, &neg, &SelectionRule::Max).unwrap();
        assert_eq!(margin, 0.0);

        let trained = ScorerModel {
            weights: DVector::from_row_slice(&[1.0, -1.0]),
            bias: 0.0,
            propagation: None,
        };
        let margin =
            selection_margin(&trained, &pos, &neg, &SelectionRule::Representatives(vec![0]))
                .unwrap();
        assert!(margin > 0.0);
    }

    #[test]
    fn gradient_rejects_bad_selections() {
        let model = ScorerModel::zeroed(2, None).unwrap();
        let pos = bag("pos", BagLabel::Abnormal, 3, 2, 51);
        let neg = bag("neg", BagLabel::Normal, 3, 2, 52);
        let config = plain_config(MilLossKind::Max);
        assert!(loss_gradient(&model, &pos, &neg, &SelectionRule::TopK(9), &config).is_err());
        assert!(matches!(
            loss_gradient(
                &model,
                &pos,
                &neg,
                &SelectionRule::Representatives(vec![]),
                &config
            ),
            Err(Error::DegenerateSelection(_))
        ));
        assert!(loss_gradient(
            &model,
            &pos,
            &neg,
            &SelectionRule::Representatives(vec![1, 1]),
            &config
        )
        .is_err());
    }
}
