//! Partition-induced segment similarity and submodular representative
//! selection.
//!
//! Segments sharing a (scene, component) pair are compared through that
//! component's covariance; everything else gets similarity zero, so the
//! matrix is block diagonal. Coverage of a candidate set is measured by the
//! facility-location function, and the selection rule keeps the best-scoring
//! segment of each component, thresholded at a score percentile.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::{CholGaussian, PartitionResult};

/// Nonnegative symmetric segment-similarity matrix, zero across components.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    values: DMatrix<f64>,
}

impl SimilarityMatrix {
    /// Validates squareness, finiteness, nonnegativity, and exact symmetry.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let n = values.nrows();
        if n == 0 || values.ncols() != n {
            return Err(Error::Argument(format!(
                "similarity matrix must be square and non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Argument(format!(
                        "similarity entry ({i}, {j}) = {v} must be finite and non-negative"
                    )));
                }
                if values[(i, j)] != values[(j, i)] {
                    return Err(Error::Argument(format!(
                        "similarity entries ({i}, {j}) and ({j}, {i}) differ"
                    )));
                }
            }
        }
        Ok(SimilarityMatrix { values })
    }

    /// Number of segments.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }
}

/// Builds the block-diagonal similarity induced by a partition: for
/// segments i, j in the same (scene, component) pair with covariance Σ,
/// the entry is `max(0, x_iᵀ Σ⁻¹ x_j)`; across pairs it is zero.
///
/// The feature matrix may be raw or scorer-transformed, as long as it has
/// one row per partitioned segment and matches the emission dimension.
pub fn build_similarity(
    features: &DMatrix<f64>,
    partition: &PartitionResult,
) -> Result<SimilarityMatrix> {
    let n = partition.len();
    if features.nrows() != n {
        return Err(Error::Argument(format!(
            "partition covers {n} segments but features have {} rows",
            features.nrows()
        )));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("features must be finite".into()));
    }

    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, (&zi, &si)) in partition.z.iter().zip(&partition.s).enumerate() {
        groups.entry((zi, si)).or_default().push(i);
    }

    let mut values = DMatrix::zeros(n, n);
    for (pair, members) in &groups {
        let emission = partition.emissions.get(pair).ok_or_else(|| {
            Error::Argument(format!("occupied pair {pair:?} has no emission parameters"))
        })?;
        if emission.mean.len() != features.ncols() {
            return Err(Error::Argument(format!(
                "emission dimension {} does not match feature dimension {}",
                emission.mean.len(),
                features.ncols()
            )));
        }
        let gaussian = CholGaussian::new(emission.mean.clone(), &emission.cov)?;
        let whitened: Vec<DVector<f64>> = members
            .iter()
            .map(|&i| gaussian.whiten(&features.row(i).transpose()))
            .collect();
        for (a, &i) in members.iter().enumerate() {
            for (b, &j) in members.iter().enumerate().skip(a) {
                let entry = whitened[a].dot(&whitened[b]).max(0.0);
                values[(i, j)] = entry;
                values[(j, i)] = entry;
            }
        }
    }
    SimilarityMatrix::new(values)
}

fn check_selection(sim: &SimilarityMatrix, selected: &[usize]) -> Result<()> {
    for &j in selected {
        if j >= sim.len() {
            return Err(Error::Argument(format!(
                "selected index {j} outside {} segments",
                sim.len()
            )));
        }
    }
    Ok(())
}

/// Facility-location coverage `Σ_i max_{j∈C} S[i][j]`, zero for the empty
/// set.
pub fn facility_location_value(sim: &SimilarityMatrix, selected: &[usize]) -> Result<f64> {
    check_selection(sim, selected)?;
    if selected.is_empty() {
        return Ok(0.0);
    }
    let n = sim.len();
    let mut total = 0.0;
    for i in 0..n {
        let best = selected
            .iter()
            .map(|&j| sim.get(i, j))
            .fold(f64::NEG_INFINITY, f64::max);
        total += best;
    }
    Ok(total)
}

/// Coverage increase from adding `candidate` to `selected`.
pub fn marginal_gain(sim: &SimilarityMatrix, selected: &[usize], candidate: usize) -> Result<f64> {
    check_selection(sim, selected)?;
    if candidate >= sim.len() {
        return Err(Error::Argument(format!(
            "candidate index {candidate} outside {} segments",
            sim.len()
        )));
    }
    if selected.contains(&candidate) {
        return Err(Error::Argument(format!(
            "candidate {candidate} is already selected"
        )));
    }
    let mut gain = 0.0;
    for i in 0..sim.len() {
        let current = if selected.is_empty() {
            0.0
        } else {
            selected
                .iter()
                .map(|&j| sim.get(i, j))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        gain += (sim.get(i, candidate) - current).max(0.0);
    }
    Ok(gain)
}

/// Exhaustive facility-location maximizer over all subsets of size at most
/// `kappa_limit`. Ties go to the lexicographically smallest index set, the
/// empty set included.
pub fn brute_force_max(sim: &SimilarityMatrix, kappa_limit: usize) -> Result<(Vec<usize>, f64)> {
    let n = sim.len();
    if n > 20 {
        return Err(Error::Argument(format!(
            "{n} segments is too many to enumerate; use greedy selection instead"
        )));
    }
    if kappa_limit == 0 {
        return Err(Error::Argument("kappa_limit must be at least 1".into()));
    }
    let mut best_set: Vec<usize> = Vec::new();
    let mut best_value = 0.0_f64;
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize > kappa_limit {
            continue;
        }
        let subset: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        let value = facility_location_value(sim, &subset)?;
        if value > best_value || (value == best_value && subset < best_set) {
            best_value = value;
            best_set = subset;
        }
    }
    Ok((best_set, best_value))
}

/// MIL loss penalized by coverage: `loss − λ·F(C)`. Diagnostic only.
pub fn diversified_objective(
    mil_loss_value: f64,
    sim: &SimilarityMatrix,
    selected: &[usize],
    lambda: f64,
) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Argument(format!(
            "lambda must be non-negative and finite, got {lambda}"
        )));
    }
    Ok(mil_loss_value - lambda * facility_location_value(sim, selected)?)
}

/// Nearest-rank percentile: ascending sort, 1-based rank `ceil(p/100·n)`
/// clamped into `[1, n]`.
pub fn nearest_rank_percentile(values: &[f64], percentile: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("percentile of an empty list".into()));
    }
    if !(0.0..=100.0).contains(&percentile) || percentile.is_nan() {
        return Err(Error::Argument(format!(
            "percentile must lie in [0, 100], got {percentile}"
        )));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Argument("percentile of NaN values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((percentile / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    Ok(sorted[rank - 1])
}

/// Best-scoring segment of one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Winner {
    pub index: usize,
    pub score: f64,
}

/// Per-component score winners and the thresholded representative set.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativeSet {
    /// Score threshold: the configured percentile of all segment scores.
    pub epsilon: f64,
    /// Kept winners, ascending segment indices; at most one per component.
    pub indices: Vec<usize>,
    /// Winner of every occupied component, kept or not.
    pub winners: BTreeMap<(usize, usize), Winner>,
}

impl RepresentativeSet {
    pub fn to_json_string(&self) -> String {
        #[derive(Serialize)]
        struct WinnerWire {
            scene: usize,
            component: usize,
            index: usize,
            score: f64,
        }
        #[derive(Serialize)]
        struct SetWire<'a> {
            epsilon: f64,
            indices: &'a [usize],
            winners: Vec<WinnerWire>,
        }
        let winners = self
            .winners
            .iter()
            .map(|(&(scene, component), w)| WinnerWire {
                scene,
                component,
                index: w.index,
                score: w.score,
            })
            .collect();
        let wire = SetWire {
            epsilon: self.epsilon,
            indices: &self.indices,
            winners,
        };
        let mut text = serde_json::to_string_pretty(&wire).expect("plain data serializes");
        text.push('\n');
        text
    }
}

/// Selects the best-scoring segment of each occupied component and keeps
/// those whose score reaches the `epsilon_percentile` nearest-rank
/// percentile of all scores. Score ties go to the lowest segment index.
///
/// The kept set is never empty: the globally best-scoring segment wins its
/// component and no percentile exceeds the maximum score.
pub fn greedy_representatives(
    partition: &PartitionResult,
    scores: &[f64],
    epsilon_percentile: f64,
) -> Result<RepresentativeSet> {
    if partition.is_empty() {
        return Err(Error::Argument("partition covers no segments".into()));
    }
    if scores.len() != partition.len() {
        return Err(Error::Argument(format!(
            "{} scores for {} partitioned segments",
            scores.len(),
            partition.len()
        )));
    }
    for &score in scores {
        if !(0.0..=1.0).contains(&score) || score.is_nan() {
            return Err(Error::Argument(format!(
                "scores must lie in [0, 1], got {score}"
            )));
        }
    }
    let epsilon = nearest_rank_percentile(scores, epsilon_percentile)?;

    let mut winners: BTreeMap<(usize, usize), Winner> = BTreeMap::new();
    for (i, (&zi, &si)) in partition.z.iter().zip(&partition.s).enumerate() {
        let entry = winners.entry((zi, si)).or_insert(Winner {
            index: i,
            score: scores[i],
        });
        if scores[i] > entry.score {
            *entry = Winner {
                index: i,
                score: scores[i],
            };
        }
    }

    let mut indices: Vec<usize> = winners
        .values()
        .filter(|w| w.score >= epsilon)
        .map(|w| w.index)
        .collect();
    indices.sort_unstable();
    Ok(RepresentativeSet {
        epsilon,
        indices,
        winners,
    })
}
