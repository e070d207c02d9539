//! Stick-breaking weights, Dirichlet draws, and sticky transition rows.

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Gamma};

use crate::error::{Error, Result};

/// Draws truncated stick-breaking weights from a GEM prior.
///
/// Returns `truncation + 1` non-negative weights summing to one; the last
/// entry is the unbroken remainder of the stick.
pub fn sample_gem<R: Rng + ?Sized>(
    concentration: f64,
    truncation: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(concentration > 0.0) || !concentration.is_finite() {
        return Err(Error::Argument(format!(
            "concentration must be positive and finite, got {concentration}"
        )));
    }
    if truncation == 0 {
        return Err(Error::Argument("truncation must be at least 1".into()));
    }
    sample_stick_weights(&vec![1.0; truncation], &vec![concentration; truncation], rng)
}

/// Draws `fractions.len() + 1` stick weights with per-stick Beta parameters.
///
/// Used for both the GEM prior (`Beta(1, concentration)` sticks) and its
/// posterior under assignment counts.
pub(crate) fn sample_stick_weights<R: Rng + ?Sized>(
    alphas: &[f64],
    betas: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut weights = Vec::with_capacity(alphas.len() + 1);
    let mut remainder = 1.0;
    for (&a, &b) in alphas.iter().zip(betas) {
        let fraction = Beta::new(a, b)
            .map_err(|e| Error::Numeric(format!("Beta({a}, {b}): {e}")))?
            .sample(rng);
        let weight = fraction * remainder;
        weights.push(weight);
        remainder -= weight;
        remainder = remainder.max(0.0);
    }
    weights.push(remainder);
    Ok(weights)
}

/// Draws from a Dirichlet distribution via normalized Gamma samples.
///
/// Parameters may individually be zero (those coordinates get weight zero)
/// but at least one must be positive. If every Gamma draw underflows to
/// zero the draw collapses deterministically onto the largest parameter.
pub fn sample_dirichlet<R: Rng + ?Sized>(params: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if params.is_empty() {
        return Err(Error::Argument("Dirichlet needs at least one parameter".into()));
    }
    if params.iter().any(|&p| !p.is_finite() || p < 0.0) {
        return Err(Error::Argument(
            "Dirichlet parameters must be finite and non-negative".into(),
        ));
    }
    if !params.iter().any(|&p| p > 0.0) {
        return Err(Error::Argument(
            "Dirichlet needs at least one positive parameter".into(),
        ));
    }
    let mut draws = Vec::with_capacity(params.len());
    for &p in params {
        if p > 0.0 {
            let gamma = Gamma::new(p, 1.0)
                .map_err(|e| Error::Numeric(format!("Gamma({p}, 1): {e}")))?;
            draws.push(gamma.sample(rng));
        } else {
            draws.push(0.0);
        }
    }
    let total: f64 = draws.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        let argmax = params
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        let mut one_hot = vec![0.0; params.len()];
        one_hot[argmax] = 1.0;
        return Ok(one_hot);
    }
    Ok(draws.into_iter().map(|d| d / total).collect())
}

/// Draws one transition row from a Dirichlet whose base measure is the
/// global weights boosted at the self-transition coordinate.
pub fn sample_sticky_transition_row<R: Rng + ?Sized>(
    global_weights: &[f64],
    self_index: usize,
    alpha: f64,
    rho: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    sample_transition_row_posterior(global_weights, self_index, alpha, rho, None, rng)
}

/// [`sample_sticky_transition_row`] with observed transition counts folded
/// into the Dirichlet parameters.
pub(crate) fn sample_transition_row_posterior<R: Rng + ?Sized>(
    global_weights: &[f64],
    self_index: usize,
    alpha: f64,
    rho: f64,
    counts: Option<&[usize]>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Argument(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::Argument(format!(
            "rho must be non-negative and finite, got {rho}"
        )));
    }
    if self_index >= global_weights.len() {
        return Err(Error::Argument(format!(
            "self index {self_index} out of range for {} states",
            global_weights.len()
        )));
    }
    if let Some(c) = counts {
        if c.len() != global_weights.len() {
            return Err(Error::Argument(format!(
                "got {} counts for {} states",
                c.len(),
                global_weights.len()
            )));
        }
    }
    let params: Vec<f64> = global_weights
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            alpha * b
                + if k == self_index { rho } else { 0.0 }
                + counts.map_or(0.0, |c| c[k] as f64)
        })
        .collect();
    sample_dirichlet(&params, rng)
}

/// Expected self-transition probability under the sticky prior:
/// `(alpha * beta_j + rho) / (alpha + rho)`.
pub fn expected_self_transition(alpha: f64, rho: f64, beta_j: f64) -> f64 {
    (alpha * beta_j + rho) / (alpha + rho)
}

/// Expected probability of moving to another given state under the sticky
/// prior: `alpha * beta_k / (alpha + rho)`.
pub fn expected_cross_transition(alpha: f64, rho: f64, beta_k: f64) -> f64 {
    alpha * beta_k / (alpha + rho)
}

/// Number of occupied tables after seating `n` customers in a Chinese
/// restaurant with concentration `theta`.
pub(crate) fn crp_table_count<R: Rng + ?Sized>(n: usize, theta: f64, rng: &mut R) -> usize {
    if n == 0 {
        return 0;
    }
    if !(theta > 0.0) {
        return 1;
    }
    let mut tables = 0;
    for seated in 0..n {
        if rng.random::<f64>() * (theta + seated as f64) < theta {
            tables += 1;
        }
    }
    tables
}

/// Resamples the global stick weights given transition counts.
///
/// Table counts are simulated per state pair under the sticky base measure,
/// the self-transition tables attributable to the stickiness boost are
/// discounted, and the column totals drive a truncated stick-breaking
/// posterior update. Returns `L + 1` weights (remainder last).
pub(crate) fn posterior_global_weights<R: Rng + ?Sized>(
    transition_counts: &[Vec<usize>],
    global_weights: &[f64],
    alpha: f64,
    gamma: f64,
    rho: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n_states = global_weights.len();
    if transition_counts.len() != n_states
        || transition_counts.iter().any(|row| row.len() != n_states)
    {
        return Err(Error::Argument(
            "transition counts must be square and match the state count".into(),
        ));
    }
    let mut adjusted_tables = vec![0.0; n_states];
    for j in 0..n_states {
        for k in 0..n_states {
            let boost = if j == k { rho } else { 0.0 };
            let theta = alpha * global_weights[k] + boost;
            let mut tables = crp_table_count(transition_counts[j][k], theta, rng);
            if j == k && rho > 0.0 && tables > 0 {
                let p_override = rho / (rho + alpha * global_weights[j]);
                let overrides = Binomial::new(tables as u64, p_override)
                    .map_err(|e| Error::Numeric(format!("Binomial: {e}")))?
                    .sample(rng);
                tables -= overrides as usize;
            }
            adjusted_tables[k] += tables as f64;
        }
    }
    let mut tail = vec![0.0; n_states];
    let mut acc = 0.0;
    for k in (0..n_states).rev() {
        tail[k] = acc;
        acc += adjusted_tables[k];
    }
    let alphas: Vec<f64> = adjusted_tables.iter().map(|&m| 1.0 + m).collect();
    let betas: Vec<f64> = tail.iter().map(|&t| gamma + t).collect();
    sample_stick_weights(&alphas, &betas, rng)
}

/// Folds the stick remainder into the last explicit state, producing a
/// proper length-`L` distribution over truncated states.
pub(crate) fn fold_remainder(weights: &[f64]) -> Vec<f64> {
    let mut folded = weights[..weights.len() - 1].to_vec();
    *folded.last_mut().unwrap() += weights[weights.len() - 1];
    folded
}
