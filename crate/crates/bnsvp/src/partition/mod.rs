//! Scene/component partitioning of a video with a sticky nonparametric
//! hidden Markov model.
//!
//! Each segment gets a scene id `z_i` (hidden Markov state) and a component
//! id `s_i` (mixture component within that scene). Scene transition rows
//! share truncated stick-breaking global weights with extra mass on
//! self-transitions; emissions are Gaussian with conjugate
//! normal-inverse-Wishart priors. Inference is blocked Gibbs: global
//! weights, transition rows, component weights, emission parameters, then a
//! joint forward-backward draw of the scene sequence and a component draw
//! per segment.

mod gauss;
mod niw;
mod stick;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub use gauss::{emission_loglik, Emission};
pub(crate) use gauss::CholGaussian;
pub use niw::NiwPrior;
pub use stick::{
    expected_cross_transition, expected_self_transition, sample_dirichlet, sample_gem,
    sample_sticky_transition_row,
};

/// Hyperparameters and sampler settings for [`run_gibbs`].
#[derive(Debug, Clone)]
pub struct PartitionConfig {
    /// Concentration of each transition row around the global weights.
    pub alpha: f64,
    /// Concentration of the global stick-breaking weights.
    pub gamma: f64,
    /// Extra self-transition mass; zero disables stickiness.
    pub rho: f64,
    /// Concentration of each scene's component weights.
    pub tau: f64,
    /// Scene truncation level L.
    pub max_states: usize,
    /// Per-scene component truncation level T.
    pub max_components: usize,
    /// Gibbs sweeps to run.
    pub n_iters: usize,
    /// Sweeps regarded as burn-in; must stay below `n_iters`.
    pub burn_in: usize,
    pub seed: u64,
    /// Emission prior; `None` derives an empirical prior from the features.
    pub emission_prior: Option<NiwPrior>,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            alpha: 1.0,
            gamma: 1.0,
            rho: 1.0,
            tau: 1.0,
            max_states: 10,
            max_components: 5,
            n_iters: 300,
            burn_in: 100,
            seed: 0,
            emission_prior: None,
        }
    }
}

impl PartitionConfig {
    /// Checks hyperparameter ranges.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("alpha", self.alpha), ("gamma", self.gamma), ("tau", self.tau)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Argument(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::Argument(format!(
                "rho must be non-negative and finite, got {}",
                self.rho
            )));
        }
        if self.max_states == 0 || self.max_components == 0 {
            return Err(Error::Argument(
                "max_states and max_components must be at least 1".into(),
            ));
        }
        if self.n_iters == 0 {
            return Err(Error::Argument("n_iters must be at least 1".into()));
        }
        if self.burn_in >= self.n_iters {
            return Err(Error::Argument(format!(
                "burn_in {} must be below n_iters {}",
                self.burn_in, self.n_iters
            )));
        }
        if let Some(prior) = &self.emission_prior {
            prior.validate()?;
        }
        Ok(())
    }
}

/// Final sample of the Gibbs chain plus its log-likelihood trace.
#[derive(Debug, Clone)]
pub struct PartitionResult {
    /// Scene id per segment, each in `[0, max_states)`.
    pub z: Vec<usize>,
    /// Component id per segment, each in `[0, max_components)`.
    pub s: Vec<usize>,
    /// Global stick weights, length `max_states + 1` (remainder last).
    pub beta: Vec<f64>,
    /// Scene transition matrix, rows summing to one.
    pub pi: DMatrix<f64>,
    /// Per-scene component weights, rows summing to one.
    pub psi: DMatrix<f64>,
    /// Emission parameters of each occupied (scene, component) pair.
    pub emissions: BTreeMap<(usize, usize), Emission>,
    /// Number of occupied (scene, component) pairs.
    pub kappa_count: usize,
    /// Joint log-likelihood after every sweep, burn-in included.
    pub log_likelihood_trace: Vec<f64>,
}

impl PartitionResult {
    /// Assembles a result, checking assignment ranges, emission coverage,
    /// and the occupied-pair count.
    pub fn new(
        z: Vec<usize>,
        s: Vec<usize>,
        beta: Vec<f64>,
        pi: DMatrix<f64>,
        psi: DMatrix<f64>,
        emissions: BTreeMap<(usize, usize), Emission>,
        log_likelihood_trace: Vec<f64>,
    ) -> Result<Self> {
        if z.len() != s.len() {
            return Err(Error::Argument(format!(
                "z has length {}, s has length {}",
                z.len(),
                s.len()
            )));
        }
        let n_states = pi.nrows();
        if pi.ncols() != n_states || psi.nrows() != n_states {
            return Err(Error::Argument(
                "pi must be square with one psi row per scene".into(),
            ));
        }
        if beta.len() != n_states + 1 {
            return Err(Error::Argument(format!(
                "beta must have {} entries, got {}",
                n_states + 1,
                beta.len()
            )));
        }
        let n_components = psi.ncols();
        let mut occupied: Vec<(usize, usize)> = Vec::new();
        for (&zi, &si) in z.iter().zip(&s) {
            if zi >= n_states || si >= n_components {
                return Err(Error::Argument(format!(
                    "assignment ({zi}, {si}) outside truncation {n_states}x{n_components}"
                )));
            }
            occupied.push((zi, si));
        }
        occupied.sort_unstable();
        occupied.dedup();
        for pair in &occupied {
            if !emissions.contains_key(pair) {
                return Err(Error::Argument(format!(
                    "occupied pair {pair:?} is missing emission parameters"
                )));
            }
        }
        let kappa_count = occupied.len();
        Ok(PartitionResult {
            z,
            s,
            beta,
            pi,
            psi,
            emissions,
            kappa_count,
            log_likelihood_trace,
        })
    }

    /// Number of segments.
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Serializes assignments, occupied-pair parameters, and the trace.
    pub fn to_json_string(&self) -> String {
        #[derive(Serialize)]
        struct ComponentWire {
            scene: usize,
            component: usize,
            mu: Vec<f64>,
            sigma: Vec<Vec<f64>>,
        }
        #[derive(Serialize)]
        struct ResultWire<'a> {
            z: &'a [usize],
            s: &'a [usize],
            kappa: usize,
            components: Vec<ComponentWire>,
            loglik_trace: &'a [f64],
        }
        let components = self
            .emissions
            .iter()
            .map(|(&(scene, component), emission)| ComponentWire {
                scene,
                component,
                mu: emission.mean.iter().copied().collect(),
                sigma: crate::data::matrix_to_rows(&emission.cov),
            })
            .collect();
        let wire = ResultWire {
            z: &self.z,
            s: &self.s,
            kappa: self.kappa_count,
            components,
            loglik_trace: &self.log_likelihood_trace,
        };
        let mut text = serde_json::to_string_pretty(&wire).expect("plain data serializes");
        text.push('\n');
        text
    }
}

/// Log of the sum of exponentials, stable under large negative inputs.
pub(crate) fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Draws an index proportionally to exponentiated log-weights.
/// Entries with zero probability are never returned.
pub(crate) fn sample_categorical_log<R: Rng + ?Sized>(
    log_weights: &[f64],
    rng: &mut R,
) -> Result<usize> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numeric(
            "categorical draw has no admissible outcome".into(),
        ));
    }
    let probs: Vec<f64> = log_weights.iter().map(|&w| (w - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (idx, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = idx;
            if target < acc {
                return Ok(idx);
            }
        }
    }
    Ok(last_positive)
}

/// Draws a full scene sequence jointly, conditioned on per-scene marginal
/// likelihoods: backward messages, then forward categorical draws.
pub fn forward_backward_sample_states<R: Rng + ?Sized>(
    pi: &DMatrix<f64>,
    state_logliks: &DMatrix<f64>,
    init_dist: &[f64],
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n_states = pi.nrows();
    let n = state_logliks.nrows();
    if pi.ncols() != n_states || state_logliks.ncols() != n_states || init_dist.len() != n_states {
        return Err(Error::Argument(format!(
            "inconsistent shapes: pi {}x{}, likelihoods {}x{}, init {}",
            pi.nrows(),
            pi.ncols(),
            state_logliks.nrows(),
            state_logliks.ncols(),
            init_dist.len()
        )));
    }
    if n == 0 {
        return Err(Error::Argument("need at least one segment".into()));
    }
    for j in 0..n_states {
        if (pi.row(j).sum() - 1.0).abs() > 1e-6 {
            return Err(Error::Argument(format!("pi row {j} does not sum to 1")));
        }
    }
    if state_logliks.iter().any(|v| v.is_nan()) {
        return Err(Error::Argument("state likelihoods must not be NaN".into()));
    }

    let log_pi = pi.map(f64::ln);
    let mut backward = DMatrix::zeros(n, n_states);
    for i in (0..n.saturating_sub(1)).rev() {
        for k in 0..n_states {
            backward[(i, k)] = logsumexp(
                (0..n_states)
                    .map(|l| log_pi[(k, l)] + state_logliks[(i + 1, l)] + backward[(i + 1, l)]),
            );
        }
    }

    let mut states = Vec::with_capacity(n);
    let first: Vec<f64> = (0..n_states)
        .map(|k| init_dist[k].ln() + state_logliks[(0, k)] + backward[(0, k)])
        .collect();
    states.push(sample_categorical_log(&first, rng)?);
    for i in 1..n {
        let prev = states[i - 1];
        let weights: Vec<f64> = (0..n_states)
            .map(|k| log_pi[(prev, k)] + state_logliks[(i, k)] + backward[(i, k)])
            .collect();
        states.push(sample_categorical_log(&weights, rng)?);
    }
    Ok(states)
}

/// Draws a component id for every segment given its scene assignment.
pub fn sample_component_assignments<R: Rng + ?Sized>(
    features: &DMatrix<f64>,
    z: &[usize],
    psi: &DMatrix<f64>,
    emissions: &BTreeMap<(usize, usize), Emission>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let factorized: BTreeMap<(usize, usize), CholGaussian> = emissions
        .iter()
        .map(|(&key, e)| Ok((key, CholGaussian::new(e.mean.clone(), &e.cov)?)))
        .collect::<Result<_>>()?;
    sample_components_factorized(features, z, psi, &factorized, rng)
}

fn sample_components_factorized<R: Rng + ?Sized>(
    features: &DMatrix<f64>,
    z: &[usize],
    psi: &DMatrix<f64>,
    emissions: &BTreeMap<(usize, usize), CholGaussian>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if z.len() != features.nrows() {
        return Err(Error::Argument(format!(
            "{} scene assignments for {} segments",
            z.len(),
            features.nrows()
        )));
    }
    let n_components = psi.ncols();
    let mut assignments = Vec::with_capacity(z.len());
    for (i, &scene) in z.iter().enumerate() {
        if scene >= psi.nrows() {
            return Err(Error::Argument(format!(
                "scene id {scene} outside {} states",
                psi.nrows()
            )));
        }
        let x = features.row(i).transpose();
        let mut weights = Vec::with_capacity(n_components);
        for t in 0..n_components {
            let mixture = psi[(scene, t)];
            if mixture > 0.0 {
                let gaussian = emissions.get(&(scene, t)).ok_or_else(|| {
                    Error::Argument(format!("missing emission parameters for ({scene}, {t})"))
                })?;
                weights.push(mixture.ln() + gaussian.loglik(&x));
            } else {
                weights.push(f64::NEG_INFINITY);
            }
        }
        assignments.push(sample_categorical_log(&weights, rng)?);
    }
    Ok(assignments)
}

/// Runs the blocked Gibbs sampler and returns its final sample.
pub fn run_gibbs(features: &DMatrix<f64>, config: &PartitionConfig) -> Result<PartitionResult> {
    config.validate()?;
    let n = features.nrows();
    let dim = features.ncols();
    if n == 0 || dim == 0 {
        return Err(Error::Argument(
            "features must have at least one row and one column".into(),
        ));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("features must be finite".into()));
    }
    let prior = match &config.emission_prior {
        Some(prior) => {
            if prior.dim() != dim {
                return Err(Error::Argument(format!(
                    "emission prior has dimension {}, features have {dim}",
                    prior.dim()
                )));
            }
            prior.clone()
        }
        None => NiwPrior::from_data(features)?,
    };

    let n_states = config.max_states;
    let n_components = config.max_components;
    let mut rng = rng_from_seed(config.seed);

    let mut beta = sample_gem(config.gamma, n_states, &mut rng)?;
    // Contiguous equal blocks give every state initial data to shape its
    // emission draw.
    let mut z: Vec<usize> = (0..n).map(|i| (i * n_states / n).min(n_states - 1)).collect();
    let mut s = vec![0usize; n];
    let mut pi = DMatrix::zeros(n_states, n_states);
    let mut psi = DMatrix::zeros(n_states, n_components);
    let mut gaussians: BTreeMap<(usize, usize), CholGaussian> = BTreeMap::new();
    let mut emissions: BTreeMap<(usize, usize), Emission> = BTreeMap::new();
    let mut trace = Vec::with_capacity(config.n_iters);

    for _ in 0..config.n_iters {
        let mut transition_counts = vec![vec![0usize; n_states]; n_states];
        for w in z.windows(2) {
            transition_counts[w[0]][w[1]] += 1;
        }

        let folded_prev = stick::fold_remainder(&beta);
        beta = stick::posterior_global_weights(
            &transition_counts,
            &folded_prev,
            config.alpha,
            config.gamma,
            config.rho,
            &mut rng,
        )?;
        let folded = stick::fold_remainder(&beta);

        for j in 0..n_states {
            let row = stick::sample_transition_row_posterior(
                &folded,
                j,
                config.alpha,
                config.rho,
                Some(&transition_counts[j]),
                &mut rng,
            )?;
            for (k, value) in row.into_iter().enumerate() {
                pi[(j, k)] = value;
            }
        }

        let mut component_counts = vec![vec![0usize; n_components]; n_states];
        for (&zi, &si) in z.iter().zip(&s) {
            component_counts[zi][si] += 1;
        }
        for k in 0..n_states {
            let counts = &component_counts[k];
            let mut tail = vec![0.0; n_components - 1];
            let mut acc = counts.get(n_components - 1).copied().unwrap_or(0) as f64;
            for t in (0..n_components - 1).rev() {
                tail[t] = acc;
                acc += counts[t] as f64;
            }
            let alphas: Vec<f64> = (0..n_components - 1)
                .map(|t| 1.0 + counts[t] as f64)
                .collect();
            let betas: Vec<f64> = tail.iter().map(|&t| config.tau + t).collect();
            let row = stick::sample_stick_weights(&alphas, &betas, &mut rng)?;
            for (t, value) in row.into_iter().enumerate() {
                psi[(k, t)] = value;
            }
        }

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_states * n_components];
        for (i, (&zi, &si)) in z.iter().zip(&s).enumerate() {
            members[zi * n_components + si].push(i);
        }
        gaussians.clear();
        emissions.clear();
        for k in 0..n_states {
            for t in 0..n_components {
                let indices = &members[k * n_components + t];
                let mut assigned = DMatrix::zeros(indices.len(), dim);
                for (row, &i) in indices.iter().enumerate() {
                    assigned.row_mut(row).copy_from(&features.row(i));
                }
                let (mean, cov) = prior.posterior(&assigned)?.sample(&mut rng).map_err(|e| {
                    Error::Numeric(format!("emission draw for scene {k} component {t}: {e}"))
                })?;
                gaussians.insert((k, t), CholGaussian::new(mean.clone(), &cov)?);
                emissions.insert((k, t), Emission { mean, cov });
            }
        }

        let ln_psi = psi.map(f64::ln);
        let mut state_logliks = DMatrix::zeros(n, n_states);
        for i in 0..n {
            let x = features.row(i).transpose();
            for k in 0..n_states {
                state_logliks[(i, k)] = logsumexp((0..n_components).map(|t| {
                    if psi[(k, t)] > 0.0 {
                        ln_psi[(k, t)] + gaussians[&(k, t)].loglik(&x)
                    } else {
                        f64::NEG_INFINITY
                    }
                }));
            }
        }

        z = forward_backward_sample_states(&pi, &state_logliks, &folded, &mut rng)?;
        s = sample_components_factorized(features, &z, &psi, &gaussians, &mut rng)?;

        let mut loglik = folded[z[0]].ln();
        for w in z.windows(2) {
            loglik += pi[(w[0], w[1])].ln();
        }
        for (i, (&zi, &si)) in z.iter().zip(&s).enumerate() {
            loglik += ln_psi[(zi, si)] + gaussians[&(zi, si)].loglik(&features.row(i).transpose());
        }
        trace.push(loglik);
    }

    let occupied: std::collections::BTreeSet<(usize, usize)> =
        z.iter().zip(&s).map(|(&zi, &si)| (zi, si)).collect();
    emissions.retain(|key, _| occupied.contains(key));
    PartitionResult::new(z, s, beta, pi, psi, emissions, trace)
}
