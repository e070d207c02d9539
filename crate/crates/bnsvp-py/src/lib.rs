//! Python bindings for the bnsvp pipeline.
//!
//! The module mirrors the library's main operations over plain Python data:
//! feature matrices come in as lists of per-segment rows, results go back as
//! lists, tuples, and thin wrapper classes. Long-running calls release the
//! GIL.

use pyo3::exceptions::{PyArithmeticError, PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use bnsvp::data::{matrix_to_rows, rows_to_matrix, Bag, BagLabel, Dataset};
use bnsvp::metrics::roc_auc as roc_auc_impl;
use bnsvp::mil::{train as train_impl, MilLossKind, ScorerModel, TrainConfig};
use bnsvp::partition::{run_gibbs, PartitionConfig, PartitionResult};
use bnsvp::submodular::{
    build_similarity, facility_location_value, greedy_representatives, RepresentativeSet,
};
use bnsvp::synth::{generate_planted, ScenarioConfig};
use bnsvp::Error;

/// `(scene, component, mean, covariance)` of one occupied component.
type ComponentTuple = (usize, usize, Vec<f64>, Vec<Vec<f64>>);

/// `(id, features, is_abnormal, segment_labels)` of one generated bag.
type BagTuple = (String, Vec<Vec<f64>>, bool, Option<Vec<bool>>);

/// Maps a library error onto the closest Python exception type.
fn py_err(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        Error::Argument(_) | Error::Validation(_) | Error::Format(_) => {
            PyValueError::new_err(err.to_string())
        }
        Error::Numeric(_) => PyArithmeticError::new_err(err.to_string()),
        Error::DegenerateSelection(_) => PyRuntimeError::new_err(err.to_string()),
    }
}

/// Scene and component assignments of one video, as sampled by [`partition`].
#[pyclass(frozen)]
struct Partition {
    inner: PartitionResult,
}

#[pymethods]
impl Partition {
    /// Scene id per segment.
    #[getter]
    fn z(&self) -> Vec<usize> {
        self.inner.z.clone()
    }

    /// Component id per segment, local to its scene.
    #[getter]
    fn s(&self) -> Vec<usize> {
        self.inner.s.clone()
    }

    /// Number of occupied (scene, component) pairs.
    #[getter]
    fn kappa(&self) -> usize {
        self.inner.kappa_count
    }

    /// Global stick weights, remainder mass last.
    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta.clone()
    }

    /// Joint log-likelihood after every sweep, burn-in included.
    #[getter]
    fn log_likelihood_trace(&self) -> Vec<f64> {
        self.inner.log_likelihood_trace.clone()
    }

    /// Scene transition matrix, one row per scene.
    fn pi(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.inner.pi)
    }

    /// Per-scene component weights, one row per scene.
    fn psi(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.inner.psi)
    }

    /// Emission parameters of each occupied pair, as
    /// `(scene, component, mean, covariance)` tuples in scene-major order.
    fn components(&self) -> Vec<(usize, usize, Vec<f64>, Vec<Vec<f64>>)> {
        self.inner
            .emissions
            .iter()
            .map(|(&(scene, component), emission)| {
                (
                    scene,
                    component,
                    emission.mean.iter().copied().collect(),
                    matrix_to_rows(&emission.cov),
                )
            })
            .collect()
    }

    /// Serializes the partition to the same JSON shape the CLI writes.
    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Partition(segments={}, kappa={})",
            self.inner.len(),
            self.inner.kappa_count
        )
    }
}

/// Logistic segment scorer produced by [`train`].
#[pyclass(frozen)]
struct Scorer {
    inner: ScorerModel,
}

#[pymethods]
impl Scorer {
    /// Anomaly score in `[0, 1]` for each row of `features`.
    fn score(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let matrix = rows_to_matrix(&features).map_err(py_err)?;
        self.inner.score_features(&matrix).map_err(py_err)
    }

    /// Logistic weights over the (fused) feature representation.
    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.iter().copied().collect()
    }

    #[getter]
    fn bias(&self) -> f64 {
        self.inner.bias
    }

    /// Serializes the model to the same JSON shape the CLI writes.
    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    /// Restores a model serialized by [`Scorer::to_json`].
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = ScorerModel::from_json_str(text).map_err(py_err)?;
        Ok(Scorer { inner })
    }

    fn __repr__(&self) -> String {
        format!("Scorer(width={})", self.inner.weights.len())
    }
}

/// Per-component score winners and the thresholded representative set.
#[pyclass(frozen)]
struct Representatives {
    inner: RepresentativeSet,
}

#[pymethods]
impl Representatives {
    /// Score threshold the kept winners reached.
    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    /// Kept segment indices, ascending, at most one per component.
    #[getter]
    fn indices(&self) -> Vec<usize> {
        self.inner.indices.clone()
    }

    /// Winner of every occupied component, kept or not, as
    /// `(scene, component, segment, score)` tuples in scene-major order.
    fn winners(&self) -> Vec<(usize, usize, usize, f64)> {
        self.inner
            .winners
            .iter()
            .map(|(&(scene, component), winner)| (scene, component, winner.index, winner.score))
            .collect()
    }

    /// Serializes the selection to the same JSON shape the CLI writes.
    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "Representatives(kept={}, epsilon={:.6})",
            self.inner.indices.len(),
            self.inner.epsilon
        )
    }
}

/// Runs the blocked Gibbs sampler on one video's segment features and
/// returns the final post-burn-in sample. Deterministic given `seed`.
#[pyfunction]
#[pyo3(signature = (
    features,
    *,
    alpha = 1.0,
    gamma = 1.0,
    rho = 1.0,
    tau = 1.0,
    max_states = 10,
    max_components = 5,
    n_iters = 300,
    burn_in = 100,
    seed = 0,
))]
#[allow(clippy::too_many_arguments)]
fn partition(
    py: Python<'_>,
    features: Vec<Vec<f64>>,
    alpha: f64,
    gamma: f64,
    rho: f64,
    tau: f64,
    max_states: usize,
    max_components: usize,
    n_iters: usize,
    burn_in: usize,
    seed: u64,
) -> PyResult<Partition> {
    let matrix = rows_to_matrix(&features).map_err(py_err)?;
    let config = PartitionConfig {
        alpha,
        gamma,
        rho,
        tau,
        max_states,
        max_components,
        n_iters,
        burn_in,
        seed,
        emission_prior: None,
    };
    let inner = py.detach(|| run_gibbs(&matrix, &config)).map_err(py_err)?;
    Ok(Partition { inner })
}

/// Picks the best-scoring segment of each occupied component and keeps those
/// whose score reaches the given percentile of all scores. Scores must lie
/// in `[0, 1]`, one per partitioned segment.
#[pyfunction]
#[pyo3(signature = (partition, scores, epsilon_percentile = 35.0))]
fn representatives(
    partition: &Partition,
    scores: Vec<f64>,
    epsilon_percentile: f64,
) -> PyResult<Representatives> {
    let inner = greedy_representatives(&partition.inner, &scores, epsilon_percentile)
        .map_err(py_err)?;
    Ok(Representatives { inner })
}

/// Facility-location coverage of `selected` segments under the partition's
/// block-structured similarity over `features`.
#[pyfunction]
fn facility_location(
    features: Vec<Vec<f64>>,
    partition: &Partition,
    selected: Vec<usize>,
) -> PyResult<f64> {
    let matrix = rows_to_matrix(&features).map_err(py_err)?;
    let sim = build_similarity(&matrix, &partition.inner).map_err(py_err)?;
    facility_location_value(&sim, &selected).map_err(py_err)
}

/// Trains a segment scorer on `(features, is_abnormal)` bags under a
/// multiple-instance ranking loss (`"max"`, `"topk"`, or `"bnsvp"`).
/// Returns the scorer and the per-epoch mean training loss.
#[pyfunction]
#[pyo3(signature = (
    bags,
    *,
    loss = "max",
    k = 3,
    learning_rate = 0.001,
    l2_coeff = 0.001,
    epochs = 30,
    epsilon_percentile = 35.0,
    propagation = true,
    partition_iters = 100,
    refresh_every = None,
    seed = 0,
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    bags: Vec<(Vec<Vec<f64>>, bool)>,
    loss: &str,
    k: usize,
    learning_rate: f64,
    l2_coeff: f64,
    epochs: usize,
    epsilon_percentile: f64,
    propagation: bool,
    partition_iters: usize,
    refresh_every: Option<usize>,
    seed: u64,
) -> PyResult<(Scorer, Vec<f64>)> {
    let loss_kind: MilLossKind = loss.parse().map_err(py_err)?;
    let mut built = Vec::with_capacity(bags.len());
    for (i, (rows, abnormal)) in bags.iter().enumerate() {
        let matrix = rows_to_matrix(rows).map_err(py_err)?;
        let label = if *abnormal { BagLabel::Abnormal } else { BagLabel::Normal };
        built.push(Bag::new(format!("bag_{i:03}"), matrix, label, None).map_err(py_err)?);
    }
    let dataset = Dataset::new("bindings", built).map_err(py_err)?;
    let config = TrainConfig {
        loss_kind,
        k,
        learning_rate,
        l2_coeff,
        epochs,
        partition_refresh_every: refresh_every,
        epsilon_percentile,
        partition_config: PartitionConfig {
            n_iters: partition_iters,
            burn_in: partition_iters / 3,
            ..PartitionConfig::default()
        },
        seed,
        use_propagation: propagation,
        ..TrainConfig::default()
    };
    let (model, log) = py.detach(|| train_impl(&dataset, &config)).map_err(py_err)?;
    Ok((Scorer { inner: model }, log.epoch_mean_loss))
}

/// Computes the ROC curve of scores against binary labels (`True` marks a
/// positive). Returns the trapezoidal area and the
/// `(false positive rate, true positive rate)` points.
#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<(f64, Vec<(f64, f64)>)> {
    let result = roc_auc_impl(&scores, &labels).map_err(py_err)?;
    Ok((result.auc, result.points))
}

/// Generates a synthetic benchmark dataset of normal and abnormal bags.
/// Returns `(id, features, is_abnormal, segment_labels)` tuples, where
/// `segment_labels` marks each segment of an abnormal bag.
#[pyfunction]
#[pyo3(signature = (
    *,
    n_bags_pos = 20,
    n_bags_neg = 20,
    n_segments = 32,
    dim = 8,
    n_scenes = 3,
    components_per_scene = 2,
    anomaly_modes = 1,
    anomaly_fraction = 0.25,
    mean_separation = 4.0,
    seed = 0,
))]
#[allow(clippy::too_many_arguments)]
fn generate_scenario(
    py: Python<'_>,
    n_bags_pos: usize,
    n_bags_neg: usize,
    n_segments: usize,
    dim: usize,
    n_scenes: usize,
    components_per_scene: usize,
    anomaly_modes: usize,
    anomaly_fraction: f64,
    mean_separation: f64,
    seed: u64,
) -> PyResult<Vec<(String, Vec<Vec<f64>>, bool, Option<Vec<bool>>)>> {
    let config = ScenarioConfig {
        n_bags_pos,
        n_bags_neg,
        n_segments,
        dim,
        n_scenes,
        components_per_scene,
        anomaly_modes,
        anomaly_fraction,
        mean_separation,
        seed,
    };
    let dataset = py.detach(|| generate_planted(&config)).map_err(py_err)?;
    Ok(dataset
        .bags
        .into_iter()
        .map(|bag| {
            let rows = matrix_to_rows(&bag.features);
            (bag.id, rows, bag.label.is_abnormal(), bag.segment_labels)
        })
        .collect())
}

#[pymodule]
fn bnsvp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Partition>()?;
    m.add_class::<Scorer>()?;
    m.add_class::<Representatives>()?;
    m.add_function(wrap_pyfunction!(partition, m)?)?;
    m.add_function(wrap_pyfunction!(representatives, m)?)?;
    m.add_function(wrap_pyfunction!(facility_location, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    Ok(())
}
