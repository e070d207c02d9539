//! Graph smoothing of segment features.
//!
//! Two single-layer graph convolutions run side by side: one over a feature
//! similarity graph, one over a temporal proximity graph. Each builds an
//! adjacency over the segments of a bag, renormalizes it, and mixes segment
//! features through a learned linear map.

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{matrix_to_rows, rows_to_matrix};
use crate::error::{Error, Result};

/// Symmetry slack accepted when validating adjacency matrices.
const SYMMETRY_TOL: f64 = 1e-9;

/// Which graph a propagation layer builds over a bag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphBranch {
    /// Gaussian similarity of segment features with the given lengthscale.
    FeatureSimilarity { lengthscale: f64 },
    /// Similarity decaying exponentially with temporal distance.
    Temporal,
}

/// One graph convolution: adjacency construction plus a linear feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationLayer {
    pub weight: DMatrix<f64>,
    pub branch: GraphBranch,
}

impl PropagationLayer {
    /// Builds a layer, validating the lengthscale and weight shape.
    pub fn new(weight: DMatrix<f64>, branch: GraphBranch) -> Result<Self> {
        if weight.nrows() == 0 || weight.ncols() == 0 {
            return Err(Error::Argument("propagation weight must be non-empty".into()));
        }
        if let GraphBranch::FeatureSimilarity { lengthscale } = branch {
            if !(lengthscale > 0.0) || !lengthscale.is_finite() {
                return Err(Error::Argument(format!(
                    "lengthscale must be positive and finite, got {lengthscale}"
                )));
            }
        }
        Ok(PropagationLayer { weight, branch })
    }

    /// Adjacency over the given bag's segments for this layer's branch.
    pub fn adjacency(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self.branch {
            GraphBranch::FeatureSimilarity { lengthscale } => rbf_adjacency(features, lengthscale),
            GraphBranch::Temporal => temporal_adjacency(features.nrows()),
        }
    }

    /// Runs the full layer: adjacency, renormalization, then `A X W`.
    pub fn apply(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let a_hat = renormalized_laplacian(&self.adjacency(features)?)?;
        propagate(&a_hat, features, &self.weight)
    }
}

#[derive(Serialize, Deserialize)]
struct LayerWire {
    branch: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    lengthscale: Option<f64>,
    weight: Vec<Vec<f64>>,
}

impl Serialize for PropagationLayer {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let (branch, lengthscale) = match self.branch {
            GraphBranch::FeatureSimilarity { lengthscale } => {
                ("feature_similarity", Some(lengthscale))
            }
            GraphBranch::Temporal => ("temporal", None),
        };
        LayerWire {
            branch: branch.to_string(),
            lengthscale,
            weight: matrix_to_rows(&self.weight),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PropagationLayer {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = LayerWire::deserialize(deserializer)?;
        let branch = match (wire.branch.as_str(), wire.lengthscale) {
            ("feature_similarity", Some(lengthscale)) => {
                GraphBranch::FeatureSimilarity { lengthscale }
            }
            ("feature_similarity", None) => {
                return Err(D::Error::custom("feature_similarity branch needs a lengthscale"))
            }
            ("temporal", _) => GraphBranch::Temporal,
            (other, _) => return Err(D::Error::custom(format!("unknown branch '{other}'"))),
        };
        let weight = rows_to_matrix(&wire.weight).map_err(D::Error::custom)?;
        PropagationLayer::new(weight, branch).map_err(D::Error::custom)
    }
}

/// Gaussian similarity adjacency: `exp(-|x_i - x_j|^2 / (2 l^2))`.
pub fn rbf_adjacency(features: &DMatrix<f64>, lengthscale: f64) -> Result<DMatrix<f64>> {
    if !(lengthscale > 0.0) || !lengthscale.is_finite() {
        return Err(Error::Argument(format!(
            "lengthscale must be positive and finite, got {lengthscale}"
        )));
    }
    if features.nrows() == 0 {
        return Err(Error::Argument("adjacency needs at least one segment".into()));
    }
    let n = features.nrows();
    let denom = 2.0 * lengthscale * lengthscale;
    let mut adj = DMatrix::zeros(n, n);
    for i in 0..n {
        adj[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let diff = features.row(i) - features.row(j);
            let value = (-diff.norm_squared() / denom).exp();
            adj[(i, j)] = value;
            adj[(j, i)] = value;
        }
    }
    Ok(adj)
}

/// Temporal proximity adjacency: `exp(-|i - j|)` over segment positions.
pub fn temporal_adjacency(n_segments: usize) -> Result<DMatrix<f64>> {
    if n_segments == 0 {
        return Err(Error::Argument("adjacency needs at least one segment".into()));
    }
    Ok(DMatrix::from_fn(n_segments, n_segments, |i, j| {
        (-(i.abs_diff(j) as f64)).exp()
    }))
}

/// Renormalized adjacency `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree
/// matrix of `A + I`.
pub fn renormalized_laplacian(adjacency: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = adjacency.nrows();
    if n == 0 || adjacency.ncols() != n {
        return Err(Error::Argument(format!(
            "adjacency must be square and non-empty, got {}x{}",
            adjacency.nrows(),
            adjacency.ncols()
        )));
    }
    for i in 0..n {
        for j in 0..n {
            let value = adjacency[(i, j)];
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Argument(format!(
                    "adjacency entry ({i}, {j}) = {value} must be finite and non-negative"
                )));
            }
            if (value - adjacency[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(Error::Argument(format!(
                    "adjacency must be symmetric; entries ({i}, {j}) and ({j}, {i}) differ"
                )));
            }
        }
    }
    let with_loops = adjacency + DMatrix::identity(n, n);
    let inv_sqrt_degrees: Vec<f64> = (0..n)
        .map(|i| with_loops.row(i).sum().sqrt().recip())
        .collect();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        inv_sqrt_degrees[i] * with_loops[(i, j)] * inv_sqrt_degrees[j]
    }))
}

/// One propagation step: `A X W`.
pub fn propagate(
    a_hat: &DMatrix<f64>,
    features: &DMatrix<f64>,
    weight: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if a_hat.ncols() != features.nrows() {
        return Err(Error::Argument(format!(
            "adjacency is {}x{} but features have {} rows",
            a_hat.nrows(),
            a_hat.ncols(),
            features.nrows()
        )));
    }
    if features.ncols() != weight.nrows() {
        return Err(Error::Argument(format!(
            "features have {} columns but weight has {} rows",
            features.ncols(),
            weight.nrows()
        )));
    }
    Ok(a_hat * features * weight)
}

/// Euclidean distances between all segment pairs (i < j), in index order.
pub fn pairwise_distances(features: &DMatrix<f64>) -> Vec<f64> {
    let n = features.nrows();
    let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((features.row(i) - features.row(j)).norm());
        }
    }
    out
}

/// Median of a set of distances; the usual heuristic for a default
/// lengthscale. Falls back to 1.0 when no positive distance exists.
pub fn median_distance(distances: &[f64]) -> f64 {
    let mut positive: Vec<f64> = distances.iter().copied().filter(|&d| d > 0.0).collect();
    if positive.is_empty() {
        return 1.0;
    }
    positive.sort_by(|a, b| a.total_cmp(b));
    let mid = positive.len() / 2;
    if positive.len() % 2 == 1 {
        positive[mid]
    } else {
        0.5 * (positive[mid - 1] + positive[mid])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn renormalizes_two_node_path() {
        let adj = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let a_hat = renormalized_laplacian(&adj).unwrap();
        for value in a_hat.iter() {
            assert_abs_diff_eq!(*value, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_propagation_preserves_features() {
        let features = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let a_hat = DMatrix::identity(2, 2);
        let weight = DMatrix::identity(2, 2);
        let out = propagate(&a_hat, &features, &weight).unwrap();
        assert_eq!(out, features);
    }

    #[test]
    fn rbf_adjacency_matches_hand_values() {
        let features = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let adj = rbf_adjacency(&features, 1.0).unwrap();
        assert_abs_diff_eq!(adj[(0, 0)], 1.0);
        assert_abs_diff_eq!(adj[(0, 1)], (-2.0f64).exp(), epsilon = 1e-15);
        assert_eq!(adj[(0, 1)], adj[(1, 0)]);
    }

    #[test]
    fn temporal_adjacency_decays_with_distance() {
        let adj = temporal_adjacency(3).unwrap();
        assert_abs_diff_eq!(adj[(0, 0)], 1.0);
        assert_abs_diff_eq!(adj[(0, 1)], (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(adj[(0, 2)], (-2.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_adjacency() {
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(renormalized_laplacian(&asym).is_err());
        let negative = DMatrix::from_row_slice(1, 1, &[-0.1]);
        assert!(renormalized_laplacian(&negative).is_err());
        assert!(rbf_adjacency(&DMatrix::zeros(1, 1), 0.0).is_err());
    }

    #[test]
    fn propagate_rejects_shape_mismatch() {
        let a_hat = DMatrix::identity(2, 2);
        let features = DMatrix::zeros(3, 2);
        let weight = DMatrix::identity(2, 2);
        assert!(propagate(&a_hat, &features, &weight).is_err());
        let features = DMatrix::zeros(2, 3);
        assert!(propagate(&a_hat, &features, &weight).is_err());
    }

    #[test]
    fn median_of_point_set() {
        let features = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]);
        let distances = pairwise_distances(&features);
        assert_eq!(distances.len(), 3);
        assert_abs_diff_eq!(median_distance(&distances), 2.0);
        assert_abs_diff_eq!(median_distance(&[]), 1.0);
        assert_abs_diff_eq!(median_distance(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn layer_round_trips_through_json() {
        let layer = PropagationLayer::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.25, 1.0]),
            GraphBranch::FeatureSimilarity { lengthscale: 1.5 },
        )
        .unwrap();
        let json = serde_json::to_string(&layer).unwrap();
        let back: PropagationLayer = serde_json::from_str(&json).unwrap();
        assert_eq!(back, layer);

        let temporal =
            PropagationLayer::new(DMatrix::identity(2, 2), GraphBranch::Temporal).unwrap();
        let json = serde_json::to_string(&temporal).unwrap();
        assert!(!json.contains("lengthscale"));
        let back: PropagationLayer = serde_json::from_str(&json).unwrap();
        assert_eq!(back, temporal);
    }

    proptest! {
        #[test]
        fn renormalized_matrix_is_symmetric_positive(
            n in 1usize..6,
            seed in any::<u64>(),
        ) {
            use rand::Rng as _;
            let mut rng = crate::rng::rng_from_seed(seed);
            let mut adj = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.random_range(0.0..1.0);
                    adj[(i, j)] = v;
                    adj[(j, i)] = v;
                }
            }
            let a_hat = renormalized_laplacian(&adj).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert!(a_hat[(i, j)] > 0.0);
                    prop_assert!((a_hat[(i, j)] - a_hat[(j, i)]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn rbf_entries_bounded(n in 2usize..6, seed in any::<u64>()) {
            use rand::Rng as _;
            let mut rng = crate::rng::rng_from_seed(seed);
            let features = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-5.0..5.0));
            let adj = rbf_adjacency(&features, 2.0).unwrap();
            for i in 0..n {
                prop_assert_eq!(adj[(i, i)], 1.0);
                for j in 0..n {
                    prop_assert!(adj[(i, j)] > 0.0 && adj[(i, j)] <= 1.0);
                }
            }
        }
    }
}
