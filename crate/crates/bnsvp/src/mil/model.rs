//! Segment scorer: optional two-branch graph propagation feeding a
//! logistic head.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Bag;
use crate::error::{Error, Result};
use crate::graph::{GraphBranch, PropagationLayer};

/// Feature-similarity and temporal propagation branches whose outputs are
/// concatenated before scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Propagation {
    pub feature: PropagationLayer,
    pub temporal: PropagationLayer,
}

impl Propagation {
    /// Identity-weight branches over `dim`-dimensional features.
    pub fn identity(dim: usize, lengthscale: f64) -> Result<Self> {
        Ok(Propagation {
            feature: PropagationLayer::new(
                DMatrix::identity(dim, dim),
                GraphBranch::FeatureSimilarity { lengthscale },
            )?,
            temporal: PropagationLayer::new(DMatrix::identity(dim, dim), GraphBranch::Temporal)?,
        })
    }

    /// Width of the concatenated branch outputs.
    pub fn fused_dim(&self) -> usize {
        self.feature.weight.ncols() + self.temporal.weight.ncols()
    }
}

/// Logistic segment scorer over raw or propagated features.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerModel {
    /// Logistic weights over the (fused) feature representation.
    pub weights: DVector<f64>,
    pub bias: f64,
    pub propagation: Option<Propagation>,
}

pub(crate) fn sigmoid(logit: f64) -> f64 {
    1.0 / (1.0 + (-logit).exp())
}

impl ScorerModel {
    /// All-zero scorer for `dim`-dimensional bags; a lengthscale enables
    /// identity-weight propagation branches.
    pub fn zeroed(dim: usize, lengthscale: Option<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("feature dimension must be at least 1".into()));
        }
        let propagation = lengthscale.map(|l| Propagation::identity(dim, l)).transpose()?;
        let width = propagation.as_ref().map_or(dim, Propagation::fused_dim);
        Ok(ScorerModel {
            weights: DVector::zeros(width),
            bias: 0.0,
            propagation,
        })
    }

    /// Maps bag features to the representation the logistic head scores:
    /// the input itself, or the concatenated propagation branch outputs.
    pub fn transform(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.propagation {
            None => Ok(features.clone()),
            Some(propagation) => {
                let left = propagation.feature.apply(features)?;
                let right = propagation.temporal.apply(features)?;
                let mut fused = DMatrix::zeros(features.nrows(), left.ncols() + right.ncols());
                fused.view_mut((0, 0), left.shape()).copy_from(&left);
                fused
                    .view_mut((0, left.ncols()), right.shape())
                    .copy_from(&right);
                Ok(fused)
            }
        }
    }

    /// Per-segment sigmoid scores for a feature matrix.
    pub fn score_features(&self, features: &DMatrix<f64>) -> Result<Vec<f64>> {
        let fused = self.transform(features)?;
        if fused.ncols() != self.weights.len() {
            return Err(Error::Argument(format!(
                "model expects {} fused features, bag provides {}",
                self.weights.len(),
                fused.ncols()
            )));
        }
        Ok((0..fused.nrows())
            .map(|i| sigmoid(fused.row(i).transpose().dot(&self.weights) + self.bias))
            .collect())
    }

    /// Per-segment sigmoid scores for a bag.
    pub fn score_bag(&self, bag: &Bag) -> Result<Vec<f64>> {
        self.score_features(&bag.features)
    }

    /// Checks weight finiteness and branch/head width consistency.
    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::Validation("model has no weights".into()));
        }
        if self.weights.iter().any(|w| !w.is_finite()) || !self.bias.is_finite() {
            return Err(Error::Validation("model parameters must be finite".into()));
        }
        if let Some(propagation) = &self.propagation {
            if propagation.feature.weight.iter().any(|w| !w.is_finite())
                || propagation.temporal.weight.iter().any(|w| !w.is_finite())
            {
                return Err(Error::Validation("propagation weights must be finite".into()));
            }
            if propagation.fused_dim() != self.weights.len() {
                return Err(Error::Validation(format!(
                    "propagation produces {} features but the head expects {}",
                    propagation.fused_dim(),
                    self.weights.len()
                )));
            }
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        let wire = ModelWire {
            w: self.weights.iter().copied().collect(),
            b: self.bias,
            propagation: self.propagation.clone(),
        };
        let mut text = serde_json::to_string_pretty(&wire).expect("plain data serializes");
        text.push('\n');
        text
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let wire: ModelWire = serde_json::from_str(text)
            .map_err(|e| Error::Format(format!("model JSON: {e}")))?;
        let model = ScorerModel {
            weights: DVector::from_vec(wire.w),
            bias: wire.b,
            propagation: wire.propagation,
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelWire {
    w: Vec<f64>,
    b: f64,
    propagation: Option<Propagation>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn plain_model(weights: &[f64], bias: f64) -> ScorerModel {
        ScorerModel {
            weights: DVector::from_row_slice(weights),
            bias,
            propagation: None,
        }
    }

    #[test]
    fn zero_model_scores_one_half() {
        let model = ScorerModel::zeroed(3, None).unwrap();
        let features = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 4.0, 0.0, -1.0]);
        assert_eq!(model.score_features(&features).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn large_bias_saturates_scores() {
        let model = plain_model(&[0.0], 50.0);
        let features = DMatrix::from_row_slice(1, 1, &[0.3]);
        assert!(model.score_features(&features).unwrap()[0] > 1.0 - 1e-9);
    }

    #[test]
    fn unit_weight_matches_hand_sigmoid() {
        let model = plain_model(&[1.0], 0.0);
        let features = DMatrix::from_row_slice(1, 1, &[3.0_f64.ln()]);
        assert_abs_diff_eq!(model.score_features(&features).unwrap()[0], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let model = plain_model(&[1.0, 2.0], 0.0);
        let features = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        assert!(model.score_features(&features).is_err());
    }

    #[test]
    fn propagation_doubles_the_fused_width() {
        let model = ScorerModel::zeroed(4, Some(1.5)).unwrap();
        assert_eq!(model.weights.len(), 8);
        let features = DMatrix::from_fn(5, 4, |i, j| (i * 4 + j) as f64 * 0.1);
        let fused = model.transform(&features).unwrap();
        assert_eq!(fused.shape(), (5, 8));
        let scores = model.score_features(&features).unwrap();
        assert_eq!(scores, vec![0.5; 5]);
    }

    #[test]
    fn identity_propagation_with_identity_adjacency_preserves_features() {
        // A single segment has adjacency [[1]] in both branches, so each
        // branch reproduces the raw features.
        let model = ScorerModel::zeroed(2, Some(2.0)).unwrap();
        let features = DMatrix::from_row_slice(1, 2, &[0.7, -0.3]);
        let fused = model.transform(&features).unwrap();
        assert_abs_diff_eq!(fused[(0, 0)], 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(fused[(0, 1)], -0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(fused[(0, 2)], 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(fused[(0, 3)], -0.3, epsilon = 1e-12);
    }

    #[test]
    fn json_round_trip_without_propagation() {
        let model = plain_model(&[0.25, -1.5], 0.75);
        let text = model.to_json_string();
        assert!(text.contains("\"propagation\": null"));
        let back = ScorerModel::from_json_str(&text).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn json_round_trip_with_propagation() {
        let mut model = ScorerModel::zeroed(2, Some(1.25)).unwrap();
        model.weights[1] = 0.5;
        model.bias = -0.25;
        let back = ScorerModel::from_json_str(&model.to_json_string()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn json_rejects_inconsistent_widths() {
        let model = ScorerModel::zeroed(2, Some(1.0)).unwrap();
        let mut wire: serde_json::Value = serde_json::from_str(&model.to_json_string()).unwrap();
        wire["w"] = serde_json::json!([1.0, 2.0, 3.0]);
        assert!(ScorerModel::from_json_str(&wire.to_string()).is_err());
    }
}
