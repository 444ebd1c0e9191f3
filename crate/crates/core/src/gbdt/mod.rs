//! Gradient-boosted regression trees with a pluggable second-order
//! objective.
//!
//! A minimal histogram GBDT: each round fits one depth-limited tree to the
//! current per-sample gradients and hessians, splitting greedily on the
//! standard second-order gain
//!
//! ```text
//! gain = G_L^2/(H_L + lambda) + G_R^2/(H_R + lambda) - G^2/(H + lambda)
//! ```
//!
//! with Newton leaf values `-G/(H + lambda)`. Feature thresholds come from
//! equal-frequency histogram bins computed once on the training features.
//! Training is fully deterministic: ties in gain resolve to the lowest
//! feature index, then the lowest threshold.

mod train;

pub use train::{train, GbdtTraining};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loss::LossConfig;
use crate::model_file::{self, ModelFileError};

pub const MODEL_KIND: &str = "gbdt";

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("empty training dataset")]
    EmptyDataset,
    #[error("degenerate objective: all hessians are zero")]
    DegenerateObjective,
    #[error("feature dimension mismatch: model expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite gradient or hessian at sample {sample} in round {round}")]
    NonFiniteGradient { sample: usize, round: usize },
    #[error("training loss increased in round {round}: {previous} -> {current}")]
    LossNotMonotone {
        round: usize,
        previous: f64,
        current: f64,
    },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    ModelFile(#[from] ModelFileError),
}

/// Boosting hyperparameters. The learning rate and round count follow the
/// reference experiment; the tree-shape knobs are conventional defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub lambda_l2: f64,
    pub max_bins: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.05,
            max_depth: 6,
            min_samples_leaf: 20,
            lambda_l2: 1.0,
            max_bins: 256,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<(), GbdtError> {
        if self.n_rounds == 0 || self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(GbdtError::InvalidParams(
                "counts must be at least 1".to_string(),
            ));
        }
        if self.max_bins < 2 {
            return Err(GbdtError::InvalidParams("max_bins must be at least 2".to_string()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(GbdtError::InvalidParams(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.lambda_l2 >= 0.0 && self.lambda_l2.is_finite()) {
            return Err(GbdtError::InvalidParams(format!(
                "lambda_l2 must be non-negative, got {}",
                self.lambda_l2
            )));
        }
        Ok(())
    }
}

/// One tree node. The root sits at index 0; children reference node slots
/// in the same vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { value }],
        }
    }

    /// Raw (unscaled) leaf value for a feature vector.
    pub fn value(&self, features: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

/// A trained ensemble. Prediction is `base_score` plus the learning-rate
/// scaled sum of raw leaf values; it is pure and deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
    /// Objective tag the model was trained with.
    pub objective: String,
    /// Loss configuration in effect during training (band thresholds,
    /// importance factor and the frozen band weights).
    pub loss_config: LossConfig,
    pub params: GbdtParams,
}

impl GbdtModel {
    pub fn predict(&self, features: &[f64]) -> Result<f64, GbdtError> {
        if features.len() != self.n_features {
            return Err(GbdtError::DimensionMismatch {
                expected: self.n_features,
                found: features.len(),
            });
        }
        let mut score = self.base_score;
        for tree in &self.trees {
            score += self.learning_rate * tree.value(features);
        }
        Ok(score)
    }

    pub fn predict_batch(&self, samples: &[crate::pipeline::WindowSample]) -> Result<Vec<f64>, GbdtError> {
        samples.iter().map(|s| self.predict(&s.features)).collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, GbdtError> {
        Ok(model_file::to_bytes(MODEL_KIND, self)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GbdtError> {
        Ok(model_file::from_bytes(MODEL_KIND, bytes)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), GbdtError> {
        Ok(model_file::save(path, MODEL_KIND, self)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, GbdtError> {
        Ok(model_file::load(path, MODEL_KIND)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stub_model(trees: Vec<Tree>) -> GbdtModel {
        GbdtModel {
            base_score: 21.5,
            learning_rate: 0.05,
            n_features: 3,
            trees,
            objective: "squared_error".to_string(),
            loss_config: LossConfig::default(),
            params: GbdtParams::default(),
        }
    }

    #[test]
    fn empty_ensemble_predicts_base_score() {
        let model = stub_model(Vec::new());
        assert_eq!(model.predict(&[0.0, 0.0, 0.0]).unwrap(), 21.5);
    }

    #[test]
    fn single_leaf_adds_scaled_value() {
        let model = stub_model(vec![Tree::leaf(2.0)]);
        let got = model.predict(&[1.0, 2.0, 3.0]).unwrap();
        assert!((got - (21.5 + 0.05 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn split_routes_on_threshold_inclusively() {
        let tree = Tree {
            nodes: vec![
                TreeNode::Split {
                    feature: 1,
                    threshold: 5.0,
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf { value: -1.0 },
                TreeNode::Leaf { value: 1.0 },
            ],
        };
        assert_eq!(tree.value(&[0.0, 5.0, 0.0]), -1.0);
        assert_eq!(tree.value(&[0.0, 5.0 + 1e-12, 0.0]), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let model = stub_model(Vec::new());
        assert!(matches!(
            model.predict(&[1.0]),
            Err(GbdtError::DimensionMismatch {
                expected: 3,
                found: 1
            })
        ));
    }

    #[test]
    fn bytes_round_trip_is_lossless() {
        let model = stub_model(vec![
            Tree {
                nodes: vec![
                    TreeNode::Split {
                        feature: 0,
                        threshold: 0.1 + 0.2,
                        left: 1,
                        right: 2,
                    },
                    TreeNode::Leaf { value: 1.0 / 3.0 },
                    TreeNode::Leaf { value: -7.25e-13 },
                ],
            },
            Tree::leaf(0.0),
        ]);
        let bytes = model.to_bytes().unwrap();
        let back = GbdtModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, model);
        // And the re-serialization is byte-identical.
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let bytes = crate::model_file::to_bytes("mlp", &42u32).unwrap();
        assert!(GbdtModel::from_bytes(&bytes).is_err());
    }

    #[test]
    fn params_validation() {
        let p = GbdtParams {
            learning_rate: 0.0,
            ..GbdtParams::default()
        };
        assert!(p.validate().is_err());
        let p = GbdtParams {
            n_rounds: 0,
            ..GbdtParams::default()
        };
        assert!(p.validate().is_err());
        assert!(GbdtParams::default().validate().is_ok());
    }
}
