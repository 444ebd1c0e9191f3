//! Extreme-aware weighted squared-error loss.
//!
//! Targets are split into three bands by fixed temperature thresholds:
//! `High` (y >= t_high), `Low` (y <= t_low) and `Normal` in between.
//! Extreme bands carry inverse-frequency weights (`w_high`, `w_low`) and an
//! importance factor `a` that up-weights the dangerous error direction:
//! underpredicting a hot extreme, or overpredicting a cold one. The normal
//! band is plain squared error.
//!
//! Per-sample loss is `c * (y - y_hat)^2` where the coefficient `c` depends
//! on band and error direction:
//!
//! | band   | y > y_hat (underprediction) | y <= y_hat (overprediction) |
//! |--------|-----------------------------|------------------------------|
//! | High   | `w_high * a`                | `w_high * (1 - a)`           |
//! | Low    | `w_low * (1 - a)`           | `w_low * a`                  |
//! | Normal | `1`                         | `1`                          |
//!
//! Equality `y == y_hat` takes the overprediction column; the loss is zero
//! there either way, but the choice fixes which curvature the second
//! derivative reports at the kink.
//!
//! Everything here is pure and thread-safe; trainers consume the derivatives
//! through the [`Objective`] trait.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which band a target temperature falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    Low,
    Normal,
    High,
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Band::Low => write!(f, "low"),
            Band::Normal => write!(f, "normal"),
            Band::High => write!(f, "high"),
        }
    }
}

/// Errors from loss configuration and evaluation.
#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("invalid loss config: {0}")]
    InvalidConfig(String),
    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },
    #[error("the {0} band has no samples")]
    EmptyBand(Band),
    #[error("length mismatch: {preds} predictions vs {targets} targets")]
    LengthMismatch { preds: usize, targets: usize },
    #[error("empty input")]
    EmptyInput,
}

/// Thresholds, importance factor and band weights for the weighted loss.
///
/// `w_high` and `w_low` default to 1.0 (no reweighting). [`LossConfig::fit_weights`]
/// replaces them with the normal-to-extreme count ratios of a training set;
/// they are meant to be frozen from the training split and never recomputed
/// on test data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// High-temperature threshold in degrees C; `y >= t_high` is extreme high.
    pub t_high: f64,
    /// Low-temperature threshold in degrees C; `y <= t_low` is extreme low.
    pub t_low: f64,
    /// Extreme-case importance factor, strictly inside (0, 1).
    pub a: f64,
    /// Weight for the high band, `|U_normal| / |U_high]` once fitted.
    pub w_high: f64,
    /// Weight for the low band, `|U_normal| / |U_low|` once fitted.
    pub w_low: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            t_high: 30.0,
            t_low: 10.0,
            a: 0.9,
            w_high: 1.0,
            w_low: 1.0,
        }
    }
}

impl LossConfig {
    /// Build a config with unit band weights. Fails on inconsistent fields.
    pub fn new(t_high: f64, t_low: f64, a: f64) -> Result<Self, LossError> {
        let cfg = Self {
            t_high,
            t_low,
            a,
            w_high: 1.0,
            w_low: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same config with explicit band weights.
    pub fn with_weights(mut self, w_high: f64, w_low: f64) -> Result<Self, LossError> {
        self.w_high = w_high;
        self.w_low = w_low;
        self.validate()?;
        Ok(self)
    }

    /// Replace the band weights with the count ratios computed from
    /// `targets` (the training split).
    pub fn fit_weights(&mut self, targets: &[f64]) -> Result<(), LossError> {
        let (w_high, w_low) = compute_extreme_weights(targets, self)?;
        self.w_high = w_high;
        self.w_low = w_low;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), LossError> {
        for (name, v) in [
            ("t_high", self.t_high),
            ("t_low", self.t_low),
            ("a", self.a),
            ("w_high", self.w_high),
            ("w_low", self.w_low),
        ] {
            if !v.is_finite() {
                return Err(LossError::NonFinite {
                    what: name,
                    value: v,
                });
            }
        }
        if self.t_low >= self.t_high {
            return Err(LossError::InvalidConfig(format!(
                "t_low ({}) must be below t_high ({})",
                self.t_low, self.t_high
            )));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(LossError::InvalidConfig(format!(
                "importance factor a must lie in (0, 1), got {}",
                self.a
            )));
        }
        if self.w_high <= 0.0 || self.w_low <= 0.0 {
            return Err(LossError::InvalidConfig(format!(
                "band weights must be positive, got w_high={} w_low={}",
                self.w_high, self.w_low
            )));
        }
        Ok(())
    }

    /// Band of a target value. Infallible twin of [`classify_band`] for
    /// inputs already known to be finite.
    pub fn band_of(&self, y: f64) -> Band {
        if y >= self.t_high {
            Band::High
        } else if y <= self.t_low {
            Band::Low
        } else {
            Band::Normal
        }
    }

    /// Effective coefficient `c` of `(y - y_hat)^2` for one sample.
    fn coefficient(&self, y_hat: f64, y: f64) -> f64 {
        match self.band_of(y) {
            Band::High => {
                if y > y_hat {
                    self.w_high * self.a
                } else {
                    self.w_high * (1.0 - self.a)
                }
            }
            Band::Low => {
                if y > y_hat {
                    self.w_low * (1.0 - self.a)
                } else {
                    self.w_low * self.a
                }
            }
            Band::Normal => 1.0,
        }
    }
}

/// First and second derivative of the per-sample loss w.r.t. the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradHess {
    pub grad: f64,
    pub hess: f64,
}

/// Classify a target temperature into its band. Boundary values belong to
/// the extreme bands (`>=` / `<=`).
pub fn classify_band(y: f64, cfg: &LossConfig) -> Result<Band, LossError> {
    cfg.validate()?;
    if !y.is_finite() {
        return Err(LossError::NonFinite {
            what: "target",
            value: y,
        });
    }
    Ok(cfg.band_of(y))
}

/// Inverse-frequency band weights from training targets:
/// `w_high = |U_normal| / |U_high|`, `w_low = |U_normal| / |U_low|`.
///
/// Fails with [`LossError::EmptyBand`] if any band has no samples; callers
/// that want a w = 1 fallback must do so explicitly.
pub fn compute_extreme_weights(targets: &[f64], cfg: &LossConfig) -> Result<(f64, f64), LossError> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(LossError::EmptyInput);
    }
    let (mut n_low, mut n_normal, mut n_high) = (0usize, 0usize, 0usize);
    for &y in targets {
        if !y.is_finite() {
            return Err(LossError::NonFinite {
                what: "target",
                value: y,
            });
        }
        match cfg.band_of(y) {
            Band::Low => n_low += 1,
            Band::Normal => n_normal += 1,
            Band::High => n_high += 1,
        }
    }
    if n_high == 0 {
        return Err(LossError::EmptyBand(Band::High));
    }
    if n_low == 0 {
        return Err(LossError::EmptyBand(Band::Low));
    }
    if n_normal == 0 {
        return Err(LossError::EmptyBand(Band::Normal));
    }
    Ok((n_normal as f64 / n_high as f64, n_normal as f64 / n_low as f64))
}

fn check_pair(y_hat: f64, y: f64) -> Result<(), LossError> {
    if !y_hat.is_finite() {
        return Err(LossError::NonFinite {
            what: "prediction",
            value: y_hat,
        });
    }
    if !y.is_finite() {
        return Err(LossError::NonFinite {
            what: "target",
            value: y,
        });
    }
    Ok(())
}

/// Weighted squared error of one (prediction, target) pair.
pub fn sample_loss(y_hat: f64, y: f64, cfg: &LossConfig) -> Result<f64, LossError> {
    cfg.validate()?;
    check_pair(y_hat, y)?;
    let r = y - y_hat;
    Ok(cfg.coefficient(y_hat, y) * r * r)
}

/// Sum of [`sample_loss`] over all pairs (a raw sum, not a mean).
pub fn total_loss(preds: &[f64], targets: &[f64], cfg: &LossConfig) -> Result<f64, LossError> {
    cfg.validate()?;
    if preds.len() != targets.len() {
        return Err(LossError::LengthMismatch {
            preds: preds.len(),
            targets: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(LossError::EmptyInput);
    }
    let mut total = 0.0;
    for (&y_hat, &y) in preds.iter().zip(targets) {
        check_pair(y_hat, y)?;
        let r = y - y_hat;
        total += cfg.coefficient(y_hat, y) * r * r;
    }
    Ok(total)
}

/// Mean-normalized view of [`total_loss`], for reporting only.
pub fn mean_loss(preds: &[f64], targets: &[f64], cfg: &LossConfig) -> Result<f64, LossError> {
    Ok(total_loss(preds, targets, cfg)? / preds.len() as f64)
}

/// Exact first and second derivatives of [`sample_loss`] w.r.t. `y_hat`.
///
/// With `c` the sample's branch coefficient: `grad = 2c(y_hat - y)`,
/// `hess = 2c`. At `y_hat == y` the overprediction-branch coefficient
/// applies.
pub fn sample_grad_hess(y_hat: f64, y: f64, cfg: &LossConfig) -> Result<GradHess, LossError> {
    cfg.validate()?;
    check_pair(y_hat, y)?;
    let c = cfg.coefficient(y_hat, y);
    Ok(GradHess {
        grad: 2.0 * c * (y_hat - y),
        hess: 2.0 * c,
    })
}

/// A per-sample training objective: loss plus its first two derivatives
/// w.r.t. the prediction.
///
/// Implementations must be pure. The hot-path methods skip per-call input
/// validation; trainers check batch results for finiteness and abort with a
/// typed error instead of propagating NaN.
pub trait Objective: Send + Sync {
    fn loss(&self, y_hat: f64, y: f64) -> f64;
    fn grad_hess(&self, y_hat: f64, y: f64) -> GradHess;
    fn name(&self) -> &'static str;
}

/// Plain squared error `(y - y_hat)^2`, the baseline objective.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredError;

impl Objective for SquaredError {
    fn loss(&self, y_hat: f64, y: f64) -> f64 {
        let r = y - y_hat;
        r * r
    }

    fn grad_hess(&self, y_hat: f64, y: f64) -> GradHess {
        GradHess {
            grad: 2.0 * (y_hat - y),
            hess: 2.0,
        }
    }

    fn name(&self) -> &'static str {
        "squared_error"
    }
}

/// The band-weighted asymmetric loss with a validated config.
#[derive(Debug, Clone)]
pub struct ImprovedLoss {
    cfg: LossConfig,
}

impl ImprovedLoss {
    pub fn new(cfg: LossConfig) -> Result<Self, LossError> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &LossConfig {
        &self.cfg
    }
}

impl Objective for ImprovedLoss {
    fn loss(&self, y_hat: f64, y: f64) -> f64 {
        let r = y - y_hat;
        self.cfg.coefficient(y_hat, y) * r * r
    }

    fn grad_hess(&self, y_hat: f64, y: f64) -> GradHess {
        let c = self.cfg.coefficient(y_hat, y);
        GradHess {
            grad: 2.0 * c * (y_hat - y),
            hess: 2.0 * c,
        }
    }

    fn name(&self) -> &'static str {
        "improved"
    }
}
