//! Band-aware evaluation.
//!
//! Samples are banded by their TRUE temperature; the same thresholds band
//! the predictions. From those two labelings come per-band MAE, signed mean
//! bias, extreme recall (high side, low side, and pooled) and the
//! distribution of prediction-minus-truth differences per band.
//!
//! Sign convention: bias and differences are `prediction - truth`, so a
//! negative bias on the high band means the model underpredicts heat. An
//! empty band makes its metrics absent, never zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loss::{Band, LossConfig};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {preds} predictions vs {targets} targets")]
    LengthMismatch { preds: usize, targets: usize },
    #[error("no samples to evaluate")]
    EmptyInput,
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
    #[error("invalid loss config: {0}")]
    BadConfig(String),
}

/// One confusion view: extreme-vs-normal counts for a chosen positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionView {
    pub true_pos: usize,
    pub true_neg: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl ConfusionView {
    pub fn total(&self) -> usize {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }

    pub fn recall(&self) -> Option<f64> {
        let denom = self.true_pos + self.false_neg;
        (denom > 0).then(|| self.true_pos as f64 / denom as f64)
    }
}

/// Confusion counts for the high side, the low side, and both pooled.
///
/// In the pooled view a true extreme counts as recalled only when the
/// predicted band equals the true extreme band; a hot truth predicted cold
/// is still a miss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub high: ConfusionView,
    pub low: ConfusionView,
    pub combined: ConfusionView,
}

/// (median, mean, std) of `prediction - truth` within one band. Median and
/// mean need one sample; std needs two (n-1 denominator).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DiffStats {
    pub median: Option<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BandDiffStats {
    pub high: DiffStats,
    pub low: DiffStats,
    pub normal: DiffStats,
}

/// Full evaluation of one prediction set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    /// (n_low, n_normal, n_high) by true band.
    pub band_counts: (usize, usize, usize),
    pub mae_high: Option<f64>,
    pub mae_low: Option<f64>,
    pub mae_normal: Option<f64>,
    /// Pooled MAE over both extreme bands.
    pub mae_extreme: Option<f64>,
    pub bias_high: Option<f64>,
    pub bias_low: Option<f64>,
    pub recall_combined: Option<f64>,
    pub recall_high: Option<f64>,
    pub recall_low: Option<f64>,
    pub diff_stats: BandDiffStats,
    pub confusion: ConfusionCounts,
    /// Convention marker for the signed metrics.
    pub bias_convention: String,
}

fn finite_mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

fn diff_stats_of(mut diffs: Vec<f64>) -> DiffStats {
    DiffStats {
        mean: finite_mean(&diffs),
        std: sample_std(&diffs),
        median: median(&mut diffs),
    }
}

fn check_inputs(preds: &[f64], targets: &[f64], cfg: &LossConfig) -> Result<(), MetricsError> {
    cfg.validate()
        .map_err(|e| MetricsError::BadConfig(e.to_string()))?;
    if preds.len() != targets.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            targets: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if preds.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite {
            what: "predictions",
        });
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite { what: "targets" });
    }
    Ok(())
}

/// Per-band (median, mean, std) of `prediction - truth`.
pub fn diff_distribution(
    preds: &[f64],
    targets: &[f64],
    cfg: &LossConfig,
) -> Result<BandDiffStats, MetricsError> {
    check_inputs(preds, targets, cfg)?;
    let mut per_band: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (&p, &t) in preds.iter().zip(targets) {
        let idx = match cfg.band_of(t) {
            Band::Low => 0,
            Band::Normal => 1,
            Band::High => 2,
        };
        per_band[idx].push(p - t);
    }
    let [low, normal, high] = per_band;
    Ok(BandDiffStats {
        high: diff_stats_of(high),
        low: diff_stats_of(low),
        normal: diff_stats_of(normal),
    })
}

/// Evaluate predictions against targets under `cfg`'s thresholds.
pub fn evaluate(
    preds: &[f64],
    targets: &[f64],
    cfg: &LossConfig,
) -> Result<EvalReport, MetricsError> {
    check_inputs(preds, targets, cfg)?;

    let mut abs_err: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut diffs: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut confusion = ConfusionCounts::default();

    for (&p, &t) in preds.iter().zip(targets) {
        let true_band = cfg.band_of(t);
        let pred_band = cfg.band_of(p);
        let idx = match true_band {
            Band::Low => 0,
            Band::Normal => 1,
            Band::High => 2,
        };
        abs_err[idx].push((t - p).abs());
        diffs[idx].push(p - t);

        // High side: positive class is "extreme high".
        match (true_band == Band::High, pred_band == Band::High) {
            (true, true) => confusion.high.true_pos += 1,
            (true, false) => confusion.high.false_neg += 1,
            (false, true) => confusion.high.false_pos += 1,
            (false, false) => confusion.high.true_neg += 1,
        }
        // Low side mirrors it.
        match (true_band == Band::Low, pred_band == Band::Low) {
            (true, true) => confusion.low.true_pos += 1,
            (true, false) => confusion.low.false_neg += 1,
            (false, true) => confusion.low.false_pos += 1,
            (false, false) => confusion.low.true_neg += 1,
        }
        // Pooled: recalled only when the sides agree.
        match (true_band, pred_band) {
            (Band::High, Band::High) | (Band::Low, Band::Low) => {
                confusion.combined.true_pos += 1
            }
            (Band::High, _) | (Band::Low, _) => confusion.combined.false_neg += 1,
            (Band::Normal, Band::Normal) => confusion.combined.true_neg += 1,
            (Band::Normal, _) => confusion.combined.false_pos += 1,
        }
    }

    let [err_low, err_normal, err_high] = abs_err;
    let [diff_low, diff_normal, diff_high] = diffs;
    let band_counts = (err_low.len(), err_normal.len(), err_high.len());

    let extreme_errs: Vec<f64> = err_low.iter().chain(err_high.iter()).copied().collect();

    Ok(EvalReport {
        n_samples: preds.len(),
        band_counts,
        mae_high: finite_mean(&err_high),
        mae_low: finite_mean(&err_low),
        mae_normal: finite_mean(&err_normal),
        mae_extreme: finite_mean(&extreme_errs),
        bias_high: finite_mean(&diff_high),
        bias_low: finite_mean(&diff_low),
        recall_combined: confusion.combined.recall(),
        recall_high: confusion.high.recall(),
        recall_low: confusion.low.recall(),
        diff_stats: BandDiffStats {
            high: diff_stats_of(diff_high),
            low: diff_stats_of(diff_low),
            normal: diff_stats_of(diff_normal),
        },
        confusion,
        bias_convention: "prediction_minus_truth".to_string(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvalReport {
    /// Column names matching [`EvalReport::csv_row`], for sweep aggregation.
    pub fn csv_header() -> String {
        [
            "n_samples",
            "n_low",
            "n_normal",
            "n_high",
            "recall_combined",
            "recall_high",
            "recall_low",
            "mae_high",
            "mae_low",
            "mae_normal",
            "mae_extreme",
            "bias_high",
            "bias_low",
            "diff_high_median",
            "diff_high_mean",
            "diff_high_std",
            "diff_low_median",
            "diff_low_mean",
            "diff_low_std",
            "diff_normal_median",
            "diff_normal_mean",
            "diff_normal_std",
            "tp_combined",
            "fn_combined",
            "fp_combined",
            "tn_combined",
        ]
        .join(",")
    }

    /// One flat CSV row; absent metrics serialize as empty cells.
    pub fn csv_row(&self) -> String {
        let c = &self.confusion.combined;
        [
            self.n_samples.to_string(),
            self.band_counts.0.to_string(),
            self.band_counts.1.to_string(),
            self.band_counts.2.to_string(),
            fmt_opt(self.recall_combined),
            fmt_opt(self.recall_high),
            fmt_opt(self.recall_low),
            fmt_opt(self.mae_high),
            fmt_opt(self.mae_low),
            fmt_opt(self.mae_normal),
            fmt_opt(self.mae_extreme),
            fmt_opt(self.bias_high),
            fmt_opt(self.bias_low),
            fmt_opt(self.diff_stats.high.median),
            fmt_opt(self.diff_stats.high.mean),
            fmt_opt(self.diff_stats.high.std),
            fmt_opt(self.diff_stats.low.median),
            fmt_opt(self.diff_stats.low.mean),
            fmt_opt(self.diff_stats.low.std),
            fmt_opt(self.diff_stats.normal.median),
            fmt_opt(self.diff_stats.normal.mean),
            fmt_opt(self.diff_stats.normal.std),
            c.true_pos.to_string(),
            c.false_neg.to_string(),
            c.false_pos.to_string(),
            c.true_neg.to_string(),
        ]
        .join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> LossConfig {
        LossConfig::default()
    }

    #[test]
    fn perfect_predictions() {
        let targets = vec![35.0, 20.0, 5.0, 31.0];
        let report = evaluate(&targets, &targets, &cfg()).unwrap();
        assert_eq!(report.mae_high, Some(0.0));
        assert_eq!(report.mae_low, Some(0.0));
        assert_eq!(report.mae_normal, Some(0.0));
        assert_eq!(report.bias_high, Some(0.0));
        assert_eq!(report.recall_combined, Some(1.0));
        assert_eq!(report.confusion.combined.false_pos, 0);
        assert_eq!(report.confusion.combined.false_neg, 0);
    }

    #[test]
    fn missed_high_extreme_is_a_false_negative() {
        // One true-high sample predicted normal.
        let report = evaluate(&[25.0], &[35.0], &cfg()).unwrap();
        assert_eq!(report.confusion.high.false_neg, 1);
        assert_eq!(report.recall_high, Some(0.0));
        assert_eq!(report.bias_high, Some(-10.0));
        // No low-band samples: absent, not zero.
        assert_eq!(report.recall_low, None);
        assert_eq!(report.mae_low, None);
    }

    #[test]
    fn three_sample_hand_evaluation() {
        let targets = [35.0, 20.0, 5.0];
        let preds = [31.0, 22.0, 9.0];
        let report = evaluate(&preds, &targets, &cfg()).unwrap();
        assert_eq!(report.recall_combined, Some(1.0));
        assert_eq!(report.mae_high, Some(4.0));
        assert_eq!(report.mae_normal, Some(2.0));
        assert_eq!(report.mae_low, Some(4.0));
        assert_eq!(report.bias_high, Some(-4.0));
        assert_eq!(report.bias_low, Some(4.0));
    }

    #[test]
    fn cross_side_confusion_is_a_miss() {
        // True high predicted low: FN on the high side, FN pooled, and a
        // low-side false positive.
        let report = evaluate(&[5.0], &[35.0], &cfg()).unwrap();
        assert_eq!(report.confusion.high.false_neg, 1);
        assert_eq!(report.confusion.combined.false_neg, 1);
        assert_eq!(report.confusion.combined.true_pos, 0);
        assert_eq!(report.confusion.low.false_pos, 1);
    }

    #[test]
    fn confusion_views_partition_all_samples() {
        let targets = [35.0, 32.0, 20.0, 15.0, 8.0, 5.0, 25.0];
        let preds = [31.0, 25.0, 22.0, 31.0, 9.0, 15.0, 5.0];
        let report = evaluate(&preds, &targets, &cfg()).unwrap();
        for view in [
            report.confusion.high,
            report.confusion.low,
            report.confusion.combined,
        ] {
            assert_eq!(view.total(), targets.len());
        }
        // Integer identity: recall * (TP + FN) = TP.
        let c = report.confusion.combined;
        let r = report.recall_combined.unwrap();
        assert_eq!((r * (c.true_pos + c.false_neg) as f64).round() as usize, c.true_pos);
    }

    #[test]
    fn diff_distribution_symmetric_set() {
        // Differences {-1, 0, 1} in the normal band.
        let targets = [20.0, 21.0, 22.0];
        let preds = [19.0, 21.0, 23.0];
        let stats = diff_distribution(&preds, &targets, &cfg()).unwrap();
        assert_eq!(stats.normal.median, Some(0.0));
        assert_eq!(stats.normal.mean, Some(0.0));
        assert_eq!(stats.normal.std, Some(1.0));
        assert_eq!(stats.high.median, None);
    }

    #[test]
    fn single_sample_band_has_no_std() {
        let stats = diff_distribution(&[33.0], &[35.0], &cfg()).unwrap();
        assert_eq!(stats.high.median, Some(-2.0));
        assert_eq!(stats.high.mean, Some(-2.0));
        assert_eq!(stats.high.std, None);
    }

    #[test]
    fn even_count_median_is_midpoint() {
        let targets = [35.0, 36.0];
        let preds = [34.0, 39.0];
        let stats = diff_distribution(&preds, &targets, &cfg()).unwrap();
        assert_eq!(stats.high.median, Some(1.0));
    }

    #[test]
    fn permutation_changes_nothing() {
        let targets = [35.0, 20.0, 5.0, 31.0, 18.0];
        let preds = [31.0, 22.0, 9.0, 28.0, 12.0];
        let a = evaluate(&preds, &targets, &cfg()).unwrap();
        let perm = [4, 2, 0, 3, 1];
        let tp: Vec<f64> = perm.iter().map(|&i| targets[i]).collect();
        let pp: Vec<f64> = perm.iter().map(|&i| preds[i]).collect();
        let b = evaluate(&pp, &tp, &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_shift_moves_bias_exactly() {
        let targets = [35.0, 20.0, 5.0, 32.0];
        let preds = [33.0, 21.0, 6.0, 30.0];
        let base = evaluate(&preds, &targets, &cfg()).unwrap();
        let c = 0.25;
        let shifted: Vec<f64> = preds.iter().map(|p| p + c).collect();
        let moved = evaluate(&shifted, &targets, &cfg()).unwrap();
        assert!((moved.bias_high.unwrap() - base.bias_high.unwrap() - c).abs() < 1e-12);
        assert!((moved.bias_low.unwrap() - base.bias_low.unwrap() - c).abs() < 1e-12);
        assert_eq!(moved.band_counts, base.band_counts);
    }

    #[test]
    fn concatenation_sums_confusion_counts() {
        let t1 = [35.0, 20.0];
        let p1 = [31.0, 25.0];
        let t2 = [5.0, 8.0, 22.0];
        let p2 = [12.0, 7.0, 21.0];
        let a = evaluate(&p1, &t1, &cfg()).unwrap().confusion;
        let b = evaluate(&p2, &t2, &cfg()).unwrap().confusion;
        let tall: Vec<f64> = t1.iter().chain(t2.iter()).copied().collect();
        let pall: Vec<f64> = p1.iter().chain(p2.iter()).copied().collect();
        let c = evaluate(&pall, &tall, &cfg()).unwrap().confusion;
        assert_eq!(
            c.combined.true_pos,
            a.combined.true_pos + b.combined.true_pos
        );
        assert_eq!(
            c.combined.false_neg,
            a.combined.false_neg + b.combined.false_neg
        );
        assert_eq!(
            c.high.false_pos + c.low.false_pos,
            a.high.false_pos + a.low.false_pos + b.high.false_pos + b.low.false_pos
        );
    }

    #[test]
    fn input_validation() {
        let c = cfg();
        assert_eq!(
            evaluate(&[1.0], &[1.0, 2.0], &c),
            Err(MetricsError::LengthMismatch {
                preds: 1,
                targets: 2
            })
        );
        assert_eq!(evaluate(&[], &[], &c), Err(MetricsError::EmptyInput));
        assert!(evaluate(&[f64::NAN], &[1.0], &c).is_err());
    }

    #[test]
    fn csv_row_matches_header_arity() {
        let report = evaluate(&[31.0, 22.0], &[35.0, 20.0], &cfg()).unwrap();
        let header_cols = EvalReport::csv_header().split(',').count();
        let row_cols = report.csv_row().split(',').count();
        assert_eq!(header_cols, row_cols);
        // Absent low-band metrics are empty cells, not zeros.
        assert!(report.csv_row().contains(",,"));
    }
}
