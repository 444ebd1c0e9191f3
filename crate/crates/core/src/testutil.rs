//! Brute-force oracles for tests (feature `testutil`).
//!
//! Nothing here shares code with the trainers: the split oracle enumerates
//! raw (feature, threshold) candidates sample by sample, with no binning,
//! so it can arbitrate what the histogram path should have chosen.

use chrono::NaiveDate;

use crate::pipeline::WindowSample;

/// Same comparison rule as the trainer: a candidate wins only by beating
/// the incumbent gain beyond a relative dead band, so mathematically tied
/// gains (e.g. complementary partitions on different features) resolve to
/// the earliest candidate on both paths despite floating-point noise.
pub fn beats(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + 1e-9 * incumbent.abs().max(1.0)
}

/// The exhaustive argmax split: identified by the partition it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSplit {
    pub feature: usize,
    pub threshold: f64,
    /// Sample indices routed left (`x[feature] <= threshold`), ascending.
    pub left: Vec<usize>,
    pub gain: f64,
}

/// Enumerate every (feature, distinct-value threshold) pair and return the
/// gain argmax, ties broken by lowest feature index then lowest threshold.
pub fn exhaustive_best_split(
    rows: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    lambda: f64,
    min_samples_leaf: usize,
) -> Option<OracleSplit> {
    assert!(!rows.is_empty());
    let n_features = rows[0].len();
    let total_g: f64 = grad.iter().sum();
    let total_h: f64 = hess.iter().sum();
    let parent = total_g * total_g / (total_h + lambda);

    let mut best: Option<OracleSplit> = None;
    for f in 0..n_features {
        let mut thresholds: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        thresholds.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        thresholds.dedup();
        thresholds.pop(); // splitting at the max sends everything left
        for &t in &thresholds {
            let left: Vec<usize> = (0..rows.len()).filter(|&i| rows[i][f] <= t).collect();
            let n_left = left.len();
            let n_right = rows.len() - n_left;
            if n_left < min_samples_leaf || n_right < min_samples_leaf {
                continue;
            }
            let gl: f64 = left.iter().map(|&i| grad[i]).sum();
            let hl: f64 = left.iter().map(|&i| hess[i]).sum();
            let gr = total_g - gl;
            let hr = total_h - hl;
            let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
            if beats(gain, best.as_ref().map_or(0.0, |b| b.gain)) {
                best = Some(OracleSplit {
                    feature: f,
                    threshold: t,
                    left,
                    gain,
                });
            }
        }
    }
    best
}

/// Window samples from bare (features, target) rows, for trainer tests that
/// have no time axis.
pub fn samples_from_rows(rows: &[(Vec<f64>, f64)]) -> Vec<WindowSample> {
    let t0 = NaiveDate::from_ymd_opt(2018, 7, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    rows.iter()
        .enumerate()
        .map(|(i, (features, target))| WindowSample {
            features: features.clone(),
            target: *target,
            target_time: t0 + chrono::TimeDelta::seconds(600 * i as i64),
        })
        .collect()
}
