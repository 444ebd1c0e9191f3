//! Sensor-data preprocessing: cleaning, 10-minute aggregation, window
//! reconstruction and month-based train/test division.
//!
//! The stages run in order on raw one-minute records:
//!
//! 1. [`clean`] drops out-of-range temperatures and short isolated segments.
//! 2. [`aggregate`] averages each channel over wall-clock-aligned buckets.
//! 3. [`build_windows`] slides a 24-step (4 h) feature window over every
//!    contiguous run and pairs it with the temperature 24 steps (4 h) ahead.
//! 4. [`split_by_month`] assigns samples to train or test by the calendar
//!    month of the prediction target.
//!
//! All stages are pure; re-running a stage on its own output is a no-op for
//! [`clean`], and bucket means are exact arithmetic means.

mod io;

pub use io::{ingest_csv, read_windows_csv, write_records_csv, write_windows_csv, RowIssue};

use chrono::{Datelike, NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loss::LossConfig;

/// Steps of history in one feature window (4 h at 10-minute cadence).
pub const INPUT_STEPS: usize = 24;
/// Steps between the end of the window and the prediction target (4 h).
pub const LEAD_STEPS: usize = 24;
/// Channels per step: temperature, humidity, pressure, illumination, co2.
pub const CHANNELS: usize = 5;
/// Flattened feature-vector length.
pub const FEATURE_LEN: usize = INPUT_STEPS * CHANNELS;
/// Aggregation bucket width in seconds.
pub const AGGREGATE_INTERVAL_SECS: i64 = 600;

/// One timestamped sensor reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvRecord {
    pub timestamp: NaiveDateTime,
    /// Temperature in degrees C.
    pub temperature: f64,
    /// Relative humidity in %rh.
    pub humidity: f64,
    /// Air pressure in hPa.
    pub pressure: f64,
    /// Light intensity in lux.
    pub illumination: f64,
    /// CO2 concentration in ppm.
    pub co2: f64,
}

impl EnvRecord {
    fn channels(&self) -> [f64; CHANNELS] {
        [
            self.temperature,
            self.humidity,
            self.pressure,
            self.illumination,
            self.co2,
        ]
    }
}

/// One supervised sample: a flattened feature window plus its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    /// `INPUT_STEPS x CHANNELS` values in step-major order.
    pub features: Vec<f64>,
    /// Temperature `LEAD_STEPS` buckets after the last input step.
    pub target: f64,
    /// Timestamp of the target bucket.
    pub target_time: NaiveDateTime,
}

/// Train/test division with the training band census.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
    /// (n_low, n_normal, n_high) over training targets.
    pub band_counts_train: (usize, usize, usize),
}

/// Per-cause removal counts from [`clean`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub input_records: usize,
    pub duplicate_timestamps_removed: usize,
    pub outliers_removed: usize,
    pub short_segment_records_removed: usize,
    pub segments_kept: usize,
    pub output_records: usize,
}

/// Knobs for [`clean`]. Defaults: keep temperatures in [0, 40] C, break
/// segments at raw gaps over 5 minutes, drop segments spanning under 30
/// minutes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleanParams {
    pub temp_min: f64,
    pub temp_max: f64,
    pub raw_gap_secs: i64,
    pub min_segment_secs: i64,
}

impl Default for CleanParams {
    fn default() -> Self {
        Self {
            temp_min: 0.0,
            temp_max: 40.0,
            raw_gap_secs: 300,
            min_segment_secs: 1800,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing or malformed header: expected columns {expected}, found {found}")]
    MissingHeader { expected: String, found: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty split: {0} train and {1} test samples")]
    EmptySplit(usize, usize),
    #[error("windowed dataset header mismatch: {0}")]
    BadWindowHeader(String),
    #[error("line {line}: {message}")]
    BadWindowRow { line: u64, message: String },
}

/// Sort by timestamp, drop duplicate timestamps and out-of-range
/// temperatures, then drop segments that span less than the minimum
/// duration. Segment boundaries are gaps larger than `raw_gap_secs`
/// between consecutive surviving records.
pub fn clean(records: &[EnvRecord], params: &CleanParams) -> (Vec<EnvRecord>, CleanReport) {
    let mut report = CleanReport {
        input_records: records.len(),
        ..CleanReport::default()
    };

    let mut sorted: Vec<&EnvRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.timestamp);

    // Stable sort keeps file order within equal timestamps, so "first
    // occurrence wins" is exactly a dedup.
    let mut in_range: Vec<&EnvRecord> = Vec::with_capacity(sorted.len());
    let mut last_ts: Option<NaiveDateTime> = None;
    for rec in sorted {
        if last_ts == Some(rec.timestamp) {
            report.duplicate_timestamps_removed += 1;
            continue;
        }
        last_ts = Some(rec.timestamp);
        if rec.temperature > params.temp_max || rec.temperature < params.temp_min {
            report.outliers_removed += 1;
            continue;
        }
        in_range.push(rec);
    }

    let gap = TimeDelta::seconds(params.raw_gap_secs);
    let min_span = TimeDelta::seconds(params.min_segment_secs);
    let mut kept: Vec<EnvRecord> = Vec::with_capacity(in_range.len());
    let mut seg_start = 0;
    for i in 0..=in_range.len() {
        let boundary = i == in_range.len()
            || (i > 0 && in_range[i].timestamp - in_range[i - 1].timestamp > gap);
        if !boundary {
            continue;
        }
        if i > seg_start {
            let span = in_range[i - 1].timestamp - in_range[seg_start].timestamp;
            if span >= min_span {
                kept.extend(in_range[seg_start..i].iter().map(|r| (*r).clone()));
                report.segments_kept += 1;
            } else {
                report.short_segment_records_removed += i - seg_start;
            }
        }
        seg_start = i;
    }

    report.output_records = kept.len();
    (kept, report)
}

/// Average each channel over wall-clock-aligned buckets of
/// `interval_secs`. Bucket start is the timestamp floored to the interval;
/// empty buckets produce no record, so gaps persist.
pub fn aggregate(records: &[EnvRecord], interval_secs: i64) -> Vec<EnvRecord> {
    assert!(interval_secs > 0, "interval must be positive");
    let mut records: Vec<&EnvRecord> = records.iter().collect();
    records.sort_by_key(|r| r.timestamp);

    let mut out: Vec<EnvRecord> = Vec::new();
    let mut bucket_key: Option<i64> = None;
    let mut sums = [0.0; CHANNELS];
    let mut count = 0usize;

    let flush = |key: Option<i64>, sums: &mut [f64; CHANNELS], count: &mut usize, out: &mut Vec<EnvRecord>| {
        if let Some(k) = key {
            if *count > 0 {
                let n = *count as f64;
                out.push(EnvRecord {
                    timestamp: chrono::DateTime::from_timestamp(k, 0)
                        .expect("bucket key in range")
                        .naive_utc(),
                    temperature: sums[0] / n,
                    humidity: sums[1] / n,
                    pressure: sums[2] / n,
                    illumination: sums[3] / n,
                    co2: sums[4] / n,
                });
            }
        }
        *sums = [0.0; CHANNELS];
        *count = 0;
    };

    for rec in records {
        let key = rec.timestamp.and_utc().timestamp().div_euclid(interval_secs) * interval_secs;
        if bucket_key != Some(key) {
            flush(bucket_key, &mut sums, &mut count, &mut out);
            bucket_key = Some(key);
        }
        for (s, v) in sums.iter_mut().zip(rec.channels()) {
            *s += v;
        }
        count += 1;
    }
    flush(bucket_key, &mut sums, &mut count, &mut out);
    out
}

/// Slide a window over every maximal contiguous run of aggregated steps.
///
/// Steps are contiguous when consecutive timestamps differ by exactly
/// `interval_secs`. Each position i with 48 contiguous steps yields one
/// sample: features from steps i..i+23, target temperature at step i+47.
/// The stride is one step, so a run of L >= 48 steps yields L - 47 samples.
pub fn build_windows(records: &[EnvRecord], interval_secs: i64) -> Vec<WindowSample> {
    let total = INPUT_STEPS + LEAD_STEPS;
    if records.len() < total {
        return Vec::new();
    }
    let step = TimeDelta::seconds(interval_secs);

    let mut samples = Vec::new();
    let mut run_start = 0;
    for i in 0..=records.len() {
        let run_end = i == records.len()
            || (i > 0 && records[i].timestamp - records[i - 1].timestamp != step);
        if !run_end {
            continue;
        }
        let run = &records[run_start..i];
        if run.len() >= total {
            for w in run.windows(total) {
                let mut features = Vec::with_capacity(FEATURE_LEN);
                for step_rec in &w[..INPUT_STEPS] {
                    features.extend_from_slice(&step_rec.channels());
                }
                let target_rec = &w[total - 1];
                samples.push(WindowSample {
                    features,
                    target: target_rec.temperature,
                    target_time: target_rec.timestamp,
                });
            }
        }
        run_start = i;
    }
    samples
}

/// Divide samples by the calendar month of their target time. A sample is
/// a test sample iff its (year, month) appears in `test_months`; everything
/// else trains. The training band census uses `cfg`'s thresholds.
pub fn split_by_month(
    samples: &[WindowSample],
    test_months: &[(i32, u32)],
    cfg: &LossConfig,
) -> Result<SplitDataset, PipelineError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for s in samples {
        let key = (s.target_time.year(), s.target_time.month());
        if test_months.contains(&key) {
            test.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(PipelineError::EmptySplit(train.len(), test.len()));
    }
    let mut counts = (0usize, 0usize, 0usize);
    for s in &train {
        match cfg.band_of(s.target) {
            crate::loss::Band::Low => counts.0 += 1,
            crate::loss::Band::Normal => counts.1 += 1,
            crate::loss::Band::High => counts.2 += 1,
        }
    }
    Ok(SplitDataset {
        train,
        test,
        band_counts_train: counts,
    })
}
