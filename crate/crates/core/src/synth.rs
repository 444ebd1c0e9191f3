//! Seeded synthetic greenhouse data.
//!
//! Stands in for a private sensor deployment: one-minute records with a
//! yearly seasonal cycle, a diurnal cycle peaking at solar noon, slowly
//! decaying AR(1) noise, episodic heat waves / cold snaps, sensor dropouts
//! and out-of-range spike outliers. Injected anomalies are listed in a
//! sidecar manifest so cleaning tests have exact ground truth.
//!
//! Generation is deterministic: the same config and seed produce identical
//! records, byte for byte once written. Each random ingredient draws from
//! its own labeled stream (see [`crate::seed`]), so toggling one never
//! perturbs another.

use chrono::{NaiveDate, NaiveDateTime, TimeDelta, Timelike};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::EnvRecord;
use crate::seed::rng_for;

const MINUTES_PER_DAY: i64 = 1440;
const MINUTES_PER_YEAR: f64 = 365.25 * 1440.0;
const MINUTES_PER_MONTH: f64 = 30.44 * 1440.0;

/// Legitimate temperatures are kept strictly inside the cleaning range
/// [0, 40] so that exactly the injected outliers fall outside it.
const TEMP_FLOOR: f64 = 0.5;
const TEMP_CEIL: f64 = 39.5;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
}

/// Generator parameters. Defaults cover the 14 months from 2018-06-17 to
/// 2019-08-12 with extremes rare but present in both tails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub seed: u64,
    /// Annual mean temperature in degrees C.
    pub base_temp: f64,
    /// Amplitude of the one-year sinusoid (peak around late July).
    pub seasonal_amplitude: f64,
    /// Amplitude of the 24 h sinusoid (peak at solar noon).
    pub diurnal_amplitude: f64,
    /// Std of the per-minute AR(1) innovation.
    pub noise_std: f64,
    /// AR(1) coefficient per minute, in [0, 1).
    pub ar_coefficient: f64,
    /// Extreme episodes (heat waves / cold snaps) per month.
    pub episode_rate: f64,
    /// Peak amplitude of an episode in degrees C.
    pub episode_amplitude: f64,
    /// Sensor dropouts (contiguous missing spans) per month.
    pub dropout_rate: f64,
    pub gap_min_minutes: i64,
    pub gap_max_minutes: i64,
    /// Out-of-range single-record spikes per month.
    pub outlier_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2018, 6, 17)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
            end: NaiveDate::from_ymd_opt(2019, 8, 12)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
            seed: 42,
            base_temp: 17.0,
            seasonal_amplitude: 9.0,
            diurnal_amplitude: 5.5,
            noise_std: 0.15,
            ar_coefficient: 0.995,
            episode_rate: 6.0,
            episode_amplitude: 8.0,
            dropout_rate: 4.0,
            gap_min_minutes: 30,
            gap_max_minutes: 360,
            outlier_rate: 10.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: String| Err(SynthError::InvalidConfig(m));
        if self.end <= self.start {
            return err(format!("end ({}) must be after start ({})", self.end, self.start));
        }
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return err(format!("ar_coefficient must be in [0, 1), got {}", self.ar_coefficient));
        }
        for (name, v) in [
            ("base_temp", self.base_temp),
            ("seasonal_amplitude", self.seasonal_amplitude),
            ("diurnal_amplitude", self.diurnal_amplitude),
            ("noise_std", self.noise_std),
            ("episode_rate", self.episode_rate),
            ("episode_amplitude", self.episode_amplitude),
            ("dropout_rate", self.dropout_rate),
            ("outlier_rate", self.outlier_rate),
        ] {
            if !v.is_finite() {
                return err(format!("{name} is not finite"));
            }
        }
        for (name, v) in [
            ("seasonal_amplitude", self.seasonal_amplitude),
            ("diurnal_amplitude", self.diurnal_amplitude),
            ("noise_std", self.noise_std),
            ("episode_rate", self.episode_rate),
            ("episode_amplitude", self.episode_amplitude),
            ("dropout_rate", self.dropout_rate),
            ("outlier_rate", self.outlier_rate),
        ] {
            if v < 0.0 {
                return err(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.gap_min_minutes < 1 || self.gap_max_minutes < self.gap_min_minutes {
            return err(format!(
                "gap bounds must satisfy 1 <= min <= max, got {}..{}",
                self.gap_min_minutes, self.gap_max_minutes
            ));
        }
        Ok(())
    }

    fn minutes(&self) -> i64 {
        (self.end - self.start).num_minutes()
    }
}

/// An injected out-of-range spike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedOutlier {
    pub timestamp: NaiveDateTime,
    pub temperature: f64,
}

/// A deleted sensor span: `[start, end)` at one-minute cadence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedSpan {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

/// Ground truth for every injected anomaly, plus a band census of the
/// emitted records at the standard 30 / 10 degree thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub outliers: Vec<InjectedOutlier>,
    pub dropouts: Vec<DroppedSpan>,
    /// (n_low, n_normal, n_high) over emitted non-outlier records.
    pub band_counts: (usize, usize, usize),
}

struct Episode {
    start_minute: i64,
    duration: i64,
    /// Signed peak in degrees C; positive in the warm season.
    peak: f64,
}

fn normal_sample(rng: &mut impl Rng, std: f64) -> f64 {
    if std <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, std).expect("finite std").sample(rng)
}

/// Seasonal offset at a given minute since the 2018-01-01 epoch; peaks
/// around day 200 (late July).
fn seasonal_at(cfg: &SynthConfig, minute_since_epoch: f64) -> f64 {
    let peak_minute = 200.0 * MINUTES_PER_DAY as f64;
    cfg.seasonal_amplitude
        * (std::f64::consts::TAU * (minute_since_epoch - peak_minute) / MINUTES_PER_YEAR
            + std::f64::consts::FRAC_PI_2)
            .sin()
}

/// Diurnal offset; sin peaking at solar noon, trough at midnight.
fn diurnal_at(cfg: &SynthConfig, minute_of_day: f64) -> f64 {
    cfg.diurnal_amplitude
        * (std::f64::consts::TAU * (minute_of_day - 360.0) / MINUTES_PER_DAY as f64).sin()
}

fn epoch_origin() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2018, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

fn draw_episodes(cfg: &SynthConfig, months: f64) -> Vec<Episode> {
    let mut rng = rng_for(cfg.seed, "synth/episodes");
    let n = (cfg.episode_rate * months).round() as usize;
    let total = cfg.minutes();
    let origin_offset = (cfg.start - epoch_origin()).num_minutes() as f64;
    let mut episodes = Vec::with_capacity(n);
    for _ in 0..n {
        let start_minute = rng.random_range(0..total.max(1));
        let duration = rng.random_range(240..=720);
        let strength = rng.random_range(0.6..1.0);
        let center = origin_offset + start_minute as f64 + duration as f64 / 2.0;
        // Heat waves in the warm half of the year, cold snaps otherwise.
        let sign = if seasonal_at(cfg, center) >= 0.0 { 1.0 } else { -1.0 };
        episodes.push(Episode {
            start_minute,
            duration,
            peak: sign * strength * cfg.episode_amplitude,
        });
    }
    episodes.sort_by_key(|e| e.start_minute);
    episodes
}

/// Dropout spans kept at least 45 minutes from each other and from the
/// series edges, so removing them can never strand a sub-30-minute segment.
fn draw_dropouts(cfg: &SynthConfig, months: f64) -> Vec<(i64, i64)> {
    let mut rng = rng_for(cfg.seed, "synth/dropouts");
    let n = (cfg.dropout_rate * months).round() as usize;
    let total = cfg.minutes();
    let margin = 45;
    let mut spans: Vec<(i64, i64)> = Vec::with_capacity(n);
    let mut attempts = 0;
    while spans.len() < n && attempts < n * 50 {
        attempts += 1;
        let len = rng.random_range(cfg.gap_min_minutes..=cfg.gap_max_minutes);
        if total <= 2 * margin + len {
            break;
        }
        let start = rng.random_range(margin..total - margin - len);
        let end = start + len;
        let clashes = spans
            .iter()
            .any(|&(s, e)| start < e + margin && s < end + margin);
        if !clashes {
            spans.push((start, end));
        }
    }
    spans.sort_unstable();
    spans
}

/// Outlier minutes: never inside a dropout and pairwise at least 10
/// minutes apart, so their removal cannot merge into a segment break.
fn draw_outlier_minutes(cfg: &SynthConfig, months: f64, dropouts: &[(i64, i64)]) -> Vec<i64> {
    let mut rng = rng_for(cfg.seed, "synth/outliers");
    let n = (cfg.outlier_rate * months).round() as usize;
    let total = cfg.minutes();
    let mut minutes: Vec<i64> = Vec::with_capacity(n);
    let mut attempts = 0;
    while minutes.len() < n && attempts < n * 50 {
        attempts += 1;
        let m = rng.random_range(0..total.max(1));
        let in_dropout = dropouts.iter().any(|&(s, e)| m >= s && m < e);
        let crowded = minutes.iter().any(|&x| (x - m).abs() < 10);
        if !in_dropout && !crowded {
            minutes.push(m);
        }
    }
    minutes.sort_unstable();
    minutes
}

/// Generate one-minute records plus the anomaly manifest.
pub fn generate(cfg: &SynthConfig) -> Result<(Vec<EnvRecord>, SynthManifest), SynthError> {
    cfg.validate()?;
    let total = cfg.minutes();
    let months = total as f64 / MINUTES_PER_MONTH;

    let episodes = draw_episodes(cfg, months);
    let dropouts = draw_dropouts(cfg, months);
    let outlier_minutes = draw_outlier_minutes(cfg, months, &dropouts);

    let mut noise_rng = rng_for(cfg.seed, "synth/noise");
    let mut channel_rng = rng_for(cfg.seed, "synth/channels");
    let mut outlier_rng = rng_for(cfg.seed, "synth/outlier-values");

    // Stationary AR(1) start so the series has no warm-up transient.
    let stationary_std = cfg.noise_std / (1.0 - cfg.ar_coefficient.powi(2)).sqrt();
    let mut ar = normal_sample(&mut noise_rng, stationary_std);

    let mut pressure = 998.0;
    let mut co2 = 611.0;

    let origin_offset = (cfg.start - epoch_origin()).num_minutes() as f64;
    let mut next_episode = 0usize;
    let mut active: Vec<&Episode> = Vec::new();

    let mut records = Vec::with_capacity(total as usize);
    let mut outliers = Vec::new();
    let mut band_counts = (0usize, 0usize, 0usize);
    let mut outlier_iter = outlier_minutes.iter().peekable();
    let mut dropout_iter = dropouts.iter().peekable();
    let mut in_dropout: Option<(i64, i64)> = None;
    let mut flip_high = true;

    for m in 0..total {
        let timestamp = cfg.start + TimeDelta::minutes(m);
        let minute_of_day =
            (timestamp.hour() as i64 * 60 + timestamp.minute() as i64) as f64;
        let minute_since_epoch = origin_offset + m as f64;

        // Evolve every stochastic component each minute, whether or not the
        // record is emitted, so dropouts do not disturb the signal around them.
        ar = cfg.ar_coefficient * ar + normal_sample(&mut noise_rng, cfg.noise_std);
        pressure = (pressure + normal_sample(&mut channel_rng, 0.05)).clamp(975.0, 1025.0);
        co2 = (co2 + 0.001 * (600.0 - co2) + normal_sample(&mut channel_rng, 2.0))
            .clamp(350.0, 1500.0);
        let humidity_noise = normal_sample(&mut channel_rng, 1.5);
        let illum_noise = normal_sample(&mut channel_rng, 300.0);

        while next_episode < episodes.len() && episodes[next_episode].start_minute <= m {
            active.push(&episodes[next_episode]);
            next_episode += 1;
        }
        active.retain(|e| m < e.start_minute + e.duration);
        let episode_offset: f64 = active
            .iter()
            .map(|e| {
                let progress = (m - e.start_minute) as f64 / e.duration as f64;
                e.peak * (std::f64::consts::PI * progress).sin().powi(2)
            })
            .sum();

        let seasonal = seasonal_at(cfg, minute_since_epoch);
        let diurnal = diurnal_at(cfg, minute_of_day);
        let temperature =
            (cfg.base_temp + seasonal + diurnal + ar + episode_offset).clamp(TEMP_FLOOR, TEMP_CEIL);

        if in_dropout.is_none() {
            if let Some(&&(s, e)) = dropout_iter.peek() {
                if m >= s {
                    in_dropout = Some((s, e));
                    dropout_iter.next();
                }
            }
        }
        if let Some((_, e)) = in_dropout {
            if m < e {
                continue;
            }
            in_dropout = None;
        }

        let is_outlier = outlier_iter.peek() == Some(&&m);
        let emitted_temp = if is_outlier {
            outlier_iter.next();
            flip_high = !flip_high;
            let spike = if flip_high {
                44.0 + outlier_rng.random_range(0.0..6.0)
            } else {
                -(2.0 + outlier_rng.random_range(0.0..4.0))
            };
            outliers.push(InjectedOutlier {
                timestamp,
                temperature: spike,
            });
            spike
        } else {
            match temperature {
                t if t >= 30.0 => band_counts.2 += 1,
                t if t <= 10.0 => band_counts.0 += 1,
                _ => band_counts.1 += 1,
            }
            temperature
        };

        let humidity = (85.0 - 1.8 * (temperature - cfg.base_temp) + humidity_noise)
            .clamp(20.0, 99.9);
        let day_curve = (std::f64::consts::TAU * (minute_of_day - 360.0)
            / MINUTES_PER_DAY as f64)
            .sin()
            .max(0.0);
        let peak_lux = 22000.0 + 8000.0 * seasonal / cfg.seasonal_amplitude.max(1e-9);
        let illumination = (peak_lux * day_curve.powf(1.5) + illum_noise).max(0.0);

        records.push(EnvRecord {
            timestamp,
            temperature: emitted_temp,
            humidity,
            pressure,
            illumination,
            co2,
        });
    }

    let manifest = SynthManifest {
        outliers,
        dropouts: dropouts
            .iter()
            .map(|&(s, e)| DroppedSpan {
                start: cfg.start + TimeDelta::minutes(s),
                end: cfg.start + TimeDelta::minutes(e),
            })
            .collect(),
        band_counts,
    };
    Ok((records, manifest))
}
