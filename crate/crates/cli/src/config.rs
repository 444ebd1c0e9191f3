//! Run configuration: defaults, the flat key-value config file, and CLI
//! overrides.
//!
//! The config file is line-oriented `key = value` text. Blank lines and
//! `#` comment lines are skipped; unknown keys are rejected outright so a
//! typo cannot silently fall back to a default. Command-line flags override
//! file values, which override defaults.

use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use greencast::gbdt::GbdtParams;
use greencast::loss::LossConfig;
use greencast::mlp::MlpParams;
use greencast::synth::SynthConfig;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Gbdt,
    Mlp,
}

impl ModelKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::Gbdt => "gbdt",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gbdt" => Ok(ModelKind::Gbdt),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(format!("unknown model {other:?} (expected gbdt or mlp)")),
        }
    }
}

/// Everything a command needs: paths, loss settings, model choice and
/// hyperparameters, split months, and the one top-level seed.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub t_high: f64,
    pub t_low: f64,
    pub a: f64,
    /// Explicit band weights; when absent they are computed from the
    /// training targets at train time.
    pub w_high: Option<f64>,
    pub w_low: Option<f64>,
    pub model: ModelKind,
    pub baseline: bool,
    pub seed: u64,
    pub test_months: Vec<(i32, u32)>,
    pub sweep_a: Vec<f64>,
    pub gbdt: GbdtParams,
    pub mlp: MlpParams,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            out_dir: PathBuf::from("out"),
            t_high: 30.0,
            t_low: 10.0,
            a: 0.9,
            w_high: None,
            w_low: None,
            model: ModelKind::Gbdt,
            baseline: false,
            seed: 42,
            test_months: vec![(2018, 8), (2019, 2)],
            sweep_a: vec![0.5, 0.7, 0.9],
            gbdt: GbdtParams::default(),
            mlp: MlpParams::default(),
            synth: SynthConfig::default(),
        }
    }
}

fn parse_month(s: &str) -> Result<(i32, u32), String> {
    let (y, m) = s
        .trim()
        .split_once('-')
        .ok_or_else(|| format!("month {s:?} is not YYYY-MM"))?;
    let year: i32 = y.parse().map_err(|_| format!("bad year in {s:?}"))?;
    let month: u32 = m.parse().map_err(|_| format!("bad month in {s:?}"))?;
    if !(1..=12).contains(&month) {
        return Err(format!("month {month} out of range in {s:?}"));
    }
    Ok((year, month))
}

pub fn parse_test_months(s: &str) -> Result<Vec<(i32, u32)>, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(parse_month)
        .collect()
}

fn parse_datetime(s: &str) -> Result<NaiveDateTime, String> {
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
        return Ok(dt);
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).unwrap())
        .map_err(|_| format!("{s:?} is not YYYY-MM-DD or YYYY-MM-DD HH:MM:SS"))
}

impl RunConfig {
    /// Apply one key from the config file.
    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.trim()
                .parse()
                .map_err(|_| format!("key {key}: cannot parse {v:?}"))
        }
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "out" => self.out_dir = PathBuf::from(value),
            "t_high" => self.t_high = num(key, value)?,
            "t_low" => self.t_low = num(key, value)?,
            "a" => self.a = num(key, value)?,
            "w_high" => self.w_high = Some(num(key, value)?),
            "w_low" => self.w_low = Some(num(key, value)?),
            "model" => self.model = value.parse()?,
            "baseline" => self.baseline = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "test_months" => self.test_months = parse_test_months(value)?,
            "sweep_a" => {
                self.sweep_a = value
                    .split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| num::<f64>(key, p))
                    .collect::<Result<_, _>>()?;
            }
            "gbdt_rounds" => self.gbdt.n_rounds = num(key, value)?,
            "gbdt_learning_rate" => self.gbdt.learning_rate = num(key, value)?,
            "gbdt_max_depth" => self.gbdt.max_depth = num(key, value)?,
            "gbdt_min_samples_leaf" => self.gbdt.min_samples_leaf = num(key, value)?,
            "gbdt_lambda_l2" => self.gbdt.lambda_l2 = num(key, value)?,
            "gbdt_max_bins" => self.gbdt.max_bins = num(key, value)?,
            "mlp_hidden_sizes" => {
                self.mlp.hidden_sizes = value
                    .split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| num::<usize>(key, p))
                    .collect::<Result<_, _>>()?;
            }
            "mlp_learning_rate" => self.mlp.learning_rate = num(key, value)?,
            "mlp_batch_size" => self.mlp.batch_size = num(key, value)?,
            "mlp_epochs" => self.mlp.epochs = num(key, value)?,
            "synth_start" => self.synth.start = parse_datetime(value.trim())?,
            "synth_end" => self.synth.end = parse_datetime(value.trim())?,
            "synth_base_temp" => self.synth.base_temp = num(key, value)?,
            "synth_seasonal_amplitude" => self.synth.seasonal_amplitude = num(key, value)?,
            "synth_diurnal_amplitude" => self.synth.diurnal_amplitude = num(key, value)?,
            "synth_noise_std" => self.synth.noise_std = num(key, value)?,
            "synth_ar_coefficient" => self.synth.ar_coefficient = num(key, value)?,
            "synth_episode_rate" => self.synth.episode_rate = num(key, value)?,
            "synth_episode_amplitude" => self.synth.episode_amplitude = num(key, value)?,
            "synth_dropout_rate" => self.synth.dropout_rate = num(key, value)?,
            "synth_gap_min_minutes" => self.synth.gap_min_minutes = num(key, value)?,
            "synth_gap_max_minutes" => self.synth.gap_max_minutes = num(key, value)?,
            "synth_outlier_rate" => self.synth.outlier_rate = num(key, value)?,
            unknown => return Err(format!("unknown config key {unknown:?}")),
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "{}:{}: expected `key = value`, got {raw:?}",
                    path.display(),
                    idx + 1
                ))
            })?;
            self.apply(key.trim(), value.trim()).map_err(|msg| {
                CliError::Usage(format!("{}:{}: {msg}", path.display(), idx + 1))
            })?;
        }
        Ok(())
    }

    /// Loss configuration from the thresholds, importance factor and any
    /// explicit weights. Fails on out-of-range values.
    pub fn loss_config(&self) -> Result<LossConfig, CliError> {
        let cfg = LossConfig::new(self.t_high, self.t_low, self.a)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        match (self.w_high, self.w_low) {
            (Some(wh), Some(wl)) => cfg
                .with_weights(wh, wl)
                .map_err(|e| CliError::Usage(e.to_string())),
            (None, None) => Ok(cfg),
            _ => Err(CliError::Usage(
                "w_high and w_low must be given together (or neither)".to_string(),
            )),
        }
    }

    /// True when band weights must be computed from the training targets.
    pub fn weights_need_fitting(&self) -> bool {
        self.w_high.is_none() || self.w_low.is_none()
    }

    /// Propagate the top-level seed into sub-configs.
    pub fn sync_seeds(&mut self) {
        self.mlp.seed = self.seed;
        self.synth.seed = self.seed;
    }
}
