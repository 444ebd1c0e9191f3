//! Command implementations. Each command is a plain function over
//! [`RunConfig`] so the binary, the sweep driver and the test suites share
//! one code path; all of them are deterministic given (inputs, seed).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use greencast::gbdt::{self, GbdtModel};
use greencast::loss::{ImprovedLoss, LossConfig, LossError, Objective, SquaredError};
use greencast::metrics::{evaluate, EvalReport};
use greencast::mlp::{self, MlpModel};
use greencast::model_file;
use greencast::pipeline::{
    aggregate, build_windows, clean, ingest_csv, read_windows_csv, split_by_month,
    write_records_csv, write_windows_csv, CleanParams, CleanReport, WindowSample,
    AGGREGATE_INTERVAL_SECS,
};
use greencast::synth::generate;
use serde::Serialize;

use crate::config::{ModelKind, RunConfig};
use crate::CliError;

pub struct SynthOutputs {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub n_records: usize,
    pub band_counts: (usize, usize, usize),
}

pub struct PreprocessOutputs {
    pub train_path: PathBuf,
    pub test_path: PathBuf,
    pub clean_report_path: PathBuf,
    pub split_summary_path: PathBuf,
    pub n_train: usize,
    pub n_test: usize,
    pub band_counts_train: (usize, usize, usize),
    pub n_row_issues: usize,
}

pub struct TrainOutputs {
    pub model_path: PathBuf,
    pub trace_path: PathBuf,
    pub objective: String,
    pub loss_config: LossConfig,
    pub loss_trace: Vec<f64>,
}

pub struct EvalOutputs {
    pub report_json_path: PathBuf,
    pub report_csv_path: PathBuf,
    pub report: EvalReport,
}

pub struct SweepRun {
    pub label: String,
    pub a: Option<f64>,
    pub report: EvalReport,
}

pub struct SweepOutputs {
    pub sweep_csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub runs: Vec<SweepRun>,
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn io_err<'a>(context: &'a str, path: &Path) -> impl FnOnce(std::io::Error) -> CliError + 'a {
    let path = path.to_path_buf();
    move |e| CliError::Io(format!("{context} {}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Io(format!("serialize {}: {e}", path.display())))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(io_err("cannot write", path))
}

/// Generate the synthetic sensor CSV plus its anomaly manifest.
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthOutputs, CliError> {
    ensure_out_dir(&cfg.out_dir)?;
    let (records, manifest) =
        generate(&cfg.synth).map_err(|e| CliError::Usage(e.to_string()))?;

    let csv_path = cfg.out_dir.join("synthetic.csv");
    let file = File::create(&csv_path).map_err(io_err("cannot create", &csv_path))?;
    let mut out = BufWriter::new(file);
    write_records_csv(&records, &mut out).map_err(io_err("cannot write", &csv_path))?;
    out.flush().map_err(io_err("cannot write", &csv_path))?;

    let manifest_path = cfg.out_dir.join("synthetic_manifest.json");
    write_json(&manifest_path, &manifest)?;

    println!(
        "synth: {} records ({} outliers, {} dropouts) -> {}",
        records.len(),
        manifest.outliers.len(),
        manifest.dropouts.len(),
        csv_path.display()
    );
    Ok(SynthOutputs {
        csv_path,
        manifest_path,
        n_records: records.len(),
        band_counts: manifest.band_counts,
    })
}

#[derive(Serialize)]
struct SplitSummary {
    n_samples: usize,
    n_train: usize,
    n_test: usize,
    test_months: Vec<String>,
    /// (n_low, n_normal, n_high) over training targets.
    band_counts_train: (usize, usize, usize),
    clean: CleanReport,
    row_issues: usize,
}

/// Ingest -> clean -> aggregate -> window -> split, writing the train/test
/// datasets and reports.
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<PreprocessOutputs, CliError> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("preprocess needs --input <raw csv>".to_string()))?;
    ensure_out_dir(&cfg.out_dir)?;
    let loss_cfg = cfg.loss_config()?;

    let file = File::open(input).map_err(io_err("cannot open", input))?;
    let (records, issues) = ingest_csv(BufReader::new(file)).map_err(CliError::from)?;
    if !issues.is_empty() {
        eprintln!("preprocess: {} malformed rows skipped", issues.len());
        for issue in issues.iter().take(5) {
            eprintln!("  line {}: {}", issue.line, issue.message);
        }
    }

    let (cleaned, clean_report) = clean(&records, &CleanParams::default());
    let aggregated = aggregate(&cleaned, AGGREGATE_INTERVAL_SECS);
    let samples = build_windows(&aggregated, AGGREGATE_INTERVAL_SECS);
    if samples.is_empty() {
        return Err(CliError::Domain(format!(
            "no windows could be built from {} aggregated steps; need 48 contiguous 10-minute buckets",
            aggregated.len()
        )));
    }
    let split = split_by_month(&samples, &cfg.test_months, &loss_cfg).map_err(CliError::from)?;

    let train_path = cfg.out_dir.join("train.csv");
    let test_path = cfg.out_dir.join("test.csv");
    for (path, part) in [(&train_path, &split.train), (&test_path, &split.test)] {
        let file = File::create(path).map_err(io_err("cannot create", path))?;
        let mut out = BufWriter::new(file);
        write_windows_csv(part, &mut out).map_err(io_err("cannot write", path))?;
        out.flush().map_err(io_err("cannot write", path))?;
    }

    let clean_report_path = cfg.out_dir.join("clean_report.json");
    write_json(&clean_report_path, &clean_report)?;

    let summary = SplitSummary {
        n_samples: samples.len(),
        n_train: split.train.len(),
        n_test: split.test.len(),
        test_months: cfg
            .test_months
            .iter()
            .map(|(y, m)| format!("{y:04}-{m:02}"))
            .collect(),
        band_counts_train: split.band_counts_train,
        clean: clean_report,
        row_issues: issues.len(),
    };
    let split_summary_path = cfg.out_dir.join("split_summary.json");
    write_json(&split_summary_path, &summary)?;

    println!(
        "preprocess: {} windows -> {} train / {} test (bands low/normal/high: {:?})",
        samples.len(),
        split.train.len(),
        split.test.len(),
        split.band_counts_train
    );
    Ok(PreprocessOutputs {
        train_path,
        test_path,
        clean_report_path,
        split_summary_path,
        n_train: split.train.len(),
        n_test: split.test.len(),
        band_counts_train: split.band_counts_train,
        n_row_issues: issues.len(),
    })
}

fn read_dataset(path: &Path) -> Result<Vec<WindowSample>, CliError> {
    let file = File::open(path).map_err(io_err("cannot open", path))?;
    read_windows_csv(BufReader::new(file)).map_err(CliError::from)
}

/// Tag for output file names: `gbdt_baseline`, `mlp_improved_a0.9`, ...
pub fn run_stem(model: ModelKind, baseline: bool, a: f64) -> String {
    if baseline {
        format!("{}_baseline", model.tag())
    } else {
        format!("{}_improved_a{a}", model.tag())
    }
}

/// Resolve the training objective: plain squared error for the baseline,
/// otherwise the weighted loss with band weights taken from the config or
/// fitted on the training targets.
fn resolve_objective(
    cfg: &RunConfig,
    targets: &[f64],
) -> Result<(Box<dyn Objective>, LossConfig), CliError> {
    let mut loss_cfg = cfg.loss_config()?;
    if cfg.baseline {
        return Ok((Box::new(SquaredError), loss_cfg));
    }
    if cfg.weights_need_fitting() {
        loss_cfg.fit_weights(targets).map_err(|e| match e {
            LossError::EmptyBand(band) => CliError::Domain(format!(
                "cannot fit band weights: the {band} band has no training samples \
                 (adjust t_high/t_low or provide w_high/w_low explicitly)"
            )),
            other => CliError::Domain(other.to_string()),
        })?;
    }
    let objective =
        ImprovedLoss::new(loss_cfg.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((Box::new(objective), loss_cfg))
}

fn write_trace(path: &Path, column: &str, trace: &[f64]) -> Result<(), CliError> {
    let mut text = format!("{column},train_loss\n");
    for (i, loss) in trace.iter().enumerate() {
        text.push_str(&format!("{i},{loss}\n"));
    }
    std::fs::write(path, text).map_err(io_err("cannot write", path))
}

/// Train the configured model on a windowed train CSV; persists the model
/// (with the loss config used) and its training-loss trace.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutputs, CliError> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("train needs --input <train csv>".to_string()))?;
    ensure_out_dir(&cfg.out_dir)?;
    let dataset = read_dataset(input)?;
    let targets: Vec<f64> = dataset.iter().map(|s| s.target).collect();
    let (objective, loss_cfg) = resolve_objective(cfg, &targets)?;

    let stem = run_stem(cfg.model, cfg.baseline, cfg.a);
    let model_path = cfg.out_dir.join(format!("model_{stem}.json"));
    let trace_path = cfg.out_dir.join(format!("loss_trace_{stem}.csv"));

    let (objective_name, trace) = match cfg.model {
        ModelKind::Gbdt => {
            let out = gbdt::train(&dataset, objective.as_ref(), &cfg.gbdt, &loss_cfg)
                .map_err(CliError::from)?;
            out.model.save(&model_path).map_err(CliError::from)?;
            write_trace(&trace_path, "round", &out.loss_trace)?;
            (out.model.objective.clone(), out.loss_trace)
        }
        ModelKind::Mlp => {
            let mut params = cfg.mlp.clone();
            params.seed = cfg.seed;
            let out = mlp::train(&dataset, objective.as_ref(), &params, &loss_cfg)
                .map_err(CliError::from)?;
            out.model.save(&model_path).map_err(CliError::from)?;
            write_trace(&trace_path, "epoch", &out.loss_trace)?;
            (out.model.objective.clone(), out.loss_trace)
        }
    };

    println!(
        "train: {} ({} samples, objective {}, w_high {:.3}, w_low {:.3}) -> {}",
        stem,
        dataset.len(),
        objective_name,
        loss_cfg.w_high,
        loss_cfg.w_low,
        model_path.display()
    );
    Ok(TrainOutputs {
        model_path,
        trace_path,
        objective: objective_name,
        loss_config: loss_cfg,
        loss_trace: trace,
    })
}

/// A loaded model of either kind.
pub enum AnyModel {
    Gbdt(GbdtModel),
    Mlp(MlpModel),
}

impl AnyModel {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(io_err("cannot read model", path))?;
        let kind = model_file::peek_kind(&bytes)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        match kind.as_str() {
            gbdt::MODEL_KIND => Ok(AnyModel::Gbdt(
                GbdtModel::from_bytes(&bytes).map_err(CliError::from)?,
            )),
            mlp::MODEL_KIND => Ok(AnyModel::Mlp(
                MlpModel::from_bytes(&bytes).map_err(CliError::from)?,
            )),
            other => Err(CliError::Io(format!(
                "{}: unsupported model kind {other:?}",
                path.display()
            ))),
        }
    }

    pub fn predict_batch(&self, samples: &[WindowSample]) -> Result<Vec<f64>, CliError> {
        match self {
            AnyModel::Gbdt(m) => m.predict_batch(samples).map_err(CliError::from),
            AnyModel::Mlp(m) => m.predict_batch(samples).map_err(CliError::from),
        }
    }

    /// The loss config frozen at training time (weights included).
    pub fn loss_config(&self) -> &LossConfig {
        match self {
            AnyModel::Gbdt(m) => &m.loss_config,
            AnyModel::Mlp(m) => &m.loss_config,
        }
    }
}

/// Evaluate a persisted model on a windowed test CSV. Band thresholds come
/// from the loss config stored in the model file.
pub fn cmd_eval(cfg: &RunConfig, model_path: &Path) -> Result<EvalOutputs, CliError> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("eval needs --input <test csv>".to_string()))?;
    ensure_out_dir(&cfg.out_dir)?;
    let dataset = read_dataset(input)?;
    let model = AnyModel::load(model_path)?;

    let preds = model.predict_batch(&dataset)?;
    let targets: Vec<f64> = dataset.iter().map(|s| s.target).collect();
    let report =
        evaluate(&preds, &targets, model.loss_config()).map_err(|e| CliError::Domain(e.to_string()))?;

    let stem = model_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model");
    let report_json_path = cfg.out_dir.join(format!("eval_{stem}.json"));
    let report_csv_path = cfg.out_dir.join(format!("eval_{stem}.csv"));
    write_json(&report_json_path, &report)?;
    std::fs::write(
        &report_csv_path,
        format!("{}\n{}\n", EvalReport::csv_header(), report.csv_row()),
    )
    .map_err(io_err("cannot write", &report_csv_path))?;

    println!(
        "eval: {} on {} samples -> recall {} mae_high {} bias_high {}",
        stem,
        report.n_samples,
        fmt(report.recall_combined),
        fmt(report.mae_high),
        fmt(report.bias_high),
    );
    Ok(EvalOutputs {
        report_json_path,
        report_csv_path,
        report,
    })
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".to_string())
}

/// Train the baseline plus one improved model per importance factor, all
/// evaluated on the shared test split; emits one CSV row per run.
pub fn cmd_sweep_a(cfg: &RunConfig, test_path: &Path) -> Result<SweepOutputs, CliError> {
    cfg.input
        .as_ref()
        .ok_or_else(|| CliError::Usage("sweep-a needs --input <train csv>".to_string()))?;
    if cfg.sweep_a.is_empty() {
        return Err(CliError::Usage("sweep_a must list at least one value".to_string()));
    }
    ensure_out_dir(&cfg.out_dir)?;

    let mut runs: Vec<SweepRun> = Vec::new();
    let mut rows: Vec<String> = Vec::new();

    let mut one_run = |run_cfg: &RunConfig, label: &str, a: Option<f64>| -> Result<(), CliError> {
        let trained = cmd_train(run_cfg)?;
        let mut eval_cfg = run_cfg.clone();
        eval_cfg.input = Some(test_path.to_path_buf());
        let eval = cmd_eval(&eval_cfg, &trained.model_path)?;
        rows.push(format!(
            "{label},{},{}",
            a.map(|v| v.to_string()).unwrap_or_default(),
            eval.report.csv_row()
        ));
        runs.push(SweepRun {
            label: label.to_string(),
            a,
            report: eval.report,
        });
        Ok(())
    };

    let mut base_cfg = cfg.clone();
    base_cfg.baseline = true;
    one_run(&base_cfg, "baseline", None)?;

    for &a in &cfg.sweep_a {
        let mut run_cfg = cfg.clone();
        run_cfg.baseline = false;
        run_cfg.a = a;
        one_run(&run_cfg, "improved", Some(a))?;
    }

    let sweep_csv_path = cfg.out_dir.join(format!("sweep_{}.csv", cfg.model.tag()));
    let mut text = format!("label,a,{}\n", EvalReport::csv_header());
    for row in &rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(&sweep_csv_path, &text).map_err(io_err("cannot write", &sweep_csv_path))?;

    let summary_path = cfg.out_dir.join(format!("sweep_{}_summary.txt", cfg.model.tag()));
    let mut summary = String::new();
    summary.push_str(&format!(
        "{:<12} {:>6} {:>8} {:>9} {:>9} {:>11} {:>10} {:>9}\n",
        "run", "a", "recall", "mae_high", "mae_low", "mae_normal", "bias_high", "bias_low"
    ));
    for run in &runs {
        summary.push_str(&format!(
            "{:<12} {:>6} {:>8} {:>9} {:>9} {:>11} {:>10} {:>9}\n",
            run.label,
            run.a.map(|a| a.to_string()).unwrap_or_else(|| "-".into()),
            fmt(run.report.recall_combined),
            fmt(run.report.mae_high),
            fmt(run.report.mae_low),
            fmt(run.report.mae_normal),
            fmt(run.report.bias_high),
            fmt(run.report.bias_low),
        ));
    }
    std::fs::write(&summary_path, &summary).map_err(io_err("cannot write", &summary_path))?;
    print!("{summary}");

    Ok(SweepOutputs {
        sweep_csv_path,
        summary_path,
        runs,
    })
}
