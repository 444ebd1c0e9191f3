//! Acceptance suite: one test per criterion, each printing a PASS line
//! (run with `-- --nocapture` to see them; the harness result is the
//! verdict either way).
//!
//! Criteria 5-7 share one 14-month synthetic dataset and its trained
//! models, built once on first use. Criterion 8 drives the compiled binary
//! end to end twice and byte-compares every artifact.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use greencast::gbdt::{self, GbdtParams, TreeNode};
use greencast::loss::{
    compute_extreme_weights, sample_grad_hess, sample_loss, Band, ImprovedLoss, LossConfig,
    LossError, Objective, SquaredError,
};
use greencast::metrics::EvalReport;
use greencast::mlp::{self, MlpParams};
use greencast::pipeline::{
    aggregate, build_windows, clean, ingest_csv, CleanParams, AGGREGATE_INTERVAL_SECS,
};
use greencast::testutil::{exhaustive_best_split, samples_from_rows};
use greencast_cli::commands::{cmd_eval, cmd_preprocess, cmd_sweep_a, cmd_synth, cmd_train};
use greencast_cli::config::{ModelKind, RunConfig};
use rand::Rng;

// ---------------------------------------------------------------------
// Shared desk-scale experiment (criteria 5, 6, 7)
// ---------------------------------------------------------------------

struct Shared {
    synth_csv: PathBuf,
    manifest_path: PathBuf,
    /// Baseline plus improved runs (a = 0.5, 0.7, 0.9) for the GBDT.
    gbdt_runs: Vec<(String, Option<f64>, EvalReport)>,
    mlp_baseline: EvalReport,
    mlp_improved: EvalReport,
}

fn shared() -> &'static Shared {
    static SHARED: OnceLock<Shared> = OnceLock::new();
    SHARED.get_or_init(|| {
        let out_root = std::env::temp_dir().join(format!(
            "greencast-acceptance-{}",
            std::process::id()
        ));
        std::fs::create_dir_all(&out_root).expect("create acceptance dir");

        let mut cfg = RunConfig {
            seed: 42,
            ..RunConfig::default()
        };
        cfg.sync_seeds();
        cfg.out_dir = out_root.join("data");
        let synth = cmd_synth(&cfg).expect("synth");

        cfg.input = Some(synth.csv_path.clone());
        cfg.out_dir = out_root.join("prep");
        let prep = cmd_preprocess(&cfg).expect("preprocess");
        assert!(prep.n_train > 0 && prep.n_test > 0);

        // GBDT sweep: baseline plus a = 0.5, 0.7, 0.9 on the shared split.
        cfg.input = Some(prep.train_path.clone());
        cfg.out_dir = out_root.join("sweep");
        cfg.model = ModelKind::Gbdt;
        let sweep = cmd_sweep_a(&cfg, &prep.test_path).expect("gbdt sweep");
        let gbdt_runs = sweep
            .runs
            .into_iter()
            .map(|r| (r.label, r.a, r.report))
            .collect();

        // MLP baseline and improved (a = 0.9).
        let mut mlp_cfg = cfg.clone();
        mlp_cfg.model = ModelKind::Mlp;
        mlp_cfg.out_dir = out_root.join("mlp");

        mlp_cfg.baseline = true;
        let trained = cmd_train(&mlp_cfg).expect("mlp baseline train");
        let mut eval_cfg = mlp_cfg.clone();
        eval_cfg.input = Some(prep.test_path.clone());
        let mlp_baseline = cmd_eval(&eval_cfg, &trained.model_path)
            .expect("mlp baseline eval")
            .report;

        mlp_cfg.baseline = false;
        mlp_cfg.a = 0.9;
        let trained = cmd_train(&mlp_cfg).expect("mlp improved train");
        let mut eval_cfg = mlp_cfg.clone();
        eval_cfg.input = Some(prep.test_path.clone());
        let mlp_improved = cmd_eval(&eval_cfg, &trained.model_path)
            .expect("mlp improved eval")
            .report;

        Shared {
            synth_csv: synth.csv_path,
            manifest_path: synth.manifest_path,
            gbdt_runs,
            mlp_baseline,
            mlp_improved,
        }
    })
}

// ---------------------------------------------------------------------
// Criterion 1: loss identity suite
// ---------------------------------------------------------------------

#[test]
fn criterion_1_loss_identity() {
    let started = Instant::now();
    let cfg = LossConfig::new(30.0, 10.0, 0.5).unwrap();
    let mut rng = greencast::seed::rng_for(0xacc1, "criterion1");
    for _ in 0..10_000 {
        let y: f64 = rng.random_range(-5.0..45.0);
        let y_hat: f64 = rng.random_range(-5.0..45.0);
        let r = y - y_hat;
        let expect = match cfg.band_of(y) {
            Band::Normal => r * r,
            _ => 0.5 * r * r,
        };
        let got = sample_loss(y_hat, y, &cfg).unwrap();
        assert!(
            (got - expect).abs() <= 1e-12 * expect.max(1.0),
            "y={y} y_hat={y_hat}: {got} vs {expect}"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    println!("ACCEPTANCE criterion 1 (loss identity suite): PASS ({elapsed:?})");
}

// ---------------------------------------------------------------------
// Criterion 2: gradient oracle (loss + full MLP parameter vector)
// ---------------------------------------------------------------------

#[test]
fn criterion_2_gradient_oracle() {
    let started = Instant::now();

    // Per-sample loss derivatives vs central differences.
    let mut rng = greencast::seed::rng_for(0xacc2, "criterion2");
    let eps = 1e-5;
    let mut checked = 0;
    while checked < 10_000 {
        let y: f64 = rng.random_range(-5.0..45.0);
        let y_hat: f64 = rng.random_range(-5.0..45.0);
        if (y - y_hat).abs() <= 1e-3 {
            continue;
        }
        let a = rng.random_range(0.05..0.95);
        let cfg = LossConfig::new(30.0, 10.0, a)
            .unwrap()
            .with_weights(rng.random_range(0.5..16.0), rng.random_range(0.5..16.0))
            .unwrap();
        let gh = sample_grad_hess(y_hat, y, &cfg).unwrap();
        let fd = (sample_loss(y_hat + eps, y, &cfg).unwrap()
            - sample_loss(y_hat - eps, y, &cfg).unwrap())
            / (2.0 * eps);
        let denom = gh.grad.abs().max(fd.abs()).max(1e-9);
        assert!(
            ((fd - gh.grad) / denom).abs() < 1e-6,
            "loss gradient: fd={fd} analytic={}",
            gh.grad
        );
        checked += 1;
    }

    // Full-parameter MLP gradient check on a 5-sample batch.
    let t0 = chrono::NaiveDate::from_ymd_opt(2018, 7, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let batch: Vec<greencast::pipeline::WindowSample> = [35.0, 5.0, 20.0, 33.0, 8.0]
        .iter()
        .enumerate()
        .map(|(i, &target)| greencast::pipeline::WindowSample {
            features: (0..120).map(|_| rng.random_range(-2.0..2.0)).collect(),
            target,
            target_time: t0 + chrono::TimeDelta::seconds(600 * i as i64),
        })
        .collect();
    let loss_cfg = LossConfig::new(30.0, 10.0, 0.9)
        .unwrap()
        .with_weights(6.0, 4.0)
        .unwrap();
    for objective in [
        Box::new(SquaredError) as Box<dyn Objective>,
        Box::new(ImprovedLoss::new(loss_cfg.clone()).unwrap()),
    ] {
        let params = MlpParams {
            epochs: 0,
            seed: 9,
            ..MlpParams::default()
        };
        let mut model = mlp::train(&batch, objective.as_ref(), &params, &loss_cfg)
            .unwrap()
            .model;
        let (_, analytic) = model.batch_gradient(&batch, objective.as_ref()).unwrap();
        let theta = model.flatten_parameters();
        let mut worst: f64 = 0.0;
        for k in 0..theta.len() {
            let mut plus = theta.clone();
            plus[k] += eps;
            model.assign_parameters(&plus).unwrap();
            let lp = model.batch_loss(&batch, objective.as_ref()).unwrap();
            let mut minus = theta.clone();
            minus[k] -= eps;
            model.assign_parameters(&minus).unwrap();
            let lm = model.batch_loss(&batch, objective.as_ref()).unwrap();
            let fd = (lp - lm) / (2.0 * eps);
            let denom = analytic[k].abs().max(fd.abs()).max(1e-6);
            worst = worst.max((fd - analytic[k]).abs() / denom);
        }
        assert!(
            worst < 1e-4,
            "{}: max relative error {worst}",
            objective.name()
        );
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30 s");
    println!("ACCEPTANCE criterion 2 (gradient oracle): PASS ({elapsed:?})");
}

// ---------------------------------------------------------------------
// Criterion 3: weight formula
// ---------------------------------------------------------------------

#[test]
fn criterion_3_weight_formula() {
    let cfg = LossConfig::default();

    let mut targets = vec![20.0; 80];
    targets.extend(vec![35.0; 10]);
    targets.extend(vec![5.0; 10]);
    assert_eq!(compute_extreme_weights(&targets, &cfg).unwrap(), (8.0, 8.0));

    let mut targets = vec![20.0; 75];
    targets.extend(vec![35.0; 20]);
    targets.extend(vec![5.0; 5]);
    assert_eq!(
        compute_extreme_weights(&targets, &cfg).unwrap(),
        (75.0 / 20.0, 15.0)
    );

    let mut targets = vec![20.0; 90];
    targets.extend(vec![5.0; 10]);
    assert_eq!(
        compute_extreme_weights(&targets, &cfg),
        Err(LossError::EmptyBand(Band::High))
    );
    let mut targets = vec![20.0; 90];
    targets.extend(vec![35.0; 10]);
    assert_eq!(
        compute_extreme_weights(&targets, &cfg),
        Err(LossError::EmptyBand(Band::Low))
    );

    println!("ACCEPTANCE criterion 3 (weight formula): PASS");
}

// ---------------------------------------------------------------------
// Criterion 4: GBDT split oracle
// ---------------------------------------------------------------------

#[test]
fn criterion_4_gbdt_split_oracle() {
    let started = Instant::now();
    let mut rng = greencast::seed::rng_for(0xacc4, "criterion4");
    let squared = SquaredError;
    let improved = ImprovedLoss::new(
        LossConfig::new(30.0, 10.0, 0.9)
            .unwrap()
            .with_weights(5.0, 3.0)
            .unwrap(),
    )
    .unwrap();

    let check = |rows: &[(Vec<f64>, f64)], objective: &dyn Objective, lambda: f64| {
        let samples = samples_from_rows(rows);
        let params = GbdtParams {
            n_rounds: 1,
            learning_rate: 1.0,
            max_depth: 1,
            min_samples_leaf: 1,
            lambda_l2: lambda,
            max_bins: 256,
        };
        let out = gbdt::train(&samples, objective, &params, &LossConfig::default()).unwrap();

        let base = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
        let (grad, hess): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .map(|(_, y)| {
                let gh = objective.grad_hess(base, *y);
                (gh.grad, gh.hess)
            })
            .unzip();
        let features: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
        let oracle = exhaustive_best_split(&features, &grad, &hess, lambda, 1);

        match (&out.model.trees[0].nodes[0], oracle) {
            (TreeNode::Leaf { .. }, None) => {}
            (TreeNode::Split { feature, threshold, .. }, Some(o)) => {
                assert_eq!(*feature, o.feature, "feature disagrees on {rows:?}");
                let left: Vec<usize> = (0..rows.len())
                    .filter(|&i| rows[i].0[*feature] <= *threshold)
                    .collect();
                assert_eq!(left, o.left, "partition disagrees on {rows:?}");
            }
            (node, oracle) => panic!("trainer {node:?} vs oracle {oracle:?} on {rows:?}"),
        }
    };

    for n in 2..=8usize {
        for d in 1..=3usize {
            for trial in 0..25 {
                let coarse = trial % 2 == 0;
                let rows: Vec<(Vec<f64>, f64)> = (0..n)
                    .map(|_| {
                        let fs: Vec<f64> = (0..d)
                            .map(|_| {
                                if coarse {
                                    rng.random_range(0..4) as f64
                                } else {
                                    rng.random_range(-3.0..3.0)
                                }
                            })
                            .collect();
                        (fs, rng.random_range(0.0..40.0))
                    })
                    .collect();
                for lambda in [0.0, 1.0] {
                    check(&rows, &squared, lambda);
                    check(&rows, &improved, lambda);
                }
            }
        }
    }
    // Engineered ties and degenerate shapes.
    check(&[(vec![1.0], 1.0), (vec![1.0], 2.0)], &squared, 1.0);
    check(
        &[
            (vec![0.0, 0.0], 1.0),
            (vec![0.0, 0.0], 1.5),
            (vec![1.0, 1.0], 3.0),
            (vec![1.0, 1.0], 3.5),
        ],
        &squared,
        0.0,
    );
    check(
        &[
            (vec![3.0, 3.0, 3.0], 7.0),
            (vec![3.0, 3.0, 3.0], 7.0),
            (vec![3.0, 3.0, 3.0], 7.0),
        ],
        &squared,
        1.0,
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    println!("ACCEPTANCE criterion 4 (GBDT split oracle): PASS ({elapsed:?})");
}

// ---------------------------------------------------------------------
// Criterion 5: pipeline exactness
// ---------------------------------------------------------------------

#[test]
fn criterion_5_pipeline_exactness() {
    // Hand-computed bucket means.
    let t0 = chrono::NaiveDate::from_ymd_opt(2018, 6, 17)
        .unwrap()
        .and_hms_opt(10, 0, 0)
        .unwrap();
    let rec = |offset_min: i64, temp: f64| greencast::pipeline::EnvRecord {
        timestamp: t0 + chrono::TimeDelta::minutes(offset_min),
        temperature: temp,
        humidity: 60.0,
        pressure: 998.0,
        illumination: 500.0,
        co2: 600.0,
    };
    let records = vec![rec(0, 20.0), rec(3, 21.0), rec(7, 22.0), rec(12, 30.0), rec(14, 31.0)];
    let out = aggregate(&records, AGGREGATE_INTERVAL_SECS);
    assert_eq!(out.len(), 2);
    assert!((out[0].temperature - 21.0).abs() <= 1e-9 * 21.0);
    assert!((out[1].temperature - 30.5).abs() <= 1e-9 * 30.5);

    // A contiguous run of L steps yields L - 47 windows.
    for len in [48usize, 49, 100, 200] {
        let steps: Vec<greencast::pipeline::EnvRecord> = (0..len)
            .map(|i| {
                greencast::pipeline::EnvRecord {
                    timestamp: t0 + chrono::TimeDelta::seconds(600 * i as i64),
                    temperature: 20.0 + (i % 9) as f64,
                    humidity: 60.0,
                    pressure: 998.0,
                    illumination: 500.0,
                    co2: 600.0,
                }
            })
            .collect();
        assert_eq!(build_windows(&steps, 600).len(), len - 47);
    }

    // Cleaning removes exactly the manifest-labeled anomalies from the
    // shared 14-month synthetic dataset (file surfaces included).
    let shared = shared();
    let file = std::fs::File::open(&shared.synth_csv).unwrap();
    let (records, issues) = ingest_csv(std::io::BufReader::new(file)).unwrap();
    assert!(issues.is_empty());
    let manifest: greencast::synth::SynthManifest =
        serde_json::from_str(&std::fs::read_to_string(&shared.manifest_path).unwrap()).unwrap();

    let (kept, report) = clean(&records, &CleanParams::default());
    assert_eq!(report.outliers_removed, manifest.outliers.len());
    assert_eq!(report.short_segment_records_removed, 0);
    assert_eq!(report.duplicate_timestamps_removed, 0);
    let kept_times: std::collections::BTreeSet<_> = kept.iter().map(|r| r.timestamp).collect();
    let removed: std::collections::BTreeSet<_> = records
        .iter()
        .map(|r| r.timestamp)
        .filter(|t| !kept_times.contains(t))
        .collect();
    let labeled: std::collections::BTreeSet<_> =
        manifest.outliers.iter().map(|o| o.timestamp).collect();
    assert_eq!(removed, labeled);

    println!("ACCEPTANCE criterion 5 (pipeline exactness): PASS");
}

// ---------------------------------------------------------------------
// Criterion 6: directional reproduction of the test-set comparison
// ---------------------------------------------------------------------

fn check_direction(label: &str, baseline: &EvalReport, improved: &EvalReport) {
    let recall_base = baseline.recall_combined.expect("baseline recall");
    let recall_improved = improved.recall_combined.expect("improved recall");
    assert!(
        recall_improved >= recall_base,
        "{label}: recall {recall_improved} < baseline {recall_base}"
    );

    let mae_ext_base = baseline.mae_extreme.expect("baseline extreme MAE");
    let mae_ext_improved = improved.mae_extreme.expect("improved extreme MAE");
    assert!(
        mae_ext_improved <= 1.05 * mae_ext_base,
        "{label}: extreme MAE rose over 5%: {mae_ext_base} -> {mae_ext_improved}"
    );

    let mae_high_base = baseline.mae_high.expect("baseline high MAE");
    let mae_high_improved = improved.mae_high.expect("improved high MAE");
    assert!(
        mae_high_improved < mae_high_base,
        "{label}: high-band MAE did not decrease: {mae_high_base} -> {mae_high_improved}"
    );
}

#[test]
fn criterion_6_directional_recall_and_mae() {
    let started = Instant::now();
    let shared = shared();

    let baseline = &shared
        .gbdt_runs
        .iter()
        .find(|(label, _, _)| label == "baseline")
        .expect("gbdt baseline run")
        .2;
    let improved = &shared
        .gbdt_runs
        .iter()
        .find(|(_, a, _)| *a == Some(0.9))
        .expect("gbdt a=0.9 run")
        .2;
    check_direction("gbdt", baseline, improved);
    check_direction("mlp", &shared.mlp_baseline, &shared.mlp_improved);

    let elapsed = started.elapsed();
    // Budget covers the shared synth + preprocess + trainings when this
    // test is the one that built them.
    assert!(elapsed.as_secs_f64() < 600.0, "took {elapsed:?}, budget 10 min");
    println!(
        "ACCEPTANCE criterion 6 (directional recall/MAE, gbdt {:.3}->{:.3}, mlp {:.3}->{:.3}): PASS ({elapsed:?})",
        baseline.recall_combined.unwrap(),
        improved.recall_combined.unwrap(),
        shared.mlp_baseline.recall_combined.unwrap(),
        shared.mlp_improved.recall_combined.unwrap(),
    );
}

// ---------------------------------------------------------------------
// Criterion 7: directional reproduction of the bias sweep
// ---------------------------------------------------------------------

#[test]
fn criterion_7_directional_bias_sweep() {
    let shared = shared();
    let order: [Option<f64>; 4] = [None, Some(0.5), Some(0.7), Some(0.9)];
    let series: Vec<&EvalReport> = order
        .iter()
        .map(|want_a| {
            &shared
                .gbdt_runs
                .iter()
                .find(|(label, a, _)| {
                    if want_a.is_none() {
                        label == "baseline"
                    } else {
                        a == want_a
                    }
                })
                .expect("sweep run present")
                .2
        })
        .collect();

    let tolerance = 0.05;
    for (name, pick) in [
        ("bias_high", (|r: &EvalReport| r.bias_high) as fn(&EvalReport) -> Option<f64>),
        ("bias_low", |r: &EvalReport| r.bias_low),
    ] {
        let magnitudes: Vec<f64> = series
            .iter()
            .map(|r| pick(r).expect("bias present").abs())
            .collect();
        for step in magnitudes.windows(2) {
            assert!(
                step[1] <= step[0] + tolerance,
                "{name} magnitudes not non-increasing: {magnitudes:?}"
            );
        }
        println!("  {name} magnitudes along baseline,0.5,0.7,0.9: {magnitudes:?}");
    }

    println!("ACCEPTANCE criterion 7 (directional bias sweep): PASS");
}

// ---------------------------------------------------------------------
// Criterion 8: byte-identical end-to-end determinism
// ---------------------------------------------------------------------

fn run_binary(args: &[&str]) {
    let exe = env!("CARGO_BIN_EXE_greencast");
    let status = std::process::Command::new(exe)
        .args(args)
        .stdout(std::process::Stdio::null())
        .status()
        .expect("spawn greencast");
    assert!(status.success(), "greencast {args:?} failed: {status}");
}

/// One complete pipeline: synth -> preprocess -> train both models ->
/// eval both -> sweep. Returns all produced files, relative to `root`.
fn end_to_end(root: &Path, config: &Path) -> Vec<(String, Vec<u8>)> {
    let data = root.join("data");
    let prep = root.join("prep");
    let models = root.join("models");
    let sweep = root.join("sweep");
    let s = |p: &Path| p.to_str().unwrap().to_string();

    run_binary(&["synth", "--config", &s(config), "--out", &s(&data), "--seed", "4242"]);
    run_binary(&[
        "preprocess",
        "--config",
        &s(config),
        "--input",
        &s(&data.join("synthetic.csv")),
        "--out",
        &s(&prep),
    ]);
    for model in ["gbdt", "mlp"] {
        run_binary(&[
            "train",
            "--config",
            &s(config),
            "--input",
            &s(&prep.join("train.csv")),
            "--out",
            &s(&models),
            "--model",
            model,
            "--a",
            "0.9",
            "--seed",
            "4242",
        ]);
        run_binary(&[
            "eval",
            "--config",
            &s(config),
            "--input",
            &s(&prep.join("test.csv")),
            "--out",
            &s(&models),
            "--model-file",
            &s(&models.join(format!("model_{model}_improved_a0.9.json"))),
        ]);
    }
    run_binary(&[
        "sweep-a",
        "--config",
        &s(config),
        "--input",
        &s(&prep.join("train.csv")),
        "--test",
        &s(&prep.join("test.csv")),
        "--out",
        &s(&sweep),
        "--seed",
        "4242",
    ]);

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    for dir in [&data, &prep, &models, &sweep] {
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for path in entries {
            let rel = path.strip_prefix(root).unwrap().to_str().unwrap().to_string();
            files.push((rel, std::fs::read(&path).unwrap()));
        }
    }
    files
}

#[test]
fn criterion_8_end_to_end_determinism() {
    let started = Instant::now();
    let root = std::env::temp_dir().join(format!("greencast-determinism-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).unwrap();

    // Desk-scale shoulder-season window so training stays light while both
    // extreme bands are populated.
    let config = root.join("run.conf");
    std::fs::write(
        &config,
        "synth_start = 2018-07-15\n\
         synth_end = 2018-11-15\n\
         test_months = 2018-08\n\
         gbdt_rounds = 25\n\
         mlp_epochs = 10\n\
         sweep_a = 0.5,0.9\n",
    )
    .unwrap();

    let first = end_to_end(&root.join("run1"), &config);
    let second = end_to_end(&root.join("run2"), &config);

    assert_eq!(first.len(), second.len(), "file sets differ");
    assert!(first.iter().any(|(name, _)| name.contains("model_gbdt")));
    assert!(first.iter().any(|(name, _)| name.contains("model_mlp")));
    for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(&second) {
        assert_eq!(name_a, name_b, "file names diverge");
        assert_eq!(
            bytes_a, bytes_b,
            "{name_a} differs between identically-seeded runs"
        );
    }

    let elapsed = started.elapsed();
    println!(
        "ACCEPTANCE criterion 8 (end-to-end determinism, {} files byte-identical): PASS ({elapsed:?})",
        first.len()
    );
}
