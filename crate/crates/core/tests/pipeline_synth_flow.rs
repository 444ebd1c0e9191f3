//! End-to-end preprocessing over generated data: cleaning must remove
//! exactly the labeled anomalies, aggregation must conserve bucket means,
//! and windowing must obey the run-length count formula.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use greencast::loss::LossConfig;
use greencast::pipeline::{
    aggregate, build_windows, clean, ingest_csv, split_by_month, write_records_csv, CleanParams,
    AGGREGATE_INTERVAL_SECS, INPUT_STEPS, LEAD_STEPS,
};
use greencast::synth::{generate, SynthConfig};

fn three_month_config() -> SynthConfig {
    SynthConfig {
        end: chrono::NaiveDate::from_ymd_opt(2018, 9, 17)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap(),
        ..SynthConfig::default()
    }
}

#[test]
fn cleaning_removes_exactly_the_injected_anomalies() {
    let (records, manifest) = generate(&three_month_config()).unwrap();
    let (kept, report) = clean(&records, &CleanParams::default());

    assert_eq!(report.outliers_removed, manifest.outliers.len());
    assert_eq!(report.duplicate_timestamps_removed, 0);
    assert_eq!(report.short_segment_records_removed, 0);

    let kept_times: BTreeSet<_> = kept.iter().map(|r| r.timestamp).collect();
    let removed: BTreeSet<_> = records
        .iter()
        .map(|r| r.timestamp)
        .filter(|t| !kept_times.contains(t))
        .collect();
    let labeled: BTreeSet<_> = manifest.outliers.iter().map(|o| o.timestamp).collect();
    assert_eq!(removed, labeled);
}

#[test]
fn aggregation_conserves_bucket_sums() {
    let (records, _) = generate(&three_month_config()).unwrap();
    let (kept, _) = clean(&records, &CleanParams::default());
    let aggregated = aggregate(&kept, AGGREGATE_INTERVAL_SECS);

    let mut buckets: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for r in &kept {
        let key = r.timestamp.and_utc().timestamp().div_euclid(AGGREGATE_INTERVAL_SECS)
            * AGGREGATE_INTERVAL_SECS;
        let e = buckets.entry(key).or_insert((0.0, 0));
        e.0 += r.temperature;
        e.1 += 1;
    }
    assert_eq!(aggregated.len(), buckets.len());
    for out in &aggregated {
        let key = out.timestamp.and_utc().timestamp();
        let (sum, count) = buckets[&key];
        let recon = out.temperature * count as f64;
        assert!(
            (recon - sum).abs() <= 1e-9 * sum.abs().max(1.0),
            "bucket {key}: {recon} vs {sum}"
        );
    }
}

#[test]
fn window_count_follows_run_length_formula() {
    let (records, _) = generate(&three_month_config()).unwrap();
    let (kept, _) = clean(&records, &CleanParams::default());
    let aggregated = aggregate(&kept, AGGREGATE_INTERVAL_SECS);
    let samples = build_windows(&aggregated, AGGREGATE_INTERVAL_SECS);

    let total = INPUT_STEPS + LEAD_STEPS;
    let step = chrono::TimeDelta::seconds(AGGREGATE_INTERVAL_SECS);
    let mut expected = 0usize;
    let mut run_len = 1usize;
    for w in aggregated.windows(2) {
        if w[1].timestamp - w[0].timestamp == step {
            run_len += 1;
        } else {
            expected += run_len.saturating_sub(total - 1) * usize::from(run_len >= total);
            run_len = 1;
        }
    }
    expected += run_len.saturating_sub(total - 1) * usize::from(run_len >= total);
    assert_eq!(samples.len(), expected);
    assert!(!samples.is_empty());

    // Targets always sit one lead horizon past the window end.
    for s in samples.iter().step_by(997) {
        assert_eq!(s.features.len(), greencast::pipeline::FEATURE_LEN);
    }
}

#[test]
fn csv_round_trip_then_split_partitions_cleanly() {
    let (records, _) = generate(&three_month_config()).unwrap();

    let mut buf = Vec::new();
    write_records_csv(&records, &mut buf).unwrap();
    let (ingested, issues) = ingest_csv(&buf[..]).unwrap();
    assert!(issues.is_empty());
    assert_eq!(ingested.len(), records.len());
    // Values survive at sensor resolution.
    for (a, b) in records.iter().zip(&ingested).step_by(487) {
        assert_eq!(a.timestamp, b.timestamp);
        assert!((a.temperature - b.temperature).abs() <= 0.005 + 1e-9);
    }

    let (kept, _) = clean(&ingested, &CleanParams::default());
    let aggregated = aggregate(&kept, AGGREGATE_INTERVAL_SECS);
    let samples = build_windows(&aggregated, AGGREGATE_INTERVAL_SECS);
    let cfg = LossConfig::default();
    let split = split_by_month(&samples, &[(2018, 8)], &cfg).unwrap();

    assert_eq!(split.train.len() + split.test.len(), samples.len());
    let test_times: BTreeSet<_> = split.test.iter().map(|s| s.target_time).collect();
    assert!(split.train.iter().all(|s| !test_times.contains(&s.target_time)));
    let (n_low, n_normal, n_high) = split.band_counts_train;
    assert_eq!(n_low + n_normal + n_high, split.train.len());
}
