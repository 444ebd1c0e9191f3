//! CSV ingestion of the raw sensor schema and round-tripping of windowed
//! datasets.
//!
//! Raw schema: header `Time,Temperature,Humidity,Pressure,Illumination,CO2`
//! with `Time` formatted `YYYY/MM/DD HH:MM:SS`. Unit suffixes in header
//! cells (e.g. `Temperature(C)`) are tolerated. Malformed data rows are
//! collected as per-line issues instead of aborting the ingest; a missing
//! or wrong header is a hard error.

use std::io::{Read, Write};


use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{EnvRecord, PipelineError, WindowSample, FEATURE_LEN};

pub const RAW_TIME_FORMAT: &str = "%Y/%m/%d %H:%M:%S";
const ISO_TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
const RAW_COLUMNS: [&str; 6] = [
    "time",
    "temperature",
    "humidity",
    "pressure",
    "illumination",
    "co2",
];

/// One malformed (or otherwise noteworthy) input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowIssue {
    /// 1-based line number in the input; 0 for file-level notes.
    pub line: u64,
    pub message: String,
}

fn normalize_header_cell(cell: &str) -> String {
    let cell = cell.trim();
    let cell = cell.split('(').next().unwrap_or(cell);
    cell.trim().to_ascii_lowercase()
}

fn parse_finite(field: &str, name: &str, line: u64) -> Result<f64, RowIssue> {
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(RowIssue {
            line,
            message: format!("{name} is not finite: {v}"),
        }),
        Err(_) => Err(RowIssue {
            line,
            message: format!("{name} is not a number: {field:?}"),
        }),
    }
}

/// Parse raw sensor records. Returns the records in file order plus one
/// issue per malformed row; fails hard only when the header is missing.
pub fn ingest_csv<R: Read>(input: R) -> Result<(Vec<EnvRecord>, Vec<RowIssue>), PipelineError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);

    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        // A zero-byte or whitespace-only file: vacuous, not malformed.
        return Ok((
            Vec::new(),
            vec![RowIssue {
                line: 0,
                message: "empty input: no header and no rows".to_string(),
            }],
        ));
    }
    let found: Vec<String> = headers.iter().map(normalize_header_cell).collect();
    if found != RAW_COLUMNS {
        return Err(PipelineError::MissingHeader {
            expected: RAW_COLUMNS.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut records = Vec::new();
    let mut issues = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        // Header occupies line 1; data starts at line 2.
        let fallback_line = idx as u64 + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(fallback_line, |p| p.line());
                issues.push(RowIssue {
                    line,
                    message: format!("unreadable row: {e}"),
                });
                continue;
            }
        };
        let line = row.position().map_or(fallback_line, |p| p.line());
        if row.len() != RAW_COLUMNS.len() {
            issues.push(RowIssue {
                line,
                message: format!("expected {} fields, found {}", RAW_COLUMNS.len(), row.len()),
            });
            continue;
        }
        let timestamp = match NaiveDateTime::parse_from_str(&row[0], RAW_TIME_FORMAT) {
            Ok(t) => t,
            Err(_) => {
                issues.push(RowIssue {
                    line,
                    message: format!("Time is not \"YYYY/MM/DD HH:MM:SS\": {:?}", &row[0]),
                });
                continue;
            }
        };
        let mut values = [0.0; 5];
        let mut bad = false;
        for (i, name) in RAW_COLUMNS.iter().skip(1).enumerate() {
            match parse_finite(&row[i + 1], name, line) {
                Ok(v) => values[i] = v,
                Err(issue) => {
                    issues.push(issue);
                    bad = true;
                    break;
                }
            }
        }
        if bad {
            continue;
        }
        records.push(EnvRecord {
            timestamp,
            temperature: values[0],
            humidity: values[1],
            pressure: values[2],
            illumination: values[3],
            co2: values[4],
        });
    }
    Ok((records, issues))
}

/// Write records in the raw sensor schema, with the sensor resolutions of
/// the source hardware (0.01 C temperature, 0.1 elsewhere).
pub fn write_records_csv<W: Write>(records: &[EnvRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "Time,Temperature,Humidity,Pressure,Illumination,CO2")?;
    for r in records {
        writeln!(
            out,
            "{},{:.2},{:.1},{:.1},{:.1},{:.1}",
            r.timestamp.format(RAW_TIME_FORMAT),
            r.temperature,
            r.humidity,
            r.pressure,
            r.illumination,
            r.co2
        )?;
    }
    Ok(())
}

fn feature_column(i: usize) -> String {
    format!("f{i:03}")
}

/// Write a windowed dataset: columns `f000..f119,target,target_time`.
pub fn write_windows_csv<W: Write>(samples: &[WindowSample], mut out: W) -> std::io::Result<()> {
    let n_features = samples.first().map_or(FEATURE_LEN, |s| s.features.len());
    let mut header: Vec<String> = (0..n_features).map(feature_column).collect();
    header.push("target".to_string());
    header.push("target_time".to_string());
    writeln!(out, "{}", header.join(","))?;
    for s in samples {
        debug_assert_eq!(s.features.len(), n_features);
        let mut line = String::with_capacity(n_features * 8);
        for v in &s.features {
            line.push_str(&v.to_string());
            line.push(',');
        }
        line.push_str(&s.target.to_string());
        line.push(',');
        line.push_str(&s.target_time.format(ISO_TIME_FORMAT).to_string());
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Read a dataset written by [`write_windows_csv`]. Strict: any malformed
/// row is an error, since these files are toolkit-produced.
pub fn read_windows_csv<R: Read>(input: R) -> Result<Vec<WindowSample>, PipelineError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let n = headers.len();
    if n < 3 || &headers[n - 2] != "target" || &headers[n - 1] != "target_time" {
        return Err(PipelineError::BadWindowHeader(format!(
            "expected f000..,target,target_time, found {} columns",
            n
        )));
    }
    let n_features = n - 2;
    for i in 0..n_features {
        if headers[i] != feature_column(i) {
            return Err(PipelineError::BadWindowHeader(format!(
                "column {} is {:?}, expected {:?}",
                i,
                &headers[i],
                feature_column(i)
            )));
        }
    }

    let mut samples = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row?;
        let line = row.position().map_or(idx as u64 + 2, |p| p.line());
        let bad = |message: String| PipelineError::BadWindowRow { line, message };
        if row.len() != n {
            return Err(bad(format!("expected {n} fields, found {}", row.len())));
        }
        let mut features = Vec::with_capacity(n_features);
        for i in 0..n_features {
            let v: f64 = row[i]
                .parse()
                .map_err(|_| bad(format!("feature {i} is not a number: {:?}", &row[i])))?;
            features.push(v);
        }
        let target: f64 = row[n - 2]
            .parse()
            .map_err(|_| bad(format!("target is not a number: {:?}", &row[n - 2])))?;
        let target_time = NaiveDateTime::parse_from_str(&row[n - 1], ISO_TIME_FORMAT)
            .map_err(|_| bad(format!("target_time is not ISO-8601: {:?}", &row[n - 1])))?;
        samples.push(WindowSample {
            features,
            target,
            target_time,
        });
    }
    Ok(samples)
}
