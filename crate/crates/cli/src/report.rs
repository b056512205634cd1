use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::artifacts::{ensure_dir, read_csv, write_csv};
use crate::error::CliError;
use crate::rom::{MetricRow, TimingRow, METRICS_HEADER, TIMING_HEADER};

/// Row of the plot-ready long table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LongRow {
    pub method: String,
    pub param: f64,
    pub time: f64,
    pub field: String,
    pub rel_l2_err: f64,
}

#[derive(serde::Deserialize)]
struct ErrorLine {
    param: f64,
    time: f64,
    field: String,
    rel_l2_err: f64,
}

/// Merges the `metrics.csv`, `timing.csv` and `errors/*.csv` of several `rom` output
/// directories into `out`. Overlapping keys are an error.
pub fn run(inputs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    if inputs.is_empty() {
        return Err(CliError::Config("report needs at least one rom output directory".into()));
    }
    let mut metrics: Vec<MetricRow> = Vec::new();
    let mut timing: Vec<TimingRow> = Vec::new();
    let mut long: Vec<LongRow> = Vec::new();
    for dir in inputs {
        let dir = rom_dir(dir);
        let path = dir.join("metrics.csv");
        let rows: Vec<MetricRow> = read_csv(&path, &METRICS_HEADER)?;
        let methods: BTreeSet<String> = rows.iter().map(|r| r.method.clone()).collect();
        metrics.extend(rows);
        let path = dir.join("timing.csv");
        if path.exists() {
            timing.extend(read_csv::<TimingRow>(&path, &TIMING_HEADER)?);
        }
        for method in methods {
            let path = dir.join("errors").join(format!("{}.csv", crate::artifacts::file_label(&method)));
            let lines: Vec<ErrorLine> = read_csv(&path, &["param", "time", "field", "rel_l2_err"])?;
            long.extend(lines.into_iter().map(|l| LongRow {
                method: method.clone(),
                param: l.param,
                time: l.time,
                field: l.field,
                rel_l2_err: l.rel_l2_err,
            }));
        }
    }

    metrics.sort_by(|a, b| key_cmp((&a.method, &a.param, &a.field), (&b.method, &b.param, &b.field)));
    if let Some(w) = metrics
        .windows(2)
        .find(|w| (&w[0].method, &w[0].param, &w[0].field) == (&w[1].method, &w[1].param, &w[1].field))
    {
        return Err(duplicate(format!("metrics ({}, {}, {})", w[0].method, w[0].param, w[0].field)));
    }
    timing.sort_by(|a, b| key_cmp((&a.method, &a.param, ""), (&b.method, &b.param, "")));
    if let Some(w) = timing.windows(2).find(|w| (&w[0].method, &w[0].param) == (&w[1].method, &w[1].param)) {
        return Err(duplicate(format!("timing ({}, {})", w[0].method, w[0].param)));
    }
    long.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.param.total_cmp(&b.param))
            .then(a.time.total_cmp(&b.time))
            .then(field_cmp(&a.field, &b.field))
    });
    if let Some(w) = long.windows(2).find(|w| {
        (&w[0].method, w[0].param, w[0].time, &w[0].field) == (&w[1].method, w[1].param, w[1].time, &w[1].field)
    }) {
        return Err(duplicate(format!("errors ({}, {}, {}, {})", w[0].method, w[0].param, w[0].time, w[0].field)));
    }

    ensure_dir(out)?;
    write_csv(&out.join("merged_metrics.csv"), &metrics)?;
    write_csv(&out.join("merged_timing.csv"), &timing)?;
    write_csv(&out.join("long.csv"), &long)
}

/// Accepts either an experiment directory or its `rom/` subdirectory.
fn rom_dir(dir: &Path) -> PathBuf {
    let nested = dir.join("rom");
    if !dir.join("metrics.csv").exists() && nested.join("metrics.csv").exists() {
        nested
    } else {
        dir.to_path_buf()
    }
}

fn duplicate(what: String) -> CliError {
    CliError::Config(format!("duplicate key in merged reports: {what}"))
}

/// Numeric parameters in increasing order, `all` last.
fn param_cmp(a: &str, b: &str) -> Ordering {
    let v = |s: &str| s.parse::<f64>().unwrap_or(f64::INFINITY);
    v(a).total_cmp(&v(b)).then(a.cmp(b))
}

/// `all` first, then field indices.
fn field_cmp(a: &str, b: &str) -> Ordering {
    let v = |s: &str| s.parse::<i64>().unwrap_or(-1);
    v(a).cmp(&v(b)).then(a.cmp(b))
}

fn key_cmp(a: (&String, &String, &str), b: (&String, &String, &str)) -> Ordering {
    a.0.cmp(b.0).then(param_cmp(a.1, b.1)).then(field_cmp(a.2, b.2))
}
