//! Writing of per-rule tables and the run summary.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::OutputFormat;
use crate::rules::class_name;
use crate::runner::{Cell, RuleResult, ScenarioOutcome, Table, FIG1_BETA_SCALING};

/// Shortest round-trip representation of a float.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Num(v) => format_float(*v),
        Cell::Text(s) => s.clone(),
        Cell::Empty => String::new(),
    }
}

/// Serializes a table as UTF-8 CSV with a header row and LF line endings.
pub fn table_to_csv(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row.iter().map(cell_text))?;
    }
    w.into_inner().context("flushing CSV buffer")
}

fn table_to_json(table: &Table) -> serde_json::Value {
    let rows = table
        .rows
        .iter()
        .map(|row| {
            let obj = table
                .header
                .iter()
                .zip(row)
                .map(|(h, c)| {
                    let v = match c {
                        Cell::Num(v) if v.is_finite() => serde_json::json!(v),
                        Cell::Num(v) => serde_json::json!(format_float(*v)),
                        Cell::Text(s) => serde_json::json!(s),
                        Cell::Empty => serde_json::Value::Null,
                    };
                    (h.clone(), v)
                })
                .collect::<serde_json::Map<_, _>>();
            serde_json::Value::Object(obj)
        })
        .collect();
    serde_json::Value::Array(rows)
}

#[derive(Serialize)]
struct RuleSummary<'a> {
    rule: &'a str,
    class: &'static str,
    tolerance: f64,
    pass: bool,
    max_residual: Option<f64>,
    rows: usize,
    notes: &'a [String],
    files: Vec<String>,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    fig1: &'a [crate::runner::Fig1Block],
}

#[derive(Serialize)]
struct Summary<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    pass: bool,
    tol_scale: f64,
    tol_scale_applies_to: &'static str,
    workers: usize,
    wall_time_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fig1_beta_scaling: Option<&'static str>,
    checks: Vec<RuleSummary<'a>>,
}

/// Distinct file stem per rule: `rule`, then `rule_1`, `rule_2`, ... for repeats.
pub fn file_stems(results: &[RuleResult]) -> Vec<String> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    results
        .iter()
        .map(|r| {
            let n = seen.entry(r.rule.as_str()).or_insert(0);
            let stem = if *n == 0 { r.rule.clone() } else { format!("{}_{}", r.rule, n) };
            *n += 1;
            stem
        })
        .collect()
}

/// Writes every table and `summary.json` into `dir`; returns the summary path.
pub fn write_outputs(
    dir: &Path,
    command: &str,
    outcome: &ScenarioOutcome,
    formats: &[OutputFormat],
) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let stems = file_stems(&outcome.results);
    let mut checks = Vec::new();
    for (res, stem) in outcome.results.iter().zip(&stems) {
        let mut files = Vec::new();
        if !res.table.header.is_empty() {
            if formats.contains(&OutputFormat::Csv) {
                let name = format!("{stem}.csv");
                fs::write(dir.join(&name), table_to_csv(&res.table)?)
                    .with_context(|| format!("cannot write {name}"))?;
                files.push(name);
            }
            if formats.contains(&OutputFormat::Json) {
                let name = format!("{stem}.json");
                let mut text = serde_json::to_string_pretty(&table_to_json(&res.table))?;
                text.push('\n');
                fs::write(dir.join(&name), text).with_context(|| format!("cannot write {name}"))?;
                files.push(name);
            }
        }
        checks.push(RuleSummary {
            rule: &res.rule,
            class: class_name(res.class),
            tolerance: res.tolerance,
            pass: res.pass,
            max_residual: res.max_residual.is_finite().then_some(res.max_residual),
            rows: res.rows,
            notes: &res.notes,
            files,
            fig1: &res.fig1,
        });
    }
    let summary = Summary {
        tool: "qgauge",
        version: env!("CARGO_PKG_VERSION"),
        command,
        pass: outcome.pass,
        tol_scale: outcome.tol_scale,
        tol_scale_applies_to: "residual tolerances of exact rules and the fig1 cancellation; \
                               doubling ratios, derivative orders and normalization are unscaled",
        workers: outcome.workers,
        wall_time_seconds: outcome.wall_time_seconds,
        fig1_beta_scaling: outcome.results.iter().any(|r| r.rule == "fig1").then_some(FIG1_BETA_SCALING),
        checks,
    };
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Summary for a run that could not start, so a summary always exists.
pub fn write_error_summary(dir: &Path, command: &str, tol_scale: f64, error: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let value = serde_json::json!({
        "tool": "qgauge",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "pass": false,
        "tol_scale": tol_scale,
        "error": error,
        "checks": [],
    });
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    fs::write(dir.join("summary.json"), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e21, 0.0] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(0.1), "0.1");
    }

    #[test]
    fn csv_has_header_and_lf() {
        let table = Table {
            header: vec!["a".into(), "b".into()],
            rows: vec![vec![Cell::Num(0.5), Cell::Text("x,y".into())], vec![Cell::Empty, Cell::Num(-1.0)]],
        };
        let text = String::from_utf8(table_to_csv(&table).unwrap()).unwrap();
        assert_eq!(text, "a,b\n0.5,\"x,y\"\n,-1.0\n");
    }
}
