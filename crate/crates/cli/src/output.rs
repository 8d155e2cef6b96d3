//! Report output: JSON on stdout, or a file whose extension picks JSON or CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use qlll::experiments::{
    BoundsReport, CommutativityReport, ConditionSummary, EnumerationReport, ExperimentReport,
    GapReport,
};

/// A report that can also be written as a flat table.
pub trait Tabular {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

impl Tabular for ExperimentReport<f64> {
    fn header(&self) -> Vec<&'static str> {
        vec![
            "trial",
            "terminal",
            "success",
            "resamples",
            "channel_uses",
            "attempts",
            "residual_energy",
            "ground_overlap",
            "log",
        ]
    }

    /// One row per trial, then a `mean` row whose numeric columns are the column
    /// means of the trial rows.
    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.trial.to_string(),
                    r.terminal.to_string(),
                    u8::from(r.terminal == qlll::solver::Terminal::Success).to_string(),
                    r.resamples.to_string(),
                    r.channel_uses.to_string(),
                    r.attempts.to_string(),
                    num(r.residual_energy),
                    num(r.ground_overlap),
                    r.log.to_string(),
                ]
            })
            .collect();
        let a = &self.aggregates;
        let attempts = self.rows.iter().map(|r| r.attempts as f64).sum::<f64>()
            / self.rows.len().max(1) as f64;
        rows.push(vec![
            "mean".into(),
            String::new(),
            num(a.success_rate),
            num(a.mean_resamples),
            num(a.mean_channel_uses),
            num(attempts),
            num(a.mean_residual_energy),
            num(a.mean_ground_overlap),
            String::new(),
        ]);
        rows
    }
}

impl Tabular for ConditionSummary<f64> {
    fn header(&self) -> Vec<&'static str> {
        vec!["condition", "satisfied", "violations"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.reports
            .iter()
            .map(|r| {
                let violations = r
                    .violations
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(";");
                vec![r.condition.to_string(), r.satisfied.to_string(), violations]
            })
            .collect()
    }
}

impl Tabular for GapReport<f64> {
    fn header(&self) -> Vec<&'static str> {
        vec!["subset", "gap"]
    }

    /// Rows for the listed subsets, then `uniform` and `full`.
    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows: Vec<Vec<String>> = self
            .subsets
            .iter()
            .map(|s| vec![format!("{{{}}}", s.flaws.join(";")), num(s.gap)])
            .collect();
        rows.push(vec!["uniform".into(), opt(self.uniform_gap)]);
        rows.push(vec!["full".into(), num(self.full_gap)]);
        rows
    }
}

impl Tabular for BoundsReport<f64> {
    fn header(&self) -> Vec<&'static str> {
        vec![
            "condition",
            "resampling_bound",
            "n_scaled",
            "path_estimate",
            "t",
            "tail_size",
            "certified_tail",
            "tail_holds",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.tails
            .iter()
            .map(|t| {
                vec![
                    self.condition.condition.to_string(),
                    num(self.resampling_bound),
                    num(self.n_scaled),
                    num(self.path_estimate),
                    num(t.t),
                    num(t.size),
                    opt(t.certified_tail),
                    t.holds.map(|h| h.to_string()).unwrap_or_default(),
                ]
            })
            .collect()
    }
}

impl Tabular for EnumerationReport<f64> {
    fn header(&self) -> Vec<&'static str> {
        vec![
            "channel",
            "max_resamples",
            "nodes",
            "root_violation",
            "worst_violation",
            "violations",
            "worst_error_excess",
            "error_violations",
            "success_mass",
            "error_mass",
            "frontier_mass",
            "expected_resamplings_truncated",
            "passes",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        vec![vec![
            self.channel.name().to_string(),
            self.max_resamples.to_string(),
            self.nodes.to_string(),
            num(self.root_violation),
            num(self.worst_violation),
            self.violations.len().to_string(),
            num(self.worst_error_excess),
            self.error_violations.len().to_string(),
            num(self.success_mass),
            num(self.error_mass),
            num(self.frontier_mass),
            num(self.expected_resamplings_truncated),
            self.passes.to_string(),
        ]]
    }
}

impl Tabular for CommutativityReport<f64> {
    fn header(&self) -> Vec<&'static str> {
        vec!["a", "b", "basis_state", "distance"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        vec![vec![
            self.a.clone(),
            self.b.clone(),
            self.basis_state.clone().unwrap_or_default(),
            num(self.distance),
        ]]
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn to_csv<T: Tabular>(report: &T) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(report.header())?;
    for row in report.rows() {
        writer.write_record(row)?;
    }
    Ok(writer.into_inner()?)
}

/// Writes `report` to `out` (CSV for a `.csv` extension, JSON otherwise) or as
/// JSON to stdout.
pub fn emit<T: Serialize + Tabular>(report: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let bytes = if is_csv(path) {
                to_csv(report)?
            } else {
                let mut json = serde_json::to_vec_pretty(report)?;
                json.push(b'\n');
                json
            };
            fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, report)?;
            writeln!(stdout)?;
            Ok(())
        }
    }
}

/// Instance files are always JSON.
pub fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    match out {
        Some(path) if is_csv(path) => bail!("instances are written as JSON, not CSV"),
        Some(path) => fs::write(path, json).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}
