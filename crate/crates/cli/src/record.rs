//! Run records and their flat-file forms.
//!
//! `results.csv` columns (schema version 1):
//! `task,sample,suite,metric,label,value,pass`. `sample` is empty for rows that
//! aggregate over samples; `pass` is empty for plain measurements.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::RunError;

pub const SCHEMA_VERSION: u32 = 1;
pub const NO_CHECKS_MARKER: &str = "no checks executed";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub task: &'static str,
    pub sample: Option<usize>,
    pub suite: String,
    pub metric: String,
    pub label: String,
    pub value: f64,
    pub pass: Option<bool>,
}

/// Row collector for one sample (or for the aggregate rows when `sample` is `None`).
#[derive(Debug)]
pub struct Sink {
    task: &'static str,
    sample: Option<usize>,
    pub rows: Vec<Row>,
}

impl Sink {
    pub fn new(task: &'static str, sample: Option<usize>) -> Self {
        Sink {
            task,
            sample,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, suite: &str, metric: &str, label: String, value: f64, pass: Option<bool>) {
        self.rows.push(Row {
            task: self.task,
            sample: self.sample,
            suite: suite.into(),
            metric: metric.into(),
            label,
            value,
            pass,
        });
    }

    pub fn value(&mut self, suite: &str, metric: &str, label: impl Into<String>, value: f64) {
        self.push(suite, metric, label.into(), value, None);
    }

    pub fn check(
        &mut self,
        suite: &str,
        metric: &str,
        label: impl Into<String>,
        value: f64,
        pass: bool,
    ) {
        self.push(suite, metric, label.into(), value, Some(pass));
    }
}

/// A plot-ready side table written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detail {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteVerdict {
    pub suite: String,
    pub checks: usize,
    pub failures: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub artifact_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub task: String,
    pub model: String,
    pub seed: u64,
    #[serde(skip)]
    pub rows: Vec<Row>,
    pub suites: Vec<SuiteVerdict>,
    #[serde(skip)]
    pub details: Vec<Detail>,
    /// Task-specific tables (multiplicity chains, tree statistics, scaling fits).
    pub tables: serde_json::Value,
    /// Interpretation notes carried into the summary.
    pub notes: Vec<String>,
}

/// Groups verdict rows by suite in order of first appearance.
pub fn suite_verdicts(rows: &[Row]) -> Vec<SuiteVerdict> {
    let mut out: Vec<SuiteVerdict> = Vec::new();
    for r in rows {
        let Some(pass) = r.pass else { continue };
        let idx = match out.iter().position(|s| s.suite == r.suite) {
            Some(i) => i,
            None => {
                out.push(SuiteVerdict {
                    suite: r.suite.clone(),
                    checks: 0,
                    failures: 0,
                    pass: true,
                });
                out.len() - 1
            }
        };
        out[idx].checks += 1;
        if !pass {
            out[idx].failures += 1;
            out[idx].pass = false;
        }
    }
    out
}

/// Fails on the first non-finite value.
pub fn check_finite(rows: &[Row]) -> Result<(), RunError> {
    match rows.iter().find(|r| !r.value.is_finite()) {
        Some(r) => Err(RunError::NonFinite(format!(
            "{}/{}/{} (sample {:?})",
            r.suite, r.metric, r.label, r.sample
        ))),
        None => Ok(()),
    }
}

fn csv_error(e: csv::Error) -> RunError {
    RunError::Output {
        path: "csv buffer".into(),
        message: e.to_string(),
    }
}

impl RunRecord {
    /// The `results.csv` bytes. Contains no timestamps, so equal runs give equal bytes.
    pub fn results_csv(&self) -> Result<Vec<u8>, RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "task", "sample", "suite", "metric", "label", "value", "pass",
        ])
        .map_err(csv_error)?;
        for r in &self.rows {
            w.write_record([
                r.task.to_string(),
                r.sample.map(|s| s.to_string()).unwrap_or_default(),
                r.suite.clone(),
                r.metric.clone(),
                r.label.clone(),
                format!("{:e}", r.value),
                r.pass.map(|p| p.to_string()).unwrap_or_default(),
            ])
            .map_err(csv_error)?;
        }
        w.into_inner().map_err(|e| RunError::Output {
            path: "csv buffer".into(),
            message: e.to_string(),
        })
    }

    pub fn detail_csv(detail: &Detail) -> Result<Vec<u8>, RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&detail.header).map_err(csv_error)?;
        for row in &detail.rows {
            w.write_record(row).map_err(csv_error)?;
        }
        w.into_inner().map_err(|e| RunError::Output {
            path: detail.name.clone(),
            message: e.to_string(),
        })
    }

    pub fn checks(&self) -> usize {
        self.suites.iter().map(|s| s.checks).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub records: Vec<RunRecord>,
    pub suites: Vec<SuiteVerdict>,
    pub checks: usize,
    pub failures: usize,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marker: Option<String>,
}

impl Summary {
    /// 0 when every check passed, 1 on any failure or when nothing was checked.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

/// Aggregates verdicts over records. With no verdicts at all the summary
/// carries [`NO_CHECKS_MARKER`] and does not pass.
pub fn report(records: &[RunRecord]) -> Summary {
    let mut suites: Vec<SuiteVerdict> = Vec::new();
    for rec in records {
        for s in &rec.suites {
            match suites.iter_mut().find(|x| x.suite == s.suite) {
                Some(x) => {
                    x.checks += s.checks;
                    x.failures += s.failures;
                    x.pass &= s.pass;
                }
                None => suites.push(s.clone()),
            }
        }
    }
    let checks: usize = suites.iter().map(|s| s.checks).sum();
    let failures: usize = suites.iter().map(|s| s.failures).sum();
    Summary {
        schema_version: SCHEMA_VERSION,
        records: records.to_vec(),
        pass: checks > 0 && failures == 0,
        marker: (checks == 0).then(|| NO_CHECKS_MARKER.to_string()),
        suites,
        checks,
        failures,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    fs::write(path, bytes).map_err(|e| RunError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Writes `results.csv`, `summary.json` and every detail table into `dir`.
pub fn write_outputs(record: &RunRecord, summary: &Summary, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::Output {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    write_file(&dir.join("results.csv"), &record.results_csv()?)?;
    let json = serde_json::to_string_pretty(summary).expect("summary serialises");
    write_file(&dir.join("summary.json"), json.as_bytes())?;
    for d in &record.details {
        write_file(
            &dir.join(format!("{}.csv", d.name)),
            &RunRecord::detail_csv(d)?,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(rows: Vec<Row>) -> RunRecord {
        RunRecord {
            config_hash: String::new(),
            artifact_version: String::new(),
            started_unix: 0,
            finished_unix: 0,
            task: "green".into(),
            model: "m".into(),
            seed: 0,
            suites: suite_verdicts(&rows),
            rows,
            details: vec![],
            tables: serde_json::Value::Null,
            notes: vec![],
        }
    }

    #[test]
    fn empty_verdict_set_is_marked() {
        let mut s = Sink::new("green", Some(0));
        s.value("x", "y", "", 1.0);
        let summary = report(&[record(s.rows)]);
        assert_eq!(summary.marker.as_deref(), Some(NO_CHECKS_MARKER));
        assert_ne!(summary.exit_code(), 0);
    }

    #[test]
    fn failures_are_counted() {
        let mut s = Sink::new("green", Some(0));
        s.check("a", "m", "", 1.0, true);
        s.check("a", "m", "", 2.0, false);
        s.check("b", "m", "", 3.0, true);
        let v = suite_verdicts(&s.rows);
        assert_eq!(v.len(), 2);
        assert_eq!((v[0].checks, v[0].failures, v[0].pass), (2, 1, false));
        assert_eq!(report(&[record(s.rows)]).exit_code(), 1);
    }

    #[test]
    fn non_finite_rows_rejected() {
        let mut s = Sink::new("green", None);
        s.value("a", "m", "", f64::NAN);
        assert!(matches!(check_finite(&s.rows), Err(RunError::NonFinite(_))));
    }
}
