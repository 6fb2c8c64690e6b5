//! CSV and JSON artifacts.
//!
//! Numbers in CSV files use scientific notation with six significant digits.
//! Every CSV starts with `# key=value` lines holding the parameters that
//! produced it, so identical parameters give byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::basis::nodal_constants;
use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::lambda_scan::ScanResult;
use crate::timestepper::{Observer, Sample};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Six significant digits in scientific notation, e.g. `2.79686e-3`.
pub fn sci(x: f64) -> String {
    format!("{x:.5e}")
}

fn sci_opt(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_default()
}

/// Quotes a CSV field when it contains a delimiter, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Ordered parameter list embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new<K: Into<String>>(entries: impl IntoIterator<Item = (K, String)>) -> Self {
        let mut m = Manifest {
            entries: vec![("kgspline_version".to_string(), VERSION.to_string())],
        };
        m.entries
            .extend(entries.into_iter().map(|(k, v)| (k.into(), v)));
        m
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.entries.push((key.into(), value.into()));
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    fn comment_block(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "# {k}={v}");
        }
        s
    }

    fn as_map(&self) -> BTreeMap<&str, &str> {
        self.entries
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect()
    }
}

/// One row per sample time: `t, linf, E, P, C(E), C(P)`.
pub fn report_csv(report: &DiagnosticsReport, manifest: &Manifest) -> String {
    let mut s = manifest.comment_block();
    s.push_str("t,linf,E,P,C(E),C(P)\n");
    for r in &report.samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            sci(r.time),
            sci_opt(r.linf),
            sci(r.energy),
            sci(r.momentum),
            sci(r.energy_change.value),
            sci(r.momentum_change.value)
        );
    }
    s
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    parameters: BTreeMap<&'a str, &'a str>,
    report: &'a DiagnosticsReport,
}

pub fn report_json(report: &DiagnosticsReport, manifest: &Manifest) -> Result<String> {
    let doc = ReportDocument {
        parameters: manifest.as_map(),
        report,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))
}

/// Nodal values captured at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub exact: Option<Vec<f64>>,
}

/// Records `(x, U, V, u)` at every sample time.
#[derive(Debug, Default)]
pub struct SnapshotObserver {
    pub snapshots: Vec<Snapshot>,
}

impl Observer for SnapshotObserver {
    fn observe(&mut self, sample: &Sample<'_>) -> Result<()> {
        let consts = nodal_constants(sample.basis);
        let x = sample.basis.nodes();
        let exact = sample.problem.exact.as_ref().map(|e| {
            x.iter()
                .map(|&xm| (e.u)(xm, sample.time))
                .collect::<Vec<_>>()
        });
        self.snapshots.push(Snapshot {
            time: sample.time,
            u: sample.state.nodal_u(&consts),
            v: sample.state.nodal_v(&consts),
            x,
            exact,
        });
        Ok(())
    }
}

pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_t{t}.csv")
}

/// Columns `x, U, V, u_exact, error`; the last two are empty without an
/// exact solution.
pub fn snapshot_csv(snap: &Snapshot, manifest: &Manifest) -> String {
    let mut s = manifest
        .clone()
        .with("t", format!("{}", snap.time))
        .comment_block();
    s.push_str("x,U,V,u_exact,error\n");
    for m in 0..snap.x.len() {
        let (ex, err) = match &snap.exact {
            Some(e) => (sci(e[m]), sci((e[m] - snap.u[m]).abs())),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            s,
            "{},{},{},{ex},{err}",
            sci(snap.x[m]),
            sci(snap.u[m]),
            sci(snap.v[m])
        );
    }
    s
}

/// Scan curve sorted by λ: `lambda, linf, status`.
pub fn scan_curve_csv(result: &ScanResult, manifest: &Manifest) -> String {
    let mut s = manifest
        .clone()
        .with("best_lambda", format!("{}", result.best_lambda))
        .with("best_linf", sci(result.best_linf))
        .comment_block();
    s.push_str("lambda,linf,status\n");
    for p in &result.curve {
        let _ = writeln!(
            s,
            "{},{},{}",
            sci(p.lambda),
            sci_opt(p.linf),
            csv_field(&p.status)
        );
    }
    s
}

/// Generic table: header row plus string cells.
pub fn table_csv(header: &[String], rows: &[Vec<String>], manifest: &Manifest) -> String {
    let mut s = manifest.comment_block();
    let line = |cells: &[String]| -> String {
        cells
            .iter()
            .map(|c| csv_field(c))
            .collect::<Vec<_>>()
            .join(",")
    };
    let _ = writeln!(s, "{}", line(header));
    for r in rows {
        let _ = writeln!(s, "{}", line(r));
    }
    s
}

#[derive(Serialize)]
struct RunManifest<'a> {
    version: &'a str,
    parameters: BTreeMap<&'a str, &'a str>,
    wall_time_seconds: f64,
    files: &'a [String],
}

/// `manifest.json`: parameters, software version, wall time and the files written.
pub fn run_manifest_json(
    manifest: &Manifest,
    wall_time_seconds: f64,
    files: &[String],
) -> Result<String> {
    let doc = RunManifest {
        version: VERSION,
        parameters: manifest.as_map(),
        wall_time_seconds,
        files,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}
