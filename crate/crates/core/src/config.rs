//! Flat `key = value` configuration for single runs and batch tables.
//!
//! Blank lines and lines starting with `#` are ignored. Serialising a parsed
//! config yields a canonical text that parses back to the same value.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::basis::{intervals_for_spacing, BasisConfig};
use crate::error::{Error, Result};
use crate::lambda_scan::ScanConfig;
use crate::linalg::Pivoting;
use crate::problems::{self, ProblemSpec, BUILTIN_PROBLEMS};
use crate::timestepper::{steps_to, RunSettings};

/// Name under which a problem with tabulated initial data is selected.
pub const CUSTOM_PROBLEM: &str = "custom";

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Fixed extension parameter or a scan for the best one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Fixed(f64),
    Scan,
}

impl LambdaChoice {
    fn parse(key: &str, value: &str) -> Result<Self> {
        if value.trim() == "scan" {
            Ok(LambdaChoice::Scan)
        } else {
            parse_f64(key, value).map(LambdaChoice::Fixed)
        }
    }

    fn render(&self) -> String {
        match self {
            LambdaChoice::Fixed(l) => format!("{l}"),
            LambdaChoice::Scan => "scan".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    fn parse(value: &str) -> Result<Self> {
        match value.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(config_error(format!(
                "unknown output format '{other}' (expected csv or json)"
            ))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let v = value.trim();
    v.parse::<f64>()
        .map_err(|_| config_error(format!("key '{key}': expected a number, got '{v}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(config_error(format!(
            "key '{key}': expected true or false, got '{other}'"
        ))),
    }
}

fn parse_list<T>(value: &str, item: impl FnMut(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(item)
        .collect()
}

fn render_list<T>(items: &[T], item: impl FnMut(&T) -> String) -> String {
    items.iter().map(item).collect::<Vec<_>>().join(",")
}

/// Splits config text into `(line number, key, value)` triples.
fn entries(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            config_error(format!(
                "line {}: expected 'key = value', got '{line}'",
                idx + 1
            ))
        })?;
        out.push((idx + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// All settings of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: Option<String>,
    /// Speed of the traveling wave.
    pub nu: Option<f64>,
    pub epsilon1: Option<f64>,
    pub epsilon2: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// CSV with columns `x, u[, v]` for the custom problem.
    pub initial_data: Option<PathBuf>,
    pub h: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub lambda: LambdaChoice,
    /// Scan range, which doubles as the admissible range for a fixed λ.
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub coarse_step: f64,
    pub refine_step: f64,
    pub refine_radius: f64,
    pub exhaustive: bool,
    pub pivot_free: bool,
    pub sample_times: Vec<f64>,
    pub output_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scan = ScanConfig::default();
        Self {
            problem: None,
            nu: None,
            epsilon1: None,
            epsilon2: None,
            a: None,
            b: None,
            initial_data: None,
            h: None,
            dt: None,
            t_end: None,
            lambda: LambdaChoice::Fixed(0.0),
            lambda_min: scan.lambda_min,
            lambda_max: scan.lambda_max,
            coarse_step: scan.coarse_step,
            refine_step: scan.refine_step,
            refine_radius: scan.refine_radius,
            exhaustive: false,
            pivot_free: false,
            sample_times: Vec::new(),
            output_dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

/// A validated run, ready to execute.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub problem: ProblemSpec,
    pub basis: BasisConfig,
    pub settings: RunSettings,
    /// Present when λ is to be scanned.
    pub scan: Option<ScanConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (line, key, value) in entries(text)? {
            if !seen.insert(key.clone()) {
                return Err(config_error(format!("line {line}: duplicate key '{key}'")));
            }
            cfg.set(&key, &value)
                .map_err(|e| config_error(format!("line {line}: {}", strip_prefix(&e))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let opt_str = |v: &str| (!v.is_empty()).then(|| v.to_string());
        match key {
            "problem" => self.problem = opt_str(value),
            "nu" => self.nu = Some(parse_f64(key, value)?),
            "epsilon1" => self.epsilon1 = Some(parse_f64(key, value)?),
            "epsilon2" => self.epsilon2 = Some(parse_f64(key, value)?),
            "a" => self.a = Some(parse_f64(key, value)?),
            "b" => self.b = Some(parse_f64(key, value)?),
            "initial_data" => self.initial_data = opt_str(value).map(PathBuf::from),
            "h" => self.h = Some(parse_f64(key, value)?),
            "dt" => self.dt = Some(parse_f64(key, value)?),
            "t_end" => self.t_end = Some(parse_f64(key, value)?),
            "lambda" => self.lambda = LambdaChoice::parse(key, value)?,
            "lambda_min" => self.lambda_min = parse_f64(key, value)?,
            "lambda_max" => self.lambda_max = parse_f64(key, value)?,
            "coarse_step" => self.coarse_step = parse_f64(key, value)?,
            "refine_step" => self.refine_step = parse_f64(key, value)?,
            "refine_radius" => self.refine_radius = parse_f64(key, value)?,
            "exhaustive" => self.exhaustive = parse_bool(key, value)?,
            "pivot_free" => self.pivot_free = parse_bool(key, value)?,
            "sample_times" => self.sample_times = parse_list(value, |s| parse_f64(key, s))?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "formats" => self.formats = parse_list(value, OutputFormat::parse)?,
            other => return Err(config_error(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parameters that determine the numerical results, in canonical order.
    pub fn parameters(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut opt = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        opt("problem", self.problem.clone());
        opt("nu", self.nu.map(|v| format!("{v}")));
        opt("epsilon1", self.epsilon1.map(|v| format!("{v}")));
        opt("epsilon2", self.epsilon2.map(|v| format!("{v}")));
        opt("a", self.a.map(|v| format!("{v}")));
        opt("b", self.b.map(|v| format!("{v}")));
        opt(
            "initial_data",
            self.initial_data.as_ref().map(|p| p.display().to_string()),
        );
        opt("h", self.h.map(|v| format!("{v}")));
        opt("dt", self.dt.map(|v| format!("{v}")));
        opt("t_end", self.t_end.map(|v| format!("{v}")));
        out.push(("lambda", self.lambda.render()));
        out.push(("lambda_min", format!("{}", self.lambda_min)));
        out.push(("lambda_max", format!("{}", self.lambda_max)));
        out.push(("coarse_step", format!("{}", self.coarse_step)));
        out.push(("refine_step", format!("{}", self.refine_step)));
        out.push(("refine_radius", format!("{}", self.refine_radius)));
        out.push(("exhaustive", self.exhaustive.to_string()));
        out.push(("pivot_free", self.pivot_free.to_string()));
        out.push((
            "sample_times",
            render_list(&self.sample_times, |t| format!("{t}")),
        ));
        out
    }

    /// Canonical text form; round-trips through [`RunConfig::parse`].
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.parameters() {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(
            s,
            "formats = {}",
            render_list(&self.formats, |f| f.name().to_string())
        );
        s
    }

    pub fn pivoting(&self) -> Pivoting {
        if self.pivot_free {
            Pivoting::None
        } else {
            Pivoting::Partial
        }
    }

    pub fn scan_config(&self) -> ScanConfig {
        ScanConfig {
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            coarse_step: self.coarse_step,
            refine_step: self.refine_step,
            refine_radius: self.refine_radius,
            exhaustive: self.exhaustive,
            workers: None,
            pivoting: self.pivoting(),
        }
    }

    fn build_problem(&self, name: &str) -> Result<ProblemSpec> {
        if name == CUSTOM_PROBLEM {
            return self.build_custom();
        }
        let custom_keys = [
            ("epsilon1", self.epsilon1.is_some()),
            ("epsilon2", self.epsilon2.is_some()),
            ("a", self.a.is_some()),
            ("b", self.b.is_some()),
            ("initial_data", self.initial_data.is_some()),
        ];
        if let Some((k, _)) = custom_keys.iter().find(|(_, set)| *set) {
            return Err(config_error(format!(
                "'{k}' only applies to problem = {CUSTOM_PROBLEM}; built-in problems fix it"
            )));
        }
        let spec = match (name, self.nu) {
            ("traveling_wave", Some(nu)) => problems::traveling_wave(nu),
            (_, Some(_)) => Err(config_error(
                "'nu' only applies to problem = traveling_wave",
            )),
            (n, None) => problems::by_name(n),
        }
        .map_err(|e| config_error(strip_prefix(&e)))?;
        match self.t_end {
            Some(t) => spec
                .with_t_end(t)
                .map_err(|e| config_error(strip_prefix(&e))),
            None => Ok(spec),
        }
    }

    fn build_custom(&self) -> Result<ProblemSpec> {
        let need = |k: &str, v: Option<f64>| {
            v.ok_or_else(|| config_error(format!("problem = {CUSTOM_PROBLEM} requires '{k}'")))
        };
        let e1 = need("epsilon1", self.epsilon1)?;
        let e2 = need("epsilon2", self.epsilon2)?;
        let a = need("a", self.a)?;
        let b = need("b", self.b)?;
        let t_end = need("t_end", self.t_end)?;
        let path = self.initial_data.as_ref().ok_or_else(|| {
            config_error(format!(
                "problem = {CUSTOM_PROBLEM} requires 'initial_data'"
            ))
        })?;
        let (xs, us, vs) = read_initial_data(path)?;
        let u = problems::tabulated(xs.clone(), us).map_err(|e| config_error(strip_prefix(&e)))?;
        let v = problems::tabulated(xs, vs).map_err(|e| config_error(strip_prefix(&e)))?;
        ProblemSpec::custom(CUSTOM_PROBLEM, e1, e2, (a, b), t_end, u, v)
            .map_err(|e| config_error(strip_prefix(&e)))
    }

    /// Validates the config and builds the solver inputs.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let name = self.problem.as_deref().ok_or_else(|| {
            config_error(format!(
                "missing problem name (one of {}, {CUSTOM_PROBLEM})",
                BUILTIN_PROBLEMS
                    .iter()
                    .map(|(n, _)| *n)
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })?;
        let problem = self.build_problem(name)?;
        let h = self
            .h
            .ok_or_else(|| config_error("missing mesh spacing 'h'"))?;
        let dt = self
            .dt
            .ok_or_else(|| config_error("missing time step 'dt'"))?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(config_error(format!("dt = {dt} must be positive")));
        }
        let (a, b) = problem.domain;
        let n = intervals_for_spacing(a, b, h).map_err(|e| config_error(strip_prefix(&e)))?;
        if !(self.lambda_min <= self.lambda_max) {
            return Err(config_error(format!(
                "lambda_min = {} exceeds lambda_max = {}",
                self.lambda_min, self.lambda_max
            )));
        }
        let lambda = match self.lambda {
            LambdaChoice::Fixed(l) => l,
            LambdaChoice::Scan => 0.0,
        };
        let bounds = (self.lambda_min.min(0.0), self.lambda_max.max(0.0));
        let basis = BasisConfig::with_bounds(a, b, n, lambda, bounds)
            .map_err(|e| config_error(strip_prefix(&e)))?;
        let t_end = problem.t_end;
        let total = steps_to(t_end, dt)
            .map_err(|_| config_error(format!("t_end = {t_end} is not a multiple of dt = {dt}")))?;
        if total == 0 {
            return Err(config_error("t_end must span at least one time step"));
        }
        for &t in &self.sample_times {
            let s = steps_to(t, dt).map_err(|_| {
                config_error(format!(
                    "sample time {t} is not on the time grid (multiples of dt = {dt})"
                ))
            })?;
            if s == 0 || s > total {
                return Err(config_error(format!(
                    "sample time {t} must lie in (0, t_end = {t_end}]"
                )));
            }
        }
        let settings = RunSettings::new(dt, t_end)
            .with_samples(self.sample_times.clone())
            .with_pivoting(self.pivoting());
        let scan = match self.lambda {
            LambdaChoice::Scan => {
                if problem.exact.is_none() {
                    return Err(config_error(format!(
                        "problem '{name}' has no exact solution, so lambda = scan is unavailable"
                    )));
                }
                let sc = self.scan_config();
                sc.validate().map_err(|e| config_error(strip_prefix(&e)))?;
                Some(sc)
            }
            LambdaChoice::Fixed(_) => None,
        };
        Ok(ResolvedRun {
            problem,
            basis,
            settings,
            scan,
        })
    }
}

/// Error message without the variant prefix, for re-wrapping.
fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) | Error::InvalidArgument(m) | Error::Unsupported(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Reads `x, u[, v]` columns; `v` defaults to zero. A non-numeric first row
/// is taken as a header.
pub fn read_initial_data(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    let (mut xs, mut us, mut vs) = (Vec::new(), Vec::new(), Vec::new());
    let mut first = true;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let is_first = std::mem::replace(&mut first, false);
        let nums: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let nums = match nums {
            Ok(v) => v,
            Err(_) if is_first => continue,
            Err(_) => {
                return Err(config_error(format!(
                    "{} line {}: expected numbers, got '{line}'",
                    path.display(),
                    idx + 1
                )))
            }
        };
        if !(2..=3).contains(&nums.len()) {
            return Err(config_error(format!(
                "{} line {}: expected 2 or 3 columns (x, u[, v])",
                path.display(),
                idx + 1
            )));
        }
        xs.push(nums[0]);
        us.push(nums[1]);
        vs.push(nums.get(2).copied().unwrap_or(0.0));
    }
    if xs.len() < 2 {
        return Err(config_error(format!(
            "{} needs at least two data rows",
            path.display()
        )));
    }
    Ok((xs, us, vs))
}

/// Quantity reported per row of a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Linf,
    EnergyChange,
    MomentumChange,
}

impl Metric {
    fn parse(value: &str) -> Result<Self> {
        match value {
            "linf" => Ok(Metric::Linf),
            "ce" => Ok(Metric::EnergyChange),
            "cp" => Ok(Metric::MomentumChange),
            other => Err(config_error(format!(
                "unknown metric '{other}' (expected linf, ce or cp)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Linf => "linf",
            Metric::EnergyChange => "ce",
            Metric::MomentumChange => "cp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub h: f64,
    pub dt: f64,
    /// Expensive row whose scan is skipped at desk scale.
    pub full: bool,
}

/// A batch of runs sharing a problem, reported as one CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TableConfig {
    pub name: String,
    pub problem: Option<String>,
    pub t_end: Option<f64>,
    /// Times at which the metrics are reported; the final time when empty.
    pub samples: Vec<f64>,
    pub metrics: Vec<Metric>,
    pub lambdas: Vec<LambdaChoice>,
    pub rows: Vec<TableRow>,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            name: "table".into(),
            problem: None,
            t_end: None,
            samples: Vec::new(),
            metrics: vec![Metric::Linf],
            lambdas: vec![LambdaChoice::Fixed(0.0)],
            rows: Vec::new(),
        }
    }
}

impl TableConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TableConfig::default();
        for (line, key, value) in entries(text)? {
            let at = |e: Error| config_error(format!("line {line}: {}", strip_prefix(&e)));
            match key.as_str() {
                "name" => cfg.name = value,
                "problem" => cfg.problem = (!value.is_empty()).then_some(value),
                "t_end" => cfg.t_end = Some(parse_f64(&key, &value).map_err(at)?),
                "samples" => {
                    cfg.samples = parse_list(&value, |s| parse_f64(&key, s)).map_err(at)?
                }
                "metrics" => cfg.metrics = parse_list(&value, Metric::parse).map_err(at)?,
                "lambdas" => {
                    cfg.lambdas =
                        parse_list(&value, |s| LambdaChoice::parse(&key, s)).map_err(at)?
                }
                "row" => cfg.rows.push(parse_row(&value).map_err(at)?),
                other => return Err(at(config_error(format!("unknown key '{other}'")))),
            }
        }
        if cfg.lambdas.is_empty() {
            return Err(config_error("'lambdas' must list at least one entry"));
        }
        if !cfg.rows.is_empty() && cfg.problem.is_none() {
            return Err(config_error("table rows need a 'problem'"));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Bundled table definition by name (`table2` .. `table5`).
    pub fn bundled(name: &str) -> Result<Self> {
        let text = match name {
            "table2" => include_str!("../configs/table2.cfg"),
            "table3" => include_str!("../configs/table3.cfg"),
            "table4" => include_str!("../configs/table4.cfg"),
            "table5" => include_str!("../configs/table5.cfg"),
            other => {
                return Err(config_error(format!(
                    "no bundled table '{other}' (available: {})",
                    BUNDLED_TABLES.join(", ")
                )))
            }
        };
        Self::parse(text)
    }

    pub fn has_scan(&self) -> bool {
        self.lambdas.contains(&LambdaChoice::Scan)
    }

    /// Canonical text form; round-trips through [`TableConfig::parse`].
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.parameters() {
            let _ = writeln!(s, "{k} = {v}");
        }
        for r in &self.rows {
            let _ = writeln!(s, "row = {}", render_row(r));
        }
        s
    }

    /// Header-level parameters in canonical order (rows excluded).
    pub fn parameters(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("name", self.name.clone())];
        if let Some(p) = &self.problem {
            out.push(("problem", p.clone()));
        }
        if let Some(t) = self.t_end {
            out.push(("t_end", format!("{t}")));
        }
        out.push(("samples", render_list(&self.samples, |t| format!("{t}"))));
        out.push((
            "metrics",
            render_list(&self.metrics, |m| m.name().to_string()),
        ));
        out.push(("lambdas", render_list(&self.lambdas, LambdaChoice::render)));
        out
    }
}

pub const BUNDLED_TABLES: &[&str] = &["table2", "table3", "table4", "table5"];

fn parse_row(value: &str) -> Result<TableRow> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    let (h, dt, full) = match parts.as_slice() {
        [h, dt] => (h, dt, false),
        [h, dt, "full"] => (h, dt, true),
        _ => {
            return Err(config_error(format!(
                "row '{value}': expected 'h, dt' or 'h, dt, full'"
            )))
        }
    };
    Ok(TableRow {
        h: parse_f64("row", h)?,
        dt: parse_f64("row", dt)?,
        full,
    })
}

fn render_row(r: &TableRow) -> String {
    if r.full {
        format!("{}, {}, full", r.h, r.dt)
    } else {
        format!("{}, {}", r.h, r.dt)
    }
}
