//! Command-line front end: `run`, `scan`, `table` and `list-problems`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{
    LambdaChoice, Metric, OutputFormat, RunConfig, TableConfig, TableRow, BUNDLED_TABLES,
    CUSTOM_PROBLEM,
};
use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::lambda_scan::{self, ScanResult};
use crate::output::{self, Manifest, SnapshotObserver};
use crate::problems::BUILTIN_PROBLEMS;
use crate::timestepper;

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "KGSPLINE_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "kgspline",
    version,
    about = "Extended cubic B-spline collocation for the nonlinear Klein-Gordon equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem and write the diagnostics report and snapshots.
    Run(RunArgs),
    /// Scan the extension parameter, then run at the best value.
    Scan(RunArgs),
    /// Run a batch of parameter rows and write one consolidated CSV.
    Table(TableArgs),
    /// List the built-in problems.
    ListProblems,
}

#[derive(Debug, Args, Default)]
#[command(allow_negative_numbers = true)]
pub struct RunArgs {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// Extension parameter, or `scan`.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Comma-separated sample times.
    #[arg(long = "sample", value_delimiter = ',')]
    pub sample: Vec<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated report formats (csv, json).
    #[arg(long, value_delimiter = ',')]
    pub format: Vec<String>,
    /// Factorise without row interchanges.
    #[arg(long)]
    pub pivot_free: bool,
    /// Scan the whole range at the fine step.
    #[arg(long)]
    pub exhaustive: bool,
    /// Traveling-wave speed.
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub epsilon1: Option<f64>,
    #[arg(long)]
    pub epsilon2: Option<f64>,
    /// Left end of a custom problem's interval.
    #[arg(long)]
    pub a: Option<f64>,
    /// Right end of a custom problem's interval.
    #[arg(long)]
    pub b: Option<f64>,
    /// CSV with `x, u[, v]` columns for the custom problem.
    #[arg(long)]
    pub initial_data: Option<PathBuf>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub coarse_step: Option<f64>,
    #[arg(long)]
    pub refine_step: Option<f64>,
    #[arg(long)]
    pub refine_radius: Option<f64>,
    /// Worker threads (overrides the environment variable).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["config", "bundled"]))]
pub struct TableArgs {
    /// Table config file.
    pub config: Option<PathBuf>,
    /// Bundled table: table2, table3, table4 or table5.
    #[arg(long)]
    pub bundled: Option<String>,
    /// Skip the λ scan on rows marked `full`.
    #[arg(long)]
    pub desk_scale: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub pivot_free: bool,
    #[arg(long)]
    pub workers: Option<usize>,
}

impl RunArgs {
    /// Config file contents with the flags applied on top.
    pub fn to_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.problem {
            cfg.problem = Some(p.clone());
        }
        let set = |slot: &mut Option<f64>, v: Option<f64>| {
            if v.is_some() {
                *slot = v;
            }
        };
        set(&mut cfg.h, self.h);
        set(&mut cfg.dt, self.dt);
        set(&mut cfg.t_end, self.t_end);
        set(&mut cfg.nu, self.nu);
        set(&mut cfg.epsilon1, self.epsilon1);
        set(&mut cfg.epsilon2, self.epsilon2);
        set(&mut cfg.a, self.a);
        set(&mut cfg.b, self.b);
        if let Some(l) = &self.lambda {
            cfg.set("lambda", l)?;
        }
        if !self.sample.is_empty() {
            cfg.sample_times = self.sample.clone();
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if !self.format.is_empty() {
            cfg.set("formats", &self.format.join(","))?;
        }
        if let Some(p) = &self.initial_data {
            cfg.initial_data = Some(p.clone());
        }
        let scan_fields = [
            (&mut cfg.lambda_min, self.lambda_min),
            (&mut cfg.lambda_max, self.lambda_max),
            (&mut cfg.coarse_step, self.coarse_step),
            (&mut cfg.refine_step, self.refine_step),
            (&mut cfg.refine_radius, self.refine_radius),
        ];
        for (slot, v) in scan_fields {
            if let Some(v) = v {
                *slot = v;
            }
        }
        cfg.pivot_free |= self.pivot_free;
        cfg.exhaustive |= self.exhaustive;
        Ok(cfg)
    }
}

/// Artifacts and results of [`run_single`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: DiagnosticsReport,
    pub scan: Option<ScanResult>,
    /// File names written inside the output directory.
    pub files: Vec<String>,
}

/// Runs one configuration and writes its artifacts to `config.output_dir`.
pub fn run_single(config: &RunConfig) -> Result<RunOutcome> {
    let resolved = config.resolve()?;
    let started = Instant::now();
    let mut basis = resolved.basis;
    let mut manifest = Manifest::new(config.parameters());
    let scan = match &resolved.scan {
        Some(sc) => {
            let result = lambda_scan::scan(
                &resolved.problem,
                &basis,
                resolved.settings.dt,
                resolved.settings.t_end,
                sc,
            )?;
            basis = basis.with_lambda(result.best_lambda)?;
            manifest = manifest.with("lambda_used", format!("{}", result.best_lambda));
            Some(result)
        }
        None => None,
    };
    let mut snapshots = SnapshotObserver::default();
    let report = timestepper::run(
        &resolved.problem,
        &basis,
        &resolved.settings,
        &mut [&mut snapshots],
    )?;

    let dir = &config.output_dir;
    let mut files = Vec::new();
    let mut write = |name: String, contents: String| -> Result<()> {
        output::write_artifact(dir, &name, &contents)?;
        files.push(name);
        Ok(())
    };
    if config.formats.contains(&OutputFormat::Csv) {
        write("report.csv".into(), output::report_csv(&report, &manifest))?;
    }
    if config.formats.contains(&OutputFormat::Json) {
        write(
            "report.json".into(),
            output::report_json(&report, &manifest)?,
        )?;
    }
    for snap in &snapshots.snapshots {
        write(
            output::snapshot_file_name(snap.time),
            output::snapshot_csv(snap, &manifest),
        )?;
    }
    if let Some(result) = &scan {
        write(
            "scan_curve.csv".into(),
            output::scan_curve_csv(result, &manifest),
        )?;
    }
    let wall = started.elapsed().as_secs_f64();
    files.push("manifest.json".into());
    output::write_artifact(
        dir,
        "manifest.json",
        &output::run_manifest_json(&manifest, wall, &files)?,
    )?;
    Ok(RunOutcome {
        report,
        scan,
        files,
    })
}

/// Batch options that are not part of the table definition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TableOptions {
    pub desk_scale: bool,
    pub pivot_free: bool,
    pub out_dir: PathBuf,
}

/// Consolidated table produced by [`run_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct TableOutcome {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub path: PathBuf,
}

fn variant_suffix(choice: &LambdaChoice) -> String {
    match choice {
        LambdaChoice::Fixed(l) => format!("lambda{l}"),
        LambdaChoice::Scan => "opt".into(),
    }
}

fn table_samples(table: &TableConfig) -> Vec<f64> {
    if table.samples.is_empty() {
        table.t_end.into_iter().collect()
    } else {
        table.samples.clone()
    }
}

pub fn table_header(table: &TableConfig) -> Vec<String> {
    let mut header = vec!["h".to_string(), "dt".to_string()];
    let samples = table_samples(table);
    for m in &table.metrics {
        for t in &samples {
            for v in &table.lambdas {
                header.push(format!("{}_t{t}_{}", m.name(), variant_suffix(v)));
            }
        }
    }
    if table.has_scan() {
        header.push("lambda_opt".into());
    }
    header.push("status".into());
    header
}

struct VariantResult {
    report: Option<DiagnosticsReport>,
    lambda: Option<f64>,
}

fn metric_value(report: &DiagnosticsReport, metric: Metric, t: f64) -> Option<f64> {
    let rec = report
        .samples
        .iter()
        .find(|r| (r.time - t).abs() <= 1e-9 * t.abs().max(1.0))?;
    match metric {
        Metric::Linf => rec.linf,
        Metric::EnergyChange => Some(rec.energy_change.value),
        Metric::MomentumChange => Some(rec.momentum_change.value),
    }
}

fn table_row(table: &TableConfig, row: &TableRow, opts: &TableOptions) -> Vec<String> {
    let mut cells = vec![output::sci(row.h), output::sci(row.dt)];
    let mut notes: Vec<String> = Vec::new();
    let samples = table_samples(table);
    let cfg = RunConfig {
        problem: table.problem.clone(),
        h: Some(row.h),
        dt: Some(row.dt),
        t_end: table.t_end,
        sample_times: samples.clone(),
        pivot_free: opts.pivot_free,
        ..RunConfig::default()
    };
    let variants: Vec<VariantResult> = match cfg.resolve() {
        Err(e) => {
            notes.push(e.to_string());
            table
                .lambdas
                .iter()
                .map(|_| VariantResult {
                    report: None,
                    lambda: None,
                })
                .collect()
        }
        Ok(resolved) => table
            .lambdas
            .iter()
            .map(|choice| {
                let outcome = (|| -> Result<Option<(f64, DiagnosticsReport)>> {
                    let lambda = match choice {
                        LambdaChoice::Fixed(l) => *l,
                        LambdaChoice::Scan if row.full && opts.desk_scale => return Ok(None),
                        LambdaChoice::Scan => {
                            let sc = RunConfig {
                                pivot_free: opts.pivot_free,
                                ..RunConfig::default()
                            }
                            .scan_config();
                            lambda_scan::scan(
                                &resolved.problem,
                                &resolved.basis,
                                resolved.settings.dt,
                                resolved.settings.t_end,
                                &sc,
                            )?
                            .best_lambda
                        }
                    };
                    let basis = resolved.basis.with_lambda(lambda)?;
                    let report =
                        timestepper::run(&resolved.problem, &basis, &resolved.settings, &mut [])?;
                    Ok(Some((lambda, report)))
                })();
                match outcome {
                    Ok(Some((lambda, report))) => VariantResult {
                        report: Some(report),
                        lambda: Some(lambda),
                    },
                    Ok(None) => {
                        notes.push("scan skipped at desk scale".into());
                        VariantResult {
                            report: None,
                            lambda: None,
                        }
                    }
                    Err(e) => {
                        notes.push(format!("{}: {e}", variant_suffix(choice)));
                        VariantResult {
                            report: None,
                            lambda: None,
                        }
                    }
                }
            })
            .collect(),
    };
    for m in &table.metrics {
        for &t in &samples {
            for v in &variants {
                let value = v.report.as_ref().and_then(|r| metric_value(r, *m, t));
                cells.push(value.map(output::sci).unwrap_or_default());
            }
        }
    }
    if table.has_scan() {
        let opt = table
            .lambdas
            .iter()
            .zip(&variants)
            .find(|(c, _)| **c == LambdaChoice::Scan)
            .and_then(|(_, v)| v.lambda);
        cells.push(opt.map(|l| format!("{l}")).unwrap_or_default());
    }
    cells.push(if notes.is_empty() {
        "ok".into()
    } else {
        notes.join("; ")
    });
    cells
}

/// Runs every row of `table` (concurrently) and writes `<out_dir>/<name>.csv`.
///
/// A failing row is reported in its `status` cell and the batch continues.
pub fn run_table(table: &TableConfig, opts: &TableOptions) -> Result<TableOutcome> {
    let header = table_header(table);
    let rows: Vec<Vec<String>> = table
        .rows
        .par_iter()
        .map(|row| table_row(table, row, opts))
        .collect();
    let manifest = Manifest::new(table.parameters())
        .with("desk_scale", opts.desk_scale.to_string())
        .with("pivot_free", opts.pivot_free.to_string());
    let name = format!("{}.csv", table.name);
    output::write_artifact(
        &opts.out_dir,
        &name,
        &output::table_csv(&header, &rows, &manifest),
    )?;
    Ok(TableOutcome {
        header,
        rows,
        path: opts.out_dir.join(name),
    })
}

/// Exit status for a library error: configuration problems are usage errors.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn worker_count(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| {
                Error::Config(format!(
                    "{WORKERS_ENV} must be a positive integer, got '{v}'"
                ))
            }),
        _ => Ok(None),
    }
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match worker_count(workers)? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(f),
        None => f(),
    }
}

fn print_report(report: &DiagnosticsReport, dir: &Path) {
    let m = &report.metadata;
    println!(
        "{}: h={} dt={} lambda={} steps={}",
        m.problem, m.h, m.dt, m.lambda, m.steps
    );
    println!(
        "E0={} P0={}",
        output::sci(report.initial_energy),
        output::sci(report.initial_momentum)
    );
    for r in &report.samples {
        let linf = r.linf.map(output::sci).unwrap_or_else(|| "-".into());
        println!(
            "t={} linf={linf} C(E)={} C(P)={}",
            r.time,
            output::sci(r.energy_change.value),
            output::sci(r.momentum_change.value)
        );
    }
    println!("artifacts in {}", dir.display());
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::ListProblems => {
            for (name, description) in BUILTIN_PROBLEMS {
                println!("{name}\t{description}");
            }
            println!("{CUSTOM_PROBLEM}\ttabulated initial data (epsilon1, epsilon2, a, b, t_end, initial_data)");
            Ok(())
        }
        Command::Run(args) => {
            let cfg = args.to_config()?;
            with_workers(args.workers, || run_single(&cfg)).map(|o| {
                print_report(&o.report, &cfg.output_dir);
            })
        }
        Command::Scan(args) => {
            let mut cfg = args.to_config()?;
            cfg.lambda = LambdaChoice::Scan;
            with_workers(args.workers, || run_single(&cfg)).map(|o| {
                if let Some(s) = &o.scan {
                    println!(
                        "best lambda={} linf={} (lambda=0: {})",
                        s.best_lambda,
                        output::sci(s.best_linf),
                        s.baseline_linf
                            .map(output::sci)
                            .unwrap_or_else(|| "-".into())
                    );
                }
                print_report(&o.report, &cfg.output_dir);
            })
        }
        Command::Table(args) => {
            let table = match (&args.config, &args.bundled) {
                (Some(path), _) => TableConfig::load(path)?,
                (None, Some(name)) => TableConfig::bundled(name)?,
                (None, None) => {
                    return Err(Error::Config(format!(
                        "give a table config or --bundled ({})",
                        BUNDLED_TABLES.join(", ")
                    )))
                }
            };
            let opts = TableOptions {
                desk_scale: args.desk_scale,
                pivot_free: args.pivot_free,
                out_dir: args.out.clone(),
            };
            with_workers(args.workers, || run_table(&table, &opts)).map(|o| {
                println!("{}", o.header.join(","));
                for r in &o.rows {
                    println!("{}", r.join(","));
                }
                println!("written to {}", o.path.display());
            })
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
