//! Sweep of the extension parameter for the smallest terminal L∞ error.
//!
//! The default search is two-phase: a coarse grid over the whole range, then
//! a fine grid around the coarse minimiser. `exhaustive` sweeps the whole
//! range at the fine step instead. `λ = 0` is always sampled.

use rayon::prelude::*;
use serde::Serialize;

use crate::basis::BasisConfig;
use crate::diagnostics::linf_error;
use crate::error::{invalid, Error, Result};
use crate::linalg::Pivoting;
use crate::problems::ProblemSpec;
use crate::timestepper::{initialize, steps_to, Stepper};

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub coarse_step: f64,
    pub refine_step: f64,
    pub refine_radius: f64,
    /// Single sweep at `refine_step` over the whole range.
    pub exhaustive: bool,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub pivoting: Pivoting,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            lambda_min: -1.0,
            lambda_max: 1.0,
            coarse_step: 1e-3,
            refine_step: 1e-4,
            refine_radius: 1e-2,
            exhaustive: false,
            workers: None,
            pivoting: Pivoting::Partial,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min < self.lambda_max) {
            return Err(invalid(format!(
                "lambda_min = {} must be below lambda_max = {}",
                self.lambda_min, self.lambda_max
            )));
        }
        if !(self.refine_step > 0.0 && self.refine_step <= self.coarse_step) {
            return Err(invalid(format!(
                "need 0 < refine_step ({}) <= coarse_step ({})",
                self.refine_step, self.coarse_step
            )));
        }
        if !(self.refine_radius >= 0.0) {
            return Err(invalid("refine_radius must be non-negative"));
        }
        if self.workers == Some(0) {
            return Err(invalid("worker count must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanPhase {
    Coarse,
    Fine,
}

/// One evaluated λ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub lambda: f64,
    /// `None` when the run failed.
    pub linf: Option<f64>,
    pub status: String,
    pub phase: ScanPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub best_lambda: f64,
    pub best_linf: f64,
    /// Best point of the coarse phase (equal to the overall best when exhaustive).
    pub coarse_best: (f64, f64),
    /// L∞ of the classical basis, `λ = 0`, if that run succeeded.
    pub baseline_linf: Option<f64>,
    /// Every evaluated point, sorted by λ.
    pub curve: Vec<ScanPoint>,
}

/// Integer multiples of `step` in `[lo, hi]`, plus any `extra` values.
fn grid(lo: f64, hi: f64, step: f64, extra: &[f64]) -> Vec<f64> {
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    // Dividing by an exact integer inverse keeps points like -0.0101 correctly rounded.
    let inv = (1.0 / step).round();
    let exact_inverse = (inv * step - 1.0).abs() < 1e-12;
    let point = |k: i64| {
        if exact_inverse {
            k as f64 / inv
        } else {
            k as f64 * step
        }
    };
    let mut pts: Vec<f64> = (first..=last).map(point).collect();
    pts.extend_from_slice(extra);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-3 * step);
    pts
}

/// L∞ at `t_end` for one λ, or a failure description.
pub fn evaluate(
    spec: &ProblemSpec,
    cfg: &BasisConfig,
    dt: f64,
    t_end: f64,
    pivoting: Pivoting,
) -> Result<f64> {
    let steps = steps_to(t_end, dt)?;
    let mut stepper = Stepper::new(spec, cfg, dt)?.with_pivoting(pivoting);
    let mut state = initialize(spec, cfg)?;
    for n in 1..=steps {
        stepper.advance(&mut state).map_err(|e| Error::StepFailed {
            time: (n - 1) as f64 * dt,
            step: n,
            source: Box::new(e),
        })?;
    }
    state.time = t_end;
    let l = linf_error(&state, spec, cfg)?;
    if !l.is_finite() {
        return Err(Error::Unsupported(format!("non-finite error {l}")));
    }
    Ok(l)
}

fn evaluate_all(
    spec: &ProblemSpec,
    template: &BasisConfig,
    dt: f64,
    t_end: f64,
    lambdas: &[f64],
    phase: ScanPhase,
    pivoting: Pivoting,
) -> Vec<ScanPoint> {
    lambdas
        .par_iter()
        .map(|&lambda| {
            let outcome = template
                .with_lambda(lambda)
                .and_then(|cfg| evaluate(spec, &cfg, dt, t_end, pivoting));
            match outcome {
                Ok(l) => ScanPoint {
                    lambda,
                    linf: Some(l),
                    status: "ok".into(),
                    phase,
                },
                Err(e) => ScanPoint {
                    lambda,
                    linf: None,
                    status: e.to_string(),
                    phase,
                },
            }
        })
        .collect()
}

/// Smallest L∞; ties go to the smaller |λ|.
fn best_of<'a>(points: impl Iterator<Item = &'a ScanPoint>) -> Option<(f64, f64)> {
    points
        .filter_map(|p| p.linf.map(|l| (p.lambda, l)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.abs().total_cmp(&b.0.abs())))
}

pub fn scan(
    spec: &ProblemSpec,
    cfg_template: &BasisConfig,
    dt: f64,
    t_end: f64,
    scan_cfg: &ScanConfig,
) -> Result<ScanResult> {
    scan_cfg.validate()?;
    if spec.exact.is_none() {
        return Err(Error::Unsupported(format!(
            "problem '{}' has no exact solution to scan against",
            spec.name
        )));
    }
    steps_to(t_end, dt)?;
    let lo = scan_cfg.lambda_min.min(0.0);
    let hi = scan_cfg.lambda_max.max(0.0);
    let (a, b) = cfg_template.domain();
    let template = BasisConfig::with_bounds(a, b, cfg_template.n_intervals(), 0.0, (lo, hi))?;

    let body = || -> Result<ScanResult> {
        let pivoting = scan_cfg.pivoting;
        let (coarse_step, coarse_phase) = if scan_cfg.exhaustive {
            (scan_cfg.refine_step, ScanPhase::Fine)
        } else {
            (scan_cfg.coarse_step, ScanPhase::Coarse)
        };
        let coarse_grid = grid(
            scan_cfg.lambda_min,
            scan_cfg.lambda_max,
            coarse_step,
            &[0.0],
        );
        let mut curve = evaluate_all(
            spec,
            &template,
            dt,
            t_end,
            &coarse_grid,
            coarse_phase,
            pivoting,
        );
        let coarse_best = best_of(curve.iter()).ok_or(Error::ScanFailed)?;

        let mut best = coarse_best;
        if !scan_cfg.exhaustive {
            let c = coarse_best.0;
            let r = scan_cfg.refine_radius;
            let same = |x: f64, y: f64| (x - y).abs() < 1e-3 * scan_cfg.refine_step;
            let fine_grid: Vec<f64> =
                grid((c - r).max(lo), (c + r).min(hi), scan_cfg.refine_step, &[c])
                    .into_iter()
                    .filter(|&l| !curve.iter().any(|p| same(p.lambda, l)))
                    .collect();
            let fine = evaluate_all(
                spec,
                &template,
                dt,
                t_end,
                &fine_grid,
                ScanPhase::Fine,
                pivoting,
            );
            curve.extend(fine);
            // Coarse samples inside the window count toward the fine minimum.
            let window = curve
                .iter()
                .filter(|p| (p.lambda - c).abs() <= r * (1.0 + 1e-9));
            best = best_of(window).unwrap_or(coarse_best);
        }
        curve.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        let baseline_linf = curve.iter().find(|p| p.lambda == 0.0).and_then(|p| p.linf);
        Ok(ScanResult {
            best_lambda: best.0,
            best_linf: best.1,
            coarse_best,
            baseline_linf,
            curve,
        })
    };

    match scan_cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(body),
        None => body(),
    }
}
