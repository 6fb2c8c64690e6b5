//! Initial coefficient construction and the linearised Crank–Nicolson march.

use crate::assembly::{assemble_into, BANDWIDTH};
use crate::basis::{nodal_constants, BasisConfig, NodalConstants};
use crate::diagnostics::{self, DiagnosticsReport, RunMetadata};
use crate::error::{invalid, Error, Result};
use crate::linalg::{
    factorize_with, lu_in_place, lu_solve, solve_in_place, BandedMatrix, Pivoting,
};
use crate::problems::ProblemSpec;

/// Relative tolerance for aligning times with the step grid.
pub const TIME_GRID_RTOL: f64 = 1e-9;

/// Spline weights of `U` (`delta`) and `V` (`phi`) at one time level,
/// stored for indices `-1 ..= N + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientState {
    delta: Vec<f64>,
    phi: Vec<f64>,
    pub time: f64,
}

impl CoefficientState {
    /// Builds a state from the node coefficients `0 ..= N`; the ghosts follow
    /// from the Neumann relations `η_{-1} = η_1`, `η_{N+1} = η_{N-1}`.
    pub fn from_node_values(delta: Vec<f64>, phi: Vec<f64>, time: f64) -> Result<Self> {
        if delta.len() != phi.len() || delta.len() < 3 {
            return Err(invalid(format!(
                "need equal delta/phi node counts >= 3, got {} and {}",
                delta.len(),
                phi.len()
            )));
        }
        Ok(Self {
            delta: with_ghosts(&delta),
            phi: with_ghosts(&phi),
            time,
        })
    }

    /// Rebuilds a state from an interleaved `(δ_0, φ_0, …, δ_N, φ_N)` vector.
    pub fn from_interleaved(x: &[f64], time: f64) -> Result<Self> {
        if !x.len().is_multiple_of(2) {
            return Err(invalid("interleaved vector must have even length"));
        }
        let delta = x.iter().step_by(2).copied().collect();
        let phi = x.iter().skip(1).step_by(2).copied().collect();
        Self::from_node_values(delta, phi, time)
    }

    pub fn zeros(n_intervals: usize) -> Self {
        Self {
            delta: vec![0.0; n_intervals + 3],
            phi: vec![0.0; n_intervals + 3],
            time: 0.0,
        }
    }

    /// `δ_{-1} ..= δ_{N+1}`.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// `φ_{-1} ..= φ_{N+1}`.
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn n_intervals(&self) -> usize {
        self.delta.len() - 3
    }

    #[inline]
    pub fn delta_at(&self, i: isize) -> f64 {
        self.delta[(i + 1) as usize]
    }

    #[inline]
    pub fn phi_at(&self, i: isize) -> f64 {
        self.phi[(i + 1) as usize]
    }

    /// Node unknowns in solver ordering.
    pub fn interleaved(&self) -> Vec<f64> {
        let n = self.n_intervals();
        let mut x = Vec::with_capacity(2 * (n + 1));
        for i in 1..=n + 1 {
            x.push(self.delta[i]);
            x.push(self.phi[i]);
        }
        x
    }

    /// Overwrites the node coefficients from solver ordering and refreshes the ghosts.
    fn load_interleaved(&mut self, x: &[f64]) {
        let n = self.n_intervals();
        debug_assert_eq!(x.len(), 2 * (n + 1));
        for (i, pair) in x.chunks_exact(2).enumerate() {
            self.delta[i + 1] = pair[0];
            self.phi[i + 1] = pair[1];
        }
        self.delta[0] = self.delta[2];
        self.phi[0] = self.phi[2];
        self.delta[n + 2] = self.delta[n];
        self.phi[n + 2] = self.phi[n];
    }

    /// True when the four ghost equalities hold exactly.
    pub fn satisfies_boundary_relations(&self) -> bool {
        let n = self.n_intervals() as isize;
        self.delta_at(-1) == self.delta_at(1)
            && self.phi_at(-1) == self.phi_at(1)
            && self.delta_at(n + 1) == self.delta_at(n - 1)
            && self.phi_at(n + 1) == self.phi_at(n - 1)
    }

    /// `U(x_m)` at every node.
    pub fn nodal_u(&self, consts: &NodalConstants) -> Vec<f64> {
        nodal_values(&self.delta, consts)
    }

    /// `V(x_m)` at every node.
    pub fn nodal_v(&self, consts: &NodalConstants) -> Vec<f64> {
        nodal_values(&self.phi, consts)
    }

    /// `U_x(x_m)` at every node.
    pub fn nodal_ux(&self, consts: &NodalConstants) -> Vec<f64> {
        self.delta
            .windows(3)
            .map(|w| consts.first_derivative(w[0], w[2]))
            .collect()
    }
}

fn with_ghosts(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut out = Vec::with_capacity(n + 2);
    out.push(nodes[1]);
    out.extend_from_slice(nodes);
    out.push(nodes[n - 2]);
    out
}

fn nodal_values(coeffs: &[f64], consts: &NodalConstants) -> Vec<f64> {
    coeffs
        .windows(3)
        .map(|w| consts.value(w[0], w[1], w[2]))
        .collect()
}

/// Spline coefficients interpolating `values` at the nodes with zero end slopes.
///
/// With the ghosts eliminated this is the tridiagonal system
/// `α₂η_0 + 2α₁η_1 = f_0`, `α₁η_{m-1} + α₂η_m + α₁η_{m+1} = f_m`,
/// `2α₁η_{N-1} + α₂η_N = f_N`.
pub fn interpolate(consts: &NodalConstants, values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 {
        return Err(invalid("interpolation needs at least 3 nodes"));
    }
    let mut m = BandedMatrix::zeros(n, 1, 1);
    for i in 0..n {
        m.set(i, i, consts.alpha2);
        if i > 0 {
            m.set(i, i - 1, consts.alpha1);
        }
        if i + 1 < n {
            m.set(i, i + 1, consts.alpha1);
        }
    }
    m.set(0, 1, 2.0 * consts.alpha1);
    m.set(n - 1, n - 2, 2.0 * consts.alpha1);
    let f = factorize_with(m, Pivoting::Partial).map_err(|e| {
        Error::Config(format!(
            "interpolation system is singular for this basis: {e}"
        ))
    })?;
    let mut coeffs = values.to_vec();
    solve_in_place(&f, &mut coeffs)?;
    Ok(coeffs)
}

/// Initial state: `U` interpolates `u(x, 0)` and `V` interpolates `u_t(x, 0)`.
pub fn initialize(spec: &ProblemSpec, cfg: &BasisConfig) -> Result<CoefficientState> {
    check_domain(spec, cfg)?;
    let consts = nodal_constants(cfg);
    let nodes = cfg.nodes();
    let f: Vec<f64> = nodes.iter().map(|&x| (spec.initial_u)(x)).collect();
    let g: Vec<f64> = nodes.iter().map(|&x| (spec.initial_v)(x)).collect();
    CoefficientState::from_node_values(interpolate(&consts, &f)?, interpolate(&consts, &g)?, 0.0)
}

fn check_domain(spec: &ProblemSpec, cfg: &BasisConfig) -> Result<()> {
    let (a, b) = cfg.domain();
    let (pa, pb) = spec.domain;
    let tol = 1e-12 * (pb - pa).abs().max(1.0);
    if (a - pa).abs() > tol || (b - pb).abs() > tol {
        return Err(invalid(format!(
            "grid domain [{a}, {b}] does not match problem domain [{pa}, {pb}]"
        )));
    }
    Ok(())
}

/// Advances states of one problem on one grid, reusing its system storage.
#[derive(Debug, Clone)]
pub struct Stepper {
    consts: NodalConstants,
    eps1: f64,
    eps2: f64,
    dt: f64,
    pivoting: Pivoting,
    lhs: BandedMatrix,
    rhs: Vec<f64>,
    pivots: Vec<usize>,
}

impl Stepper {
    pub fn new(spec: &ProblemSpec, cfg: &BasisConfig, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("time step dt = {dt} must be positive")));
        }
        check_domain(spec, cfg)?;
        let dim = 2 * cfg.n_nodes();
        Ok(Self {
            consts: nodal_constants(cfg),
            eps1: spec.epsilon1,
            eps2: spec.epsilon2,
            dt,
            pivoting: Pivoting::Partial,
            lhs: BandedMatrix::zeros(dim, BANDWIDTH, BANDWIDTH),
            rhs: vec![0.0; dim],
            pivots: Vec::with_capacity(dim),
        })
    }

    pub fn with_pivoting(mut self, pivoting: Pivoting) -> Self {
        self.pivoting = pivoting;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One linear solve: assemble `A` and `B·x^n`, factor, solve, restore ghosts.
    pub fn advance(&mut self, state: &mut CoefficientState) -> Result<()> {
        debug_assert!(state.satisfies_boundary_relations());
        assemble_into(
            &self.consts,
            state,
            self.dt,
            self.eps1,
            self.eps2,
            &mut self.lhs,
            &mut self.rhs,
        )?;
        lu_in_place(&mut self.lhs, &mut self.pivots, self.pivoting)?;
        lu_solve(&self.lhs, &self.pivots, &mut self.rhs)?;
        state.load_interleaved(&self.rhs);
        state.time += self.dt;
        debug_assert!(state.satisfies_boundary_relations());
        Ok(())
    }

    /// Like [`Stepper::advance`], returning a new state.
    pub fn step(&mut self, state: &CoefficientState) -> Result<CoefficientState> {
        let mut next = state.clone();
        self.advance(&mut next)?;
        Ok(next)
    }
}

/// Single step with partial pivoting.
pub fn step(
    state: &CoefficientState,
    dt: f64,
    spec: &ProblemSpec,
    cfg: &BasisConfig,
) -> Result<CoefficientState> {
    if state.n_intervals() != cfg.n_intervals() {
        return Err(invalid(format!(
            "state has {} intervals, grid has {}",
            state.n_intervals(),
            cfg.n_intervals()
        )));
    }
    Stepper::new(spec, cfg, dt)?.step(state)
}

/// Number of `dt` steps that reach `t`, if `t` lies on the step grid.
pub fn steps_to(t: f64, dt: f64) -> Result<usize> {
    let ratio = t / dt;
    let n = ratio.round();
    if !(n >= 0.0) || (ratio - n).abs() > TIME_GRID_RTOL * n.max(1.0) {
        return Err(invalid(format!(
            "time {t} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// Everything an observer sees at a sample time.
pub struct Sample<'a> {
    pub step: usize,
    pub time: f64,
    pub state: &'a CoefficientState,
    pub problem: &'a ProblemSpec,
    pub basis: &'a BasisConfig,
}

/// Callback invoked at each requested sample time.
pub trait Observer {
    fn observe(&mut self, sample: &Sample<'_>) -> Result<()>;
}

/// Time-march settings for [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub dt: f64,
    pub t_end: f64,
    /// Sample times; the final time is used when empty.
    pub sample_times: Vec<f64>,
    pub pivoting: Pivoting,
}

impl RunSettings {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            sample_times: Vec::new(),
            pivoting: Pivoting::Partial,
        }
    }

    pub fn with_samples(mut self, times: impl Into<Vec<f64>>) -> Self {
        self.sample_times = times.into();
        self
    }

    pub fn with_pivoting(mut self, pivoting: Pivoting) -> Self {
        self.pivoting = pivoting;
        self
    }
}

/// Marches from [`initialize`] to `t_end`, collecting diagnostics and
/// calling `observers` at every sample time.
pub fn run(
    spec: &ProblemSpec,
    cfg: &BasisConfig,
    settings: &RunSettings,
    observers: &mut [&mut dyn Observer],
) -> Result<DiagnosticsReport> {
    let dt = settings.dt;
    if !(dt > 0.0) {
        return Err(invalid(format!("time step dt = {dt} must be positive")));
    }
    let total = steps_to(settings.t_end, dt)?;
    if total == 0 {
        return Err(invalid("t_end must be at least one time step"));
    }
    let mut sample_steps = Vec::new();
    let requested = if settings.sample_times.is_empty() {
        vec![settings.t_end]
    } else {
        settings.sample_times.clone()
    };
    for &t in &requested {
        let s = steps_to(t, dt)?;
        if s == 0 || s > total {
            return Err(invalid(format!(
                "sample time {t} must lie in (0, t_end = {}]",
                settings.t_end
            )));
        }
        sample_steps.push((s, t));
    }
    sample_steps.sort_by_key(|&(s, _)| s);
    sample_steps.dedup_by_key(|&mut (s, _)| s);

    let mut stepper = Stepper::new(spec, cfg, dt)?.with_pivoting(settings.pivoting);
    let consts = nodal_constants(cfg);
    let mut state = initialize(spec, cfg)?;
    let mut report = DiagnosticsReport::new(
        RunMetadata {
            problem: spec.name.clone(),
            h: cfg.h(),
            dt,
            lambda: cfg.lambda(),
            t_end: settings.t_end,
            n_intervals: cfg.n_intervals(),
            steps: total,
        },
        diagnostics::energy_with(&state, spec, cfg, &consts),
        diagnostics::momentum_with(&state, cfg, &consts),
    );

    let mut next_sample = sample_steps.iter().peekable();
    for n in 1..=total {
        stepper.advance(&mut state).map_err(|e| Error::StepFailed {
            time: (n - 1) as f64 * dt,
            step: n,
            source: Box::new(e),
        })?;
        // Keep the clock on the grid instead of accumulating dt.
        state.time = n as f64 * dt;
        while let Some(&&(s, t)) = next_sample.peek() {
            if s != n {
                break;
            }
            next_sample.next();
            state.time = t;
            report.record(&state, spec, cfg, &consts)?;
            let sample = Sample {
                step: n,
                time: t,
                state: &state,
                problem: spec,
                basis: cfg,
            };
            for obs in observers.iter_mut() {
                obs.observe(&sample)?;
            }
        }
    }
    report.finish(&state, spec, cfg, &consts);
    Ok(report)
}
