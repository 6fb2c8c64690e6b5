//! Error norms and the conserved energy and momentum functionals.

use serde::Serialize;

use crate::basis::{nodal_constants, BasisConfig, NodalConstants};
use crate::error::{Error, Result};
use crate::problems::ProblemSpec;
use crate::timestepper::CoefficientState;

/// Composite Simpson rule on equally spaced samples. With an odd number of
/// panels the last one is integrated by the trapezoid rule.
pub fn composite_simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let panels = n - 1;
    let simpson_panels = panels - panels % 2;
    let mut sum = 0.0;
    let mut k = 0;
    while k < simpson_panels {
        sum += values[k] + 4.0 * values[k + 1] + values[k + 2];
        k += 2;
    }
    let mut total = sum * h / 3.0;
    if panels % 2 == 1 {
        total += 0.5 * h * (values[n - 2] + values[n - 1]);
    }
    total
}

/// `max_m |u(x_m, t) - U(x_m, t)|` at the state's time.
pub fn linf_error(state: &CoefficientState, spec: &ProblemSpec, cfg: &BasisConfig) -> Result<f64> {
    linf_error_with(state, spec, cfg, &nodal_constants(cfg))
}

pub(crate) fn linf_error_with(
    state: &CoefficientState,
    spec: &ProblemSpec,
    cfg: &BasisConfig,
    consts: &NodalConstants,
) -> Result<f64> {
    let exact = spec.exact.as_ref().ok_or_else(|| {
        Error::Unsupported(format!("problem '{}' has no exact solution", spec.name))
    })?;
    let t = state.time;
    Ok(cfg
        .nodes()
        .iter()
        .zip(state.nodal_u(consts))
        .map(|(&x, u)| ((exact.u)(x, t) - u).abs())
        .fold(0.0, f64::max))
}

/// `E = ½∫(V² + U_x² − ε₁U² − ½ε₂U⁴) dx` over the problem interval.
pub fn energy(state: &CoefficientState, spec: &ProblemSpec, cfg: &BasisConfig) -> f64 {
    energy_with(state, spec, cfg, &nodal_constants(cfg))
}

pub(crate) fn energy_with(
    state: &CoefficientState,
    spec: &ProblemSpec,
    cfg: &BasisConfig,
    consts: &NodalConstants,
) -> f64 {
    let u = state.nodal_u(consts);
    let ux = state.nodal_ux(consts);
    let v = state.nodal_v(consts);
    let density: Vec<f64> = u
        .iter()
        .zip(&ux)
        .zip(&v)
        .map(|((&u, &ux), &v)| {
            let u2 = u * u;
            0.5 * (v * v + ux * ux - spec.epsilon1 * u2 - 0.5 * spec.epsilon2 * u2 * u2)
        })
        .collect();
    composite_simpson(&density, cfg.h())
}

/// `P = ∫ U_x V dx` over the problem interval.
pub fn momentum(state: &CoefficientState, cfg: &BasisConfig) -> f64 {
    momentum_with(state, cfg, &nodal_constants(cfg))
}

pub(crate) fn momentum_with(
    state: &CoefficientState,
    cfg: &BasisConfig,
    consts: &NodalConstants,
) -> f64 {
    let density: Vec<f64> = state
        .nodal_ux(consts)
        .iter()
        .zip(state.nodal_v(consts))
        .map(|(ux, v)| ux * v)
        .collect();
    composite_simpson(&density, cfg.h())
}

/// `|current − initial| / |initial|`.
///
/// A zero reference yields [`Error::ZeroReference`] carrying the absolute change.
pub fn relative_change(current: f64, initial: f64) -> Result<f64> {
    let diff = (current - initial).abs();
    if initial == 0.0 {
        return Err(Error::ZeroReference { absolute: diff });
    }
    Ok(diff / initial.abs())
}

/// Relative change, or the absolute change when the reference is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Change {
    pub value: f64,
    /// True when `value` is an absolute change because the reference vanished.
    pub absolute: bool,
}

impl Change {
    pub fn between(current: f64, initial: f64) -> Self {
        match relative_change(current, initial) {
            Ok(value) => Change {
                value,
                absolute: false,
            },
            Err(_) => Change {
                value: (current - initial).abs(),
                absolute: true,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub problem: String,
    pub h: f64,
    pub dt: f64,
    pub lambda: f64,
    pub t_end: f64,
    pub n_intervals: usize,
    pub steps: usize,
}

/// Diagnostics at one sample time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub time: f64,
    pub linf: Option<f64>,
    pub energy: f64,
    pub momentum: f64,
    pub energy_change: Change,
    pub momentum_change: Change,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub metadata: RunMetadata,
    pub initial_energy: f64,
    pub initial_momentum: f64,
    pub linf_history: Vec<(f64, f64)>,
    pub energy_history: Vec<(f64, f64)>,
    pub momentum_history: Vec<(f64, f64)>,
    pub samples: Vec<SampleRecord>,
    /// `(C(E), C(P))` at the final time.
    pub relative_changes: (Change, Change),
    pub final_linf: Option<f64>,
}

impl DiagnosticsReport {
    pub fn new(metadata: RunMetadata, initial_energy: f64, initial_momentum: f64) -> Self {
        Self {
            metadata,
            initial_energy,
            initial_momentum,
            linf_history: Vec::new(),
            energy_history: Vec::new(),
            momentum_history: Vec::new(),
            samples: Vec::new(),
            relative_changes: (
                Change::between(initial_energy, initial_energy),
                Change::between(initial_momentum, initial_momentum),
            ),
            final_linf: None,
        }
    }

    /// Appends diagnostics for `state`; times must increase strictly.
    pub fn record(
        &mut self,
        state: &CoefficientState,
        spec: &ProblemSpec,
        cfg: &BasisConfig,
        consts: &NodalConstants,
    ) -> Result<()> {
        let t = state.time;
        if let Some(last) = self.samples.last() {
            if !(t > last.time) {
                return Err(crate::error::invalid(format!(
                    "sample time {t} not after previous sample {}",
                    last.time
                )));
            }
        }
        let linf = match spec.exact {
            Some(_) => Some(linf_error_with(state, spec, cfg, consts)?),
            None => None,
        };
        let e = energy_with(state, spec, cfg, consts);
        let p = momentum_with(state, cfg, consts);
        if let Some(l) = linf {
            self.linf_history.push((t, l));
        }
        self.energy_history.push((t, e));
        self.momentum_history.push((t, p));
        self.samples.push(SampleRecord {
            time: t,
            linf,
            energy: e,
            momentum: p,
            energy_change: Change::between(e, self.initial_energy),
            momentum_change: Change::between(p, self.initial_momentum),
        });
        Ok(())
    }

    /// Fills in the final-time quantities.
    pub fn finish(
        &mut self,
        state: &CoefficientState,
        spec: &ProblemSpec,
        cfg: &BasisConfig,
        consts: &NodalConstants,
    ) {
        let e = energy_with(state, spec, cfg, consts);
        let p = momentum_with(state, cfg, consts);
        self.relative_changes = (
            Change::between(e, self.initial_energy),
            Change::between(p, self.initial_momentum),
        );
        self.final_linf = linf_error_with(state, spec, cfg, consts).ok();
    }

    /// L∞ at the sample closest to `t`.
    pub fn linf_at(&self, t: f64) -> Option<f64> {
        self.linf_history
            .iter()
            .find(|(s, _)| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|&(_, l)| l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{solitary_wave, traveling_wave};
    use crate::timestepper::initialize;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let h = 0.1;
        let xs: Vec<f64> = (0..=20).map(|i| i as f64 * h).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x * x - 2.0 * x + 1.0).collect();
        let exact = 2f64.powi(4) / 4.0 - 4.0 + 2.0;
        assert!((composite_simpson(&ys, h) - exact).abs() < 1e-12);
    }

    #[test]
    fn odd_panel_count_adds_trapezoid() {
        let ys = [1.0, 1.0, 1.0, 1.0];
        assert!((composite_simpson(&ys, 0.5) - 1.5).abs() < 1e-15);
        let lin = [0.0, 1.0, 2.0, 3.0];
        assert!((composite_simpson(&lin, 1.0) - 4.5).abs() < 1e-15);
    }

    #[test]
    fn relative_change_cases() {
        assert_eq!(relative_change(5.0, 5.0).unwrap(), 0.0);
        assert!((relative_change(-1.1, -1.0).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(
            relative_change(0.25, 0.0),
            Err(Error::ZeroReference { absolute: 0.25 })
        );
        let c = Change::between(0.25, 0.0);
        assert!(c.absolute);
        assert_eq!(c.value, 0.25);
    }

    #[test]
    fn zero_state_has_zero_functionals() {
        let p = solitary_wave();
        let cfg = BasisConfig::from_spacing(-10.0, 15.0, 0.25, 0.0).unwrap();
        let s = CoefficientState::zeros(cfg.n_intervals());
        assert_eq!(energy(&s, &p, &cfg), 0.0);
        assert_eq!(momentum(&s, &cfg), 0.0);
    }

    #[test]
    fn initial_interpolant_has_tiny_error() {
        let p = traveling_wave(0.5).unwrap();
        let cfg = BasisConfig::from_spacing(-30.0, 30.0, 0.2, -0.3).unwrap();
        let s = initialize(&p, &cfg).unwrap();
        assert!(linf_error(&s, &p, &cfg).unwrap() < 1e-12);
    }

    #[test]
    fn missing_exact_solution_is_unsupported() {
        let mut p = solitary_wave();
        p.exact = None;
        let cfg = BasisConfig::from_spacing(-10.0, 15.0, 0.25, 0.0).unwrap();
        let s = initialize(&p, &cfg).unwrap();
        assert!(matches!(
            linf_error(&s, &p, &cfg),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn initial_functionals_match_closed_forms() {
        let s2 = std::f64::consts::SQRT_2;
        let s6 = 6f64.sqrt();
        let tw = traveling_wave(0.5).unwrap();
        let cfg = BasisConfig::from_spacing(-30.0, 30.0, 0.02, 0.0).unwrap();
        let st = initialize(&tw, &cfg).unwrap();
        let e0 = energy(&st, &tw, &cfg);
        let p0 = momentum(&st, &cfg);
        assert!((e0 - -13.91133789).abs() < 1e-6 * 13.91133789, "E0 = {e0}");
        assert!(
            (p0 - -2.0 * s6 / 9.0).abs() < 1e-6 * 0.5443310539,
            "P0 = {p0}"
        );

        let sw = solitary_wave();
        let cfg = BasisConfig::from_spacing(-10.0, 15.0, 0.005, 0.0).unwrap();
        let st = initialize(&sw, &cfg).unwrap();
        let e0 = energy(&st, &sw, &cfg);
        let p0 = momentum(&st, &cfg);
        let c = 1f64.cosh();
        let e_exact = 8.0 / 3.0 * s2 * (c * c - 1.0) / 1f64.sinh();
        assert!((e_exact - 4.431961243).abs() < 1e-8);
        assert!((e0 - e_exact).abs() < 1e-6 * e_exact, "E0 = {e0}");
        assert!(
            (p0 - -8.0 / 3.0 * s2 * c).abs() < 1e-6 * 5.819321497,
            "P0 = {p0}"
        );
    }
}
