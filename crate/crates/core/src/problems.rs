//! Problem instances for `u_tt - u_xx - ε₁u - ε₂u³ = 0` with homogeneous
//! Neumann conditions on `[a, b]`.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};

pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed-form solution `u(x, t)` with its time derivative.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: SpaceTimeFn,
    pub ut: SpaceTimeFn,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub domain: (f64, f64),
    pub t_end: f64,
    /// `u(x, 0)`.
    pub initial_u: SpaceFn,
    /// `u_t(x, 0)`.
    pub initial_v: SpaceFn,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("epsilon1", &self.epsilon1)
            .field("epsilon2", &self.epsilon2)
            .field("domain", &self.domain)
            .field("t_end", &self.t_end)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

/// Names accepted by [`by_name`].
pub const BUILTIN_PROBLEMS: &[(&str, &str)] = &[
    (
        "traveling_wave",
        "tanh kink, eps1=1, eps2=-1, nu=0.5, [-30, 30], t_end=10",
    ),
    (
        "solitary_wave",
        "2 sech soliton, eps1=2, eps2=-1, [-10, 15], t_end=3",
    ),
];

/// Default speed of the built-in traveling wave.
pub const TRAVELING_WAVE_SPEED: f64 = 0.5;

impl ProblemSpec {
    /// Problem with user-supplied initial data and no exact solution.
    pub fn custom(
        name: impl Into<String>,
        epsilon1: f64,
        epsilon2: f64,
        domain: (f64, f64),
        t_end: f64,
        initial_u: SpaceFn,
        initial_v: SpaceFn,
    ) -> Result<Self> {
        let spec = ProblemSpec {
            name: name.into(),
            epsilon1,
            epsilon2,
            domain,
            t_end,
            initial_u,
            initial_v,
            exact: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Problem whose initial data is sampled from an exact solution at `t = 0`.
    pub fn from_exact(
        name: impl Into<String>,
        epsilon1: f64,
        epsilon2: f64,
        domain: (f64, f64),
        t_end: f64,
        exact: ExactSolution,
    ) -> Result<Self> {
        let u = exact.u.clone();
        let ut = exact.ut.clone();
        let spec = ProblemSpec {
            name: name.into(),
            epsilon1,
            epsilon2,
            domain,
            t_end,
            initial_u: Arc::new(move |x| u(x, 0.0)),
            initial_v: Arc::new(move |x| ut(x, 0.0)),
            exact: Some(exact),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let (a, b) = self.domain;
        if !(a < b) {
            return Err(invalid(format!("domain [{a}, {b}] must satisfy a < b")));
        }
        if !(self.t_end > 0.0) {
            return Err(invalid(format!("t_end = {} must be positive", self.t_end)));
        }
        Ok(())
    }

    pub fn with_t_end(mut self, t_end: f64) -> Result<Self> {
        self.t_end = t_end;
        self.validate()?;
        Ok(self)
    }
}

/// Kink `u = tanh((x - νt) / √(2(1 - ν²)))` for `ε₁ = 1`, `ε₂ = -1` on `[-30, 30]`.
pub fn traveling_wave(nu: f64) -> Result<ProblemSpec> {
    if !(nu.abs() < 1.0) {
        return Err(invalid(format!(
            "wave speed |nu| = {} must be < 1",
            nu.abs()
        )));
    }
    let width = (2.0 * (1.0 - nu * nu)).sqrt();
    let exact = ExactSolution {
        u: Arc::new(move |x, t| ((x - nu * t) / width).tanh()),
        ut: Arc::new(move |x, t| {
            let sech = 1.0 / ((x - nu * t) / width).cosh();
            -nu / width * sech * sech
        }),
    };
    ProblemSpec::from_exact("traveling_wave", 1.0, -1.0, (-30.0, 30.0), 10.0, exact)
}

/// Soliton `u = 2 sech(√2 (sinh(1) x - cosh(1) t))` for `ε₁ = 2`, `ε₂ = -1` on `[-10, 15]`.
pub fn solitary_wave() -> ProblemSpec {
    let k = std::f64::consts::SQRT_2 * 1f64.sinh();
    let w = std::f64::consts::SQRT_2 * 1f64.cosh();
    let exact = ExactSolution {
        u: Arc::new(move |x, t| 2.0 / (k * x - w * t).cosh()),
        ut: Arc::new(move |x, t| {
            let z = k * x - w * t;
            2.0 * w * z.tanh() / z.cosh()
        }),
    };
    ProblemSpec::from_exact("solitary_wave", 2.0, -1.0, (-10.0, 15.0), 3.0, exact)
        .expect("built-in solitary wave is valid")
}

/// Built-in problem by name.
pub fn by_name(name: &str) -> Result<ProblemSpec> {
    match name {
        "traveling_wave" => traveling_wave(TRAVELING_WAVE_SPEED),
        "solitary_wave" => Ok(solitary_wave()),
        other => Err(invalid(format!(
            "unknown problem '{other}' (available: {})",
            BUILTIN_PROBLEMS
                .iter()
                .map(|(n, _)| *n)
                .collect::<Vec<_>>()
                .join(", ")
        ))),
    }
}

/// Step used by [`residual`] for its central differences.
pub const RESIDUAL_STEP: f64 = 1e-4;

/// PDE residual `u_tt - u_xx - ε₁u - ε₂u³` of `u_fn` at `(x, t)`, by central differences.
pub fn residual(spec: &ProblemSpec, u_fn: &dyn Fn(f64, f64) -> f64, x: f64, t: f64) -> f64 {
    let s = RESIDUAL_STEP;
    let u = u_fn(x, t);
    let u_tt = (u_fn(x, t + s) - 2.0 * u + u_fn(x, t - s)) / (s * s);
    let u_xx = (u_fn(x + s, t) - 2.0 * u + u_fn(x - s, t)) / (s * s);
    u_tt - u_xx - spec.epsilon1 * u - spec.epsilon2 * u * u * u
}

/// Piecewise-linear interpolant through tabulated `(x, y)` samples, held
/// constant beyond the end points.
pub fn tabulated(xs: Vec<f64>, ys: Vec<f64>) -> Result<SpaceFn> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(invalid("tabulated data needs equally many x and y samples"));
    }
    if xs.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("tabulated x samples must be strictly increasing"));
    }
    Ok(Arc::new(move |x| {
        let n = xs.len();
        if x <= xs[0] {
            return ys[0];
        }
        if x >= xs[n - 1] {
            return ys[n - 1];
        }
        let k = xs.partition_point(|&p| p <= x) - 1;
        let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
        ys[k] + w * (ys[k + 1] - ys[k])
    }))
}
