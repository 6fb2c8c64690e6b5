//! Extended cubic B-splines on a uniform partition.
//!
//! Each spline `H_i` is a quartic piecewise polynomial supported on
//! `[x_{i-2}, x_{i+2}]` with a free shape parameter `lambda`; `lambda = 0`
//! recovers the classical cubic B-spline. Node indices run `0..=N`, spline
//! indices run `-1..=N+1`.

use crate::error::{invalid, Error, Result};

/// Default admissible range for the extension parameter.
pub const DEFAULT_LAMBDA_BOUNDS: (f64, f64) = (-1.0, 1.0);

/// Relative tolerance used when checking that `h` divides the domain evenly.
const SPACING_RTOL: f64 = 1e-9;

/// Uniform grid together with the extension parameter of the basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisConfig {
    lambda: f64,
    h: f64,
    n_intervals: usize,
    a: f64,
    b: f64,
    lambda_bounds: (f64, f64),
}

impl BasisConfig {
    /// Grid of `n_intervals` equal cells on `[a, b]`.
    pub fn new(a: f64, b: f64, n_intervals: usize, lambda: f64) -> Result<Self> {
        Self::with_bounds(a, b, n_intervals, lambda, DEFAULT_LAMBDA_BOUNDS)
    }

    pub fn with_bounds(
        a: f64,
        b: f64,
        n_intervals: usize,
        lambda: f64,
        lambda_bounds: (f64, f64),
    ) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(invalid(format!("domain [{a}, {b}] must satisfy a < b")));
        }
        if n_intervals + 1 < 5 {
            return Err(invalid(format!(
                "at least 5 nodes required, got {}",
                n_intervals + 1
            )));
        }
        let (lo, hi) = lambda_bounds;
        if !(lo <= hi) {
            return Err(invalid(format!("lambda bounds [{lo}, {hi}] are empty")));
        }
        if !lambda.is_finite() || lambda < lo || lambda > hi {
            return Err(invalid(format!(
                "lambda = {lambda} outside admissible range [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            lambda,
            h: (b - a) / n_intervals as f64,
            n_intervals,
            a,
            b,
            lambda_bounds,
        })
    }

    /// Grid with spacing `h`; `h` must divide `b - a` into an integer number of cells.
    pub fn from_spacing(a: f64, b: f64, h: f64, lambda: f64) -> Result<Self> {
        let n = intervals_for_spacing(a, b, h)?;
        Self::new(a, b, n, lambda)
    }

    /// Same grid, different extension parameter.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::with_bounds(self.a, self.b, self.n_intervals, lambda, self.lambda_bounds)
    }

    /// Same grid and parameter, different admissible range.
    pub fn with_lambda_bounds(&self, bounds: (f64, f64)) -> Result<Self> {
        Self::with_bounds(self.a, self.b, self.n_intervals, self.lambda, bounds)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of cells `N`.
    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    /// Number of grid nodes `N + 1`.
    pub fn n_nodes(&self) -> usize {
        self.n_intervals + 1
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn lambda_bounds(&self) -> (f64, f64) {
        self.lambda_bounds
    }

    /// Knot position `x_i`; valid for any integer `i`, including the ghost knots.
    #[inline]
    pub fn knot(&self, i: isize) -> f64 {
        self.a + i as f64 * self.h
    }

    /// Positions of the grid nodes `x_0 ..= x_N`.
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_intervals as isize)
            .map(|i| self.knot(i))
            .collect()
    }

    /// Range of valid spline indices, `-1 ..= N + 1`.
    pub fn spline_indices(&self) -> std::ops::RangeInclusive<isize> {
        -1..=(self.n_intervals as isize + 1)
    }
}

/// Number of intervals of width `h` in `[a, b]`, provided it is an integer
/// within a relative tolerance of `1e-9`.
pub fn intervals_for_spacing(a: f64, b: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("mesh spacing h = {h} must be positive")));
    }
    let ratio = (b - a) / h;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > SPACING_RTOL * ratio.abs() {
        return Err(invalid(format!(
            "h = {h} does not divide the domain length {} into an integer number of intervals",
            b - a
        )));
    }
    Ok(n as usize)
}

/// Nodal weights of the basis: value, first and second derivative stencils.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalConstants {
    /// `H_{i±1}(x_i)`.
    pub alpha1: f64,
    /// `H_i(x_i)`.
    pub alpha2: f64,
    /// `H''_{i±1}(x_i)`.
    pub gamma1: f64,
    /// `H''_i(x_i)`.
    pub gamma2: f64,
    /// `1/(2h)`; `U'(x_i) = (η_{i+1} - η_{i-1}) / (2h)`.
    pub deriv_weight: f64,
}

impl NodalConstants {
    /// `alpha1·η_{m-1} + alpha2·η_m + alpha1·η_{m+1}`.
    #[inline]
    pub fn value(&self, left: f64, center: f64, right: f64) -> f64 {
        self.alpha1 * (left + right) + self.alpha2 * center
    }

    #[inline]
    pub fn first_derivative(&self, left: f64, right: f64) -> f64 {
        self.deriv_weight * (right - left)
    }

    #[inline]
    pub fn second_derivative(&self, left: f64, center: f64, right: f64) -> f64 {
        self.gamma1 * (left + right) + self.gamma2 * center
    }
}

pub fn nodal_constants(cfg: &BasisConfig) -> NodalConstants {
    let lambda = cfg.lambda;
    let h2 = cfg.h * cfg.h;
    NodalConstants {
        alpha1: (4.0 - lambda) / 24.0,
        alpha2: (8.0 + lambda) / 12.0,
        gamma1: (2.0 + lambda) / (2.0 * h2),
        gamma2: -(4.0 + 2.0 * lambda) / (2.0 * h2),
        deriv_weight: 1.0 / (2.0 * cfg.h),
    }
}

/// Derivative order for [`eval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Value,
    First,
    Second,
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(order: u8) -> Result<Self> {
        match order {
            0 => Ok(Order::Value),
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            _ => Err(invalid(format!(
                "derivative order {order} not in {{0, 1, 2}}"
            ))),
        }
    }
}

/// Value (or derivative) of spline `H_i` at `x`.
///
/// Pieces are selected with the left-closed convention `[x_k, x_{k+1})`, so
/// the function is exactly zero for `|x - x_i| >= 2h`.
pub fn eval(cfg: &BasisConfig, i: isize, x: f64, order: Order) -> Result<f64> {
    if !cfg.spline_indices().contains(&i) {
        return Err(invalid(format!(
            "spline index {i} outside {:?}",
            cfg.spline_indices()
        )));
    }
    Ok(eval_unchecked(cfg.h, cfg.lambda, cfg.knot(i - 2), x, order))
}

/// Piecewise evaluation relative to the leftmost support knot `x_{i-2}`.
fn eval_unchecked(h: f64, lambda: f64, support_start: f64, x: f64, order: Order) -> f64 {
    let s = (x - support_start) / h;
    if !(0.0..4.0).contains(&s) {
        return 0.0;
    }
    let piece = s.floor() as usize;
    let scale = 24.0 * h.powi(4);
    let l = lambda;
    let h2 = h * h;
    let h3 = h2 * h;
    match piece {
        0 => {
            let d = x - support_start;
            let val = match order {
                Order::Value => 4.0 * h * (1.0 - l) * d.powi(3) + 3.0 * l * d.powi(4),
                Order::First => 12.0 * h * (1.0 - l) * d * d + 12.0 * l * d.powi(3),
                Order::Second => 24.0 * h * (1.0 - l) * d + 36.0 * l * d * d,
            };
            val / scale
        }
        1 => {
            let d = x - (support_start + h);
            let val = match order {
                Order::Value => {
                    (4.0 - l) * h3 * h + 12.0 * h3 * d + 6.0 * h2 * (2.0 + l) * d * d
                        - 12.0 * h * d.powi(3)
                        - 3.0 * l * d.powi(4)
                }
                Order::First => {
                    12.0 * h3 + 12.0 * h2 * (2.0 + l) * d - 36.0 * h * d * d - 12.0 * l * d.powi(3)
                }
                Order::Second => 12.0 * h2 * (2.0 + l) - 72.0 * h * d - 36.0 * l * d * d,
            };
            val / scale
        }
        2 => {
            let d = x - (support_start + 3.0 * h);
            let val = match order {
                Order::Value => {
                    (4.0 - l) * h3 * h - 12.0 * h3 * d
                        + 6.0 * h2 * (2.0 + l) * d * d
                        + 12.0 * h * d.powi(3)
                        - 3.0 * l * d.powi(4)
                }
                Order::First => {
                    -12.0 * h3 + 12.0 * h2 * (2.0 + l) * d + 36.0 * h * d * d - 12.0 * l * d.powi(3)
                }
                Order::Second => 12.0 * h2 * (2.0 + l) + 72.0 * h * d - 36.0 * l * d * d,
            };
            val / scale
        }
        _ => {
            let d = x - (support_start + 4.0 * h);
            let val = match order {
                Order::Value => 4.0 * h * (l - 1.0) * d.powi(3) + 3.0 * l * d.powi(4),
                Order::First => 12.0 * h * (l - 1.0) * d * d + 12.0 * l * d.powi(3),
                Order::Second => 24.0 * h * (l - 1.0) * d + 36.0 * l * d * d,
            };
            val / scale
        }
    }
}

/// `Σ_i coeffs[i] · H_i^{(order)}(x)` with `coeffs` indexed from spline `-1`.
pub fn combination(cfg: &BasisConfig, coeffs: &[f64], x: f64, order: Order) -> Result<f64> {
    let expected = cfg.n_intervals + 3;
    if coeffs.len() != expected {
        return Err(invalid(format!(
            "expected {expected} spline coefficients, got {}",
            coeffs.len()
        )));
    }
    // Only four splines overlap any point; locate them instead of summing all.
    let cell = ((x - cfg.a) / cfg.h).floor() as isize;
    let mut sum = 0.0;
    for i in (cell - 2)..=(cell + 3) {
        if cfg.spline_indices().contains(&i) {
            let c = coeffs[(i + 1) as usize];
            sum += c * eval_unchecked(cfg.h, cfg.lambda, cfg.knot(i - 2), x, order);
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn unit_grid(lambda: f64) -> BasisConfig {
        BasisConfig::new(0.0, 10.0, 10, lambda).unwrap()
    }

    #[test]
    fn classical_weights_at_lambda_zero() {
        let c = nodal_constants(&unit_grid(0.0));
        assert!((c.alpha1 - 1.0 / 6.0).abs() < 1e-15);
        assert!((c.alpha2 - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.gamma1 - 1.0).abs() < 1e-15);
        assert!((c.gamma2 + 2.0).abs() < 1e-15);
        assert!((c.deriv_weight - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constants_at_tabulated_optimum() {
        let cfg = BasisConfig::from_spacing(-30.0, 30.0, 0.2, -0.0101).unwrap();
        let c = nodal_constants(&cfg);
        assert!((c.alpha1 - 4.0101 / 24.0).abs() < 1e-14);
        assert!((c.alpha2 - 7.9899 / 12.0).abs() < 1e-14);
        assert!((c.gamma1 - 1.9899 / 0.08).abs() < 1e-10);
    }

    #[test]
    fn nodal_values_match_constants() {
        for &lambda in &[-1.0, -0.3, 0.0, 0.25, 1.0] {
            let cfg = unit_grid(lambda);
            let c = nodal_constants(&cfg);
            let i = 5;
            let x = |k: isize| cfg.knot(k);
            let v = |k, o| eval(&cfg, i, x(k), o).unwrap();
            assert!((v(i, Order::Value) - (16.0 + 2.0 * lambda) / 24.0).abs() < 1e-14);
            assert!((v(i, Order::Value) - c.alpha2).abs() < 1e-14);
            assert!((v(i - 1, Order::Value) - c.alpha1).abs() < 1e-14);
            assert!((v(i + 1, Order::Value) - c.alpha1).abs() < 1e-14);
            assert_eq!(v(i - 2, Order::Value), 0.0);
            assert_eq!(v(i + 2, Order::Value), 0.0);
            assert!(v(i, Order::First).abs() < 1e-14);
            assert!((v(i - 1, Order::First) - c.deriv_weight).abs() < 1e-14);
            assert!((v(i + 1, Order::First) + c.deriv_weight).abs() < 1e-14);
            assert!((v(i, Order::Second) - c.gamma2).abs() < 1e-12);
            assert!((v(i - 1, Order::Second) - c.gamma1).abs() < 1e-12);
            assert!((v(i + 1, Order::Second) - c.gamma1).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoint_values() {
        // At x_i + h/2 the two nearest splines take (11.5 + 0.3125λ)/24 and
        // the two outer ones (0.5 - 0.3125λ)/24.
        let lambda = 0.5;
        let cfg = unit_grid(lambda);
        let x = cfg.knot(4) + 0.5 * cfg.h();
        let near = (11.5 + 0.3125 * lambda) / 24.0;
        let far = (0.5 - 0.3125 * lambda) / 24.0;
        let vals: Vec<f64> = (3..=6)
            .map(|i| eval(&cfg, i, x, Order::Value).unwrap())
            .collect();
        assert!((vals[0] - far).abs() < 1e-14);
        assert!((vals[1] - near).abs() < 1e-14);
        assert!((vals[2] - near).abs() < 1e-14);
        assert!((vals[3] - far).abs() < 1e-14);
        assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_arguments() {
        let cfg = unit_grid(0.0);
        assert!(eval(&cfg, -2, 0.0, Order::Value).is_err());
        assert!(eval(&cfg, 12, 0.0, Order::Value).is_err());
        assert!(Order::try_from(3).is_err());
        assert!(BasisConfig::new(0.0, 1.0, 3, 0.0).is_err());
        assert!(BasisConfig::new(1.0, 0.0, 10, 0.0).is_err());
        assert!(BasisConfig::new(0.0, 1.0, 10, 1.5).is_err());
        assert!(BasisConfig::with_bounds(0.0, 1.0, 10, 1.5, (-2.0, 2.0)).is_ok());
        assert!(BasisConfig::from_spacing(0.0, 1.0, 0.3, 0.0).is_err());
        assert_eq!(
            BasisConfig::from_spacing(-30.0, 30.0, 0.02, 0.0)
                .unwrap()
                .n_intervals(),
            3000
        );
        assert_eq!(
            BasisConfig::from_spacing(-10.0, 15.0, 0.005, 0.0)
                .unwrap()
                .n_intervals(),
            5000
        );
    }

    #[test]
    fn support_is_compact() {
        let cfg = unit_grid(0.7);
        for k in 0..200 {
            let x = if k < 100 {
                cfg.knot(3) - (k as f64) * 0.002
            } else {
                cfg.knot(7) + ((k - 100) as f64) * 0.002
            };
            assert_eq!(eval(&cfg, 5, x, Order::Value).unwrap(), 0.0);
            assert_eq!(eval(&cfg, 5, x, Order::Second).unwrap(), 0.0);
        }
        assert_eq!(eval(&cfg, 5, cfg.knot(7), Order::First).unwrap(), 0.0);
    }

    #[test]
    fn partition_of_unity_random_points() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for &lambda in &[-1.0, -0.5, 0.0, 0.5, 1.0] {
            let cfg = BasisConfig::new(-3.0, 5.0, 40, lambda).unwrap();
            let ones = vec![1.0; cfg.n_intervals() + 3];
            let (a, b) = cfg.domain();
            for _ in 0..1000 {
                let x = rng.gen_range(a + 2.0 * cfg.h()..b - 2.0 * cfg.h());
                let s0 = combination(&cfg, &ones, x, Order::Value).unwrap();
                let s1 = combination(&cfg, &ones, x, Order::First).unwrap();
                let s2 = combination(&cfg, &ones, x, Order::Second).unwrap();
                assert!((s0 - 1.0).abs() < 1e-12, "λ={lambda} x={x} sum={s0}");
                assert!(s1.abs() < 1e-10);
                assert!(s2.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn combination_matches_direct_sum() {
        let cfg = BasisConfig::new(0.0, 2.0, 20, -0.4).unwrap();
        let coeffs: Vec<f64> = (0..23).map(|k| (k as f64 * 0.37).sin()).collect();
        for k in 0..57 {
            let x = 0.035 * k as f64;
            let direct: f64 = cfg
                .spline_indices()
                .map(|i| coeffs[(i + 1) as usize] * eval(&cfg, i, x, Order::Value).unwrap())
                .sum();
            let fast = combination(&cfg, &coeffs, x, Order::Value).unwrap();
            assert!((direct - fast).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn first_derivative_matches_finite_difference(
            lambda in -1.0f64..1.0,
            offset in 0.05f64..0.95,
            cell in 0usize..4,
        ) {
            let cfg = BasisConfig::new(0.0, 1.0, 10, lambda).unwrap();
            let i = 4;
            let x = cfg.knot(i - 2 + cell as isize) + offset * cfg.h();
            let step = 1e-6 * cfg.h();
            let fd = (eval(&cfg, i, x + step, Order::Value).unwrap()
                - eval(&cfg, i, x - step, Order::Value).unwrap()) / (2.0 * step);
            let d1 = eval(&cfg, i, x, Order::First).unwrap();
            prop_assert!((fd - d1).abs() <= 1e-5 * d1.abs().max(1.0));
            let fd2 = (eval(&cfg, i, x + step, Order::First).unwrap()
                - eval(&cfg, i, x - step, Order::First).unwrap()) / (2.0 * step);
            let d2 = eval(&cfg, i, x, Order::Second).unwrap();
            prop_assert!((fd2 - d2).abs() <= 1e-5 * d2.abs().max(1.0));
        }

        #[test]
        fn nodal_identities(lambda in -1.0f64..1.0, h in 0.001f64..2.0) {
            let cfg = BasisConfig::new(0.0, 10.0 * h, 10, lambda).unwrap();
            let c = nodal_constants(&cfg);
            prop_assert!((2.0 * c.alpha1 + c.alpha2 - 1.0).abs() < 1e-14);
            prop_assert!((2.0 * c.gamma1 + c.gamma2).abs() <= 1e-14 * c.gamma1.abs());
        }
    }
}
