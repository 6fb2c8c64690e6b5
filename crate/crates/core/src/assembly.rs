//! Per-step collocation system `A x^{n+1} = B x^n`.
//!
//! Unknowns are interleaved as `(δ_0, φ_0, δ_1, φ_1, …, δ_N, φ_N)`. Row `2m`
//! is the collocated `v`-equation at node `m`, row `2m + 1` the `u`-equation.
//! Ghost parameters `δ_{-1}, φ_{-1}, δ_{N+1}, φ_{N+1}` are folded onto the
//! columns of indices `1` and `N - 1` via the homogeneous Neumann relations.

use crate::basis::NodalConstants;
use crate::error::{invalid, Result};
use crate::linalg::BandedMatrix;
use crate::timestepper::CoefficientState;

/// Bandwidth of the interleaved system on either side of the diagonal.
pub const BANDWIDTH: usize = 3;

/// The eight row weights of the linearised Crank–Nicolson collocation equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    /// `δ_{m±1}` in the implicit `v`-equation.
    pub w1: f64,
    /// `φ_{m±1}` in the `v`-equation, `δ_{m±1}` in the `u`-equation.
    pub w2: f64,
    /// `δ_m` in the implicit `v`-equation.
    pub w3: f64,
    /// `φ_m` in the `v`-equation, `δ_m` in the `u`-equation.
    pub w4: f64,
    /// `δ_{m±1}` on the explicit side of the `v`-equation.
    pub w5: f64,
    /// `δ_m` on the explicit side of the `v`-equation.
    pub w6: f64,
    /// `φ_{m±1}` in the `u`-equation.
    pub w7: f64,
    /// `φ_m` in the `u`-equation.
    pub w8: f64,
    /// Collocated `U^n(x_m)`.
    pub k: f64,
}

pub fn compute_row_coefficients(
    consts: &NodalConstants,
    delta_prev: [f64; 3],
    dt: f64,
    eps1: f64,
    eps2: f64,
) -> StepCoefficients {
    let NodalConstants {
        alpha1,
        alpha2,
        gamma1,
        gamma2,
        ..
    } = *consts;
    let k = consts.value(delta_prev[0], delta_prev[1], delta_prev[2]);
    let k2 = k * k;
    let implicit = -3.0 * eps2 * k2 - eps1;
    let explicit = eps1 - eps2 * k2;
    StepCoefficients {
        w1: implicit * alpha1 - gamma1,
        w2: 2.0 / dt * alpha1,
        w3: implicit * alpha2 - gamma2,
        w4: 2.0 / dt * alpha2,
        w5: explicit * alpha1 + gamma1,
        w6: explicit * alpha2 + gamma2,
        w7: -alpha1,
        w8: -alpha2,
        k,
    }
}

/// Assembled system for one time level.
#[derive(Debug, Clone)]
pub struct StepSystem {
    pub lhs: BandedMatrix,
    pub rhs_matrix: BandedMatrix,
    pub rhs: Vec<f64>,
}

/// Builds the implicit matrix `A`, the explicit matrix `B` and `rhs = B·x^n`.
pub fn assemble(
    consts: &NodalConstants,
    state_prev: &CoefficientState,
    dt: f64,
    eps1: f64,
    eps2: f64,
) -> Result<StepSystem> {
    let n_int = state_prev.n_intervals();
    if state_prev.phi().len() != state_prev.delta().len() || n_int < 2 {
        return Err(invalid(format!(
            "state dimensions inconsistent: {} delta, {} phi coefficients",
            state_prev.delta().len(),
            state_prev.phi().len()
        )));
    }
    if !(dt > 0.0) {
        return Err(invalid(format!("time step dt = {dt} must be positive")));
    }
    let dim = 2 * (n_int + 1);
    let mut lhs = BandedMatrix::zeros(dim, BANDWIDTH, BANDWIDTH);
    let mut rhs_matrix = BandedMatrix::zeros(dim, BANDWIDTH, BANDWIDTH);
    let last = n_int as isize;
    let fold = |j: isize| -> usize {
        if j < 0 {
            (-j) as usize
        } else if j > last {
            (2 * last - j) as usize
        } else {
            j as usize
        }
    };

    for m in 0..=last {
        let c = compute_row_coefficients(
            consts,
            [
                state_prev.delta_at(m - 1),
                state_prev.delta_at(m),
                state_prev.delta_at(m + 1),
            ],
            dt,
            eps1,
            eps2,
        );
        let v_row = 2 * m as usize;
        let u_row = v_row + 1;
        for (j, side) in [(m - 1, true), (m, false), (m + 1, true)] {
            let col_delta = 2 * fold(j);
            let col_phi = col_delta + 1;
            let (a_dd, b_dd, a_dp) = if side {
                (c.w1, c.w5, c.w2)
            } else {
                (c.w3, c.w6, c.w4)
            };
            let (u_dd, u_dp) = if side { (c.w2, c.w7) } else { (c.w4, c.w8) };
            lhs.add(v_row, col_delta, a_dd);
            lhs.add(v_row, col_phi, a_dp);
            rhs_matrix.add(v_row, col_delta, b_dd);
            rhs_matrix.add(v_row, col_phi, a_dp);

            lhs.add(u_row, col_delta, u_dd);
            lhs.add(u_row, col_phi, u_dp);
            rhs_matrix.add(u_row, col_delta, u_dd);
            rhs_matrix.add(u_row, col_phi, -u_dp);
        }
    }
    let rhs = rhs_matrix.matvec(&state_prev.interleaved())?;
    Ok(StepSystem {
        lhs,
        rhs_matrix,
        rhs,
    })
}

/// Writes `A` into `lhs` and `B·x^n` into `rhs` without forming `B`.
///
/// `lhs` must have dimension `2(N + 1)` and bandwidths [`BANDWIDTH`]; it is
/// cleared first.
pub fn assemble_into(
    consts: &NodalConstants,
    state_prev: &CoefficientState,
    dt: f64,
    eps1: f64,
    eps2: f64,
    lhs: &mut BandedMatrix,
    rhs: &mut [f64],
) -> Result<()> {
    let n_int = state_prev.n_intervals();
    let dim = 2 * (n_int + 1);
    if lhs.dim() != dim
        || rhs.len() != dim
        || lhs.lower_bandwidth() != BANDWIDTH
        || lhs.upper_bandwidth() != BANDWIDTH
    {
        return Err(invalid(format!(
            "workspace of dimension {} / {} does not fit a system of dimension {dim}",
            lhs.dim(),
            rhs.len()
        )));
    }
    lhs.clear();
    let last = n_int as isize;
    let delta = state_prev.delta();
    let phi = state_prev.phi();
    for m in 0..=last {
        // Ghost slots already hold the mirrored values, so the explicit side
        // can read the neighbours directly.
        let k = (m + 1) as usize;
        let (d_l, d_c, d_r) = (delta[k - 1], delta[k], delta[k + 1]);
        let (p_l, p_c, p_r) = (phi[k - 1], phi[k], phi[k + 1]);
        let c = compute_row_coefficients(consts, [d_l, d_c, d_r], dt, eps1, eps2);
        let v_row = 2 * m as usize;
        let u_row = v_row + 1;
        rhs[v_row] = c.w5 * (d_l + d_r) + c.w6 * d_c + c.w2 * (p_l + p_r) + c.w4 * p_c;
        rhs[u_row] = c.w2 * (d_l + d_r) + c.w4 * d_c - c.w7 * (p_l + p_r) - c.w8 * p_c;

        let left = 2 * if m == 0 { 1 } else { m as usize - 1 };
        let right = 2 * if m == last { n_int - 1 } else { m as usize + 1 };
        let center = v_row;
        for (col, w_dd, w_dp, u_dd, u_dp) in [
            (left, c.w1, c.w2, c.w2, c.w7),
            (center, c.w3, c.w4, c.w4, c.w8),
            (right, c.w1, c.w2, c.w2, c.w7),
        ] {
            lhs.add_in_band(v_row, col, w_dd);
            lhs.add_in_band(v_row, col + 1, w_dp);
            lhs.add_in_band(u_row, col, u_dd);
            lhs.add_in_band(u_row, col + 1, u_dp);
        }
    }
    Ok(())
}

/// `(A, B·x^n)` for one step.
pub fn assemble_system(
    consts: &NodalConstants,
    state_prev: &CoefficientState,
    dt: f64,
    eps1: f64,
    eps2: f64,
) -> Result<(BandedMatrix, Vec<f64>)> {
    let sys = assemble(consts, state_prev, dt, eps1, eps2)?;
    Ok((sys.lhs, sys.rhs))
}
