//! Extended cubic B-spline collocation for the nonlinear Klein–Gordon equation
//!
//! ```text
//! u_tt − u_xx − ε₁u − ε₂u³ = 0,   u_x(a, t) = u_x(b, t) = 0
//! ```
//!
//! The equation is split into `u_t = v`, `v_t = u_xx + ε₁u + ε₂u³`, both
//! fields are expanded in extended cubic B-splines, and the system is marched
//! with a Crank–Nicolson step whose cubic term is linearised so each step is
//! a single banded solve.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod basis;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod lambda_scan;
pub mod linalg;
pub mod output;
pub mod problems;
pub mod timestepper;

pub use basis::{nodal_constants, BasisConfig, NodalConstants, Order};
pub use config::{RunConfig, TableConfig};
pub use diagnostics::DiagnosticsReport;
pub use error::{Error, Result};
pub use lambda_scan::{scan, ScanConfig, ScanResult};
pub use linalg::{BandedMatrix, Pivoting};
pub use problems::{solitary_wave, traveling_wave, ProblemSpec};
pub use timestepper::{initialize, run, CoefficientState, Observer, RunSettings, Stepper};
