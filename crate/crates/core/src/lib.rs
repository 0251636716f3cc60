//! Optimal multi-refraction dividend and capital-injection strategies for a
//! spectrally positive jump diffusion with phase-type jumps.
//!
//! The surplus `Y` pays dividends at rate `δ1` while at or above `b` and
//! receives capital at rate `δ2` (unit cost `β > 1`) while below `a`. The
//! crate computes the scale functions of the three refracted processes in
//! closed form as exponential sums, selects the optimal `(a*, b*)`, assembles
//! the value function, and checks it numerically against the HJB inequality,
//! an independent reflected-process construction and a Monte Carlo oracle.
//!
//! ```no_run
//! use multirefraction::{solve_thresholds, value_function, Engine, ModelParams};
//!
//! let params = ModelParams::from_path("fixtures/case1.json")?;
//! let engine = Engine::new(params.build()?)?;
//! let th = solve_thresholds(&engine)?;
//! let v = value_function(&engine, &th)?;
//! println!("a* = {}, b* = {}, v(1) = {}", th.a_star, th.b_star, v.value(1.0)?);
//! # Ok::<(), multirefraction::Error>(())
//! ```
//!
//! The exponential-sum algebra and the quadrature routines are generic over
//! [`scalar::Real`]; the model, solver and simulator work in `f64`.

// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapters;
pub mod crosscheck;
pub mod error;
pub mod expsum;
pub mod format;
pub mod levy_model;
pub mod quadrature;
pub mod refraction;
pub mod scalar;
pub mod scale;
pub mod simulate;
pub mod solver;

pub use adapters::{
    refracted_reflected_limit, sweep, to_problem1, yin_limit, LimitValue, Problem2Params, SweepParameter, SweepTable,
};
pub use crosscheck::{crosscheck, Crosscheck, CrosscheckRow, Quantity};
pub use error::{Error, Result};
pub use expsum::{Domain, ExpSum, ExpTerm};
pub use levy_model::{LevyModel, ModelParams, PhaseTypeRep};
pub use refraction::{Engine, PiecewiseValue};
pub use scale::{build_scale_function, ScaleFunction};
pub use simulate::{estimate_ruin_laplace, simulate, simulate_many, simulate_value, SimConfig, SimEstimate};
pub use solver::{solve_thresholds, value_function, verify_optimality, Regime, Thresholds, VerificationReport};

/// Single-precision exponential sum.
pub type ExpSum32 = ExpSum<f32>;
/// Double-precision exponential sum.
pub type ExpSum64 = ExpSum<f64>;
