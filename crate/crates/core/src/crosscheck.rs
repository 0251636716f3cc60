//! Analytic values against the Monte Carlo oracle.
//!
//! Every comparison allows `3·stderr` of sampling noise, the horizon
//! truncation bound, and a time-discretisation allowance `C√dt`. The
//! allowance is calibrated on the same run at `a = b = 0`, where both the
//! value `δ1/q - (δ1/q - ρ)e^{-Φ0 x}` and the ruin transform `e^{-Φ0 x}` are
//! known in closed form: it is the worst `|mc - exact| + 3·stderr` over the
//! calibration states, separately for each quantity.

use serde::Serialize;

use crate::error::Result;
use crate::refraction::Engine;
use crate::simulate::{simulate_many, SimConfig, SimEstimate};

pub const CROSSCHECK_CSV_HEADER: &str = "quantity,x0,a,b,analytic,mc_mean,stderr,allowance,passed";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Value,
    RuinLaplace,
}

impl Quantity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::Value => "value",
            Quantity::RuinLaplace => "ruin_laplace",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CrosscheckRow {
    pub quantity: Quantity,
    pub analytic: f64,
    pub estimate: SimEstimate,
    /// `3·stderr + truncation bound + C√dt`.
    pub allowance: f64,
    pub passed: bool,
}

impl CrosscheckRow {
    pub fn error(&self) -> f64 {
        (self.estimate.mean - self.analytic).abs()
    }

    pub fn csv_row(&self, fmt: impl Fn(f64) -> String) -> String {
        let e = &self.estimate;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.quantity.as_str(),
            fmt(e.x0),
            fmt(e.a),
            fmt(e.b),
            fmt(self.analytic),
            fmt(e.mean),
            fmt(e.stderr),
            fmt(self.allowance),
            self.passed
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Crosscheck {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Calibrated `C√dt` for the value.
    pub value_allowance: f64,
    /// Calibrated `C√dt` for the ruin transform.
    pub ruin_allowance: f64,
    pub truncation_bias: f64,
    /// Calibration rows first (`a = b = 0`), then each threshold pair.
    pub rows: Vec<CrosscheckRow>,
    pub passed: bool,
}

/// Runs the calibration states and every `(a, b)` pair at every starting point
/// in one common-random-number batch.
pub fn crosscheck(
    engine: &Engine,
    pairs: &[(f64, f64)],
    xs: &[f64],
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Crosscheck> {
    let m = engine.model();
    let mut cfgs = Vec::with_capacity((pairs.len() + 1) * xs.len());
    for &(a, b) in std::iter::once(&(0.0, 0.0)).chain(pairs) {
        for &x in xs {
            cfgs.push(SimConfig::new(m, x, a, b, dt, n_paths, seed));
        }
    }
    let results = simulate_many(m, &cfgs)?;
    let truncation = SimEstimate::truncation_bias(m, cfgs[0].t_max);

    let phi0 = engine.phi0();
    let cap = m.delta1() / m.q();
    let calibration = &results[..xs.len()];
    let mut value_allowance: f64 = 0.0;
    let mut ruin_allowance: f64 = 0.0;
    for (r, &x) in calibration.iter().zip(xs) {
        let decay = (-phi0 * x).exp();
        let (v, l) = (&r.value, &r.ruin_laplace);
        value_allowance = value_allowance.max((v.mean - (cap - (cap - m.rho()) * decay)).abs() + 3.0 * v.stderr);
        ruin_allowance = ruin_allowance.max((l.mean - decay).abs() + 3.0 * l.stderr);
    }

    let row = |quantity, analytic: f64, estimate: SimEstimate, c: f64| {
        let allowance = 3.0 * estimate.stderr + truncation + c;
        let passed = (estimate.mean - analytic).abs() <= allowance;
        CrosscheckRow { quantity, analytic, estimate, allowance, passed }
    };
    let mut rows = Vec::with_capacity(2 * results.len());
    for (chunk, &(a, b)) in results.chunks(xs.len()).zip(std::iter::once(&(0.0, 0.0)).chain(pairs)) {
        let v = engine.value_v_ab(a, b)?;
        let g = engine.g_ab(a, b)?;
        let g0 = g.value(0.0)?;
        for (r, &x) in chunk.iter().zip(xs) {
            rows.push(row(Quantity::Value, v.value(x)?, r.value, value_allowance));
            rows.push(row(Quantity::RuinLaplace, g.value(x)? / g0, r.ruin_laplace, ruin_allowance));
        }
    }
    let passed = rows.iter().all(|r| r.passed);
    Ok(Crosscheck { dt, n_paths, seed, value_allowance, ruin_allowance, truncation_bias: truncation, rows, passed })
}
