//! Selection of the optimal thresholds `(a*, b*)`.
//!
//! For fixed `b`, `γ̃(·, b)` is increasing, so `a(b)` (where the injection
//! threshold pastes) is found by bisection. `Γ̄(b) = Γ(a(b), b)` then decreases
//! to `-∞`, and `b*` is its root.

mod verify;

pub use verify::{generator, verify_optimality, CheckResult, GridSpec, VerificationReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expsum::ExpSum;
use crate::refraction::{Engine, PiecewiseValue};

const INNER_TOL: f64 = 1e-10;
const OUTER_TOL: f64 = 1e-9;
const MAX_DOUBLINGS: usize = 60;

/// Which constraints are active at the optimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `0 < a* < b*`
    Interior,
    /// `0 = a* < b*`
    LowerBoundary,
    /// `a* = b* = 0`
    Degenerate,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Interior => "interior",
            Regime::LowerBoundary => "lower_boundary",
            Regime::Degenerate => "degenerate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub a_star: f64,
    pub b_star: f64,
    pub regime: Regime,
    /// Γ(a*, b*), absent in the degenerate regime.
    pub gamma: Option<f64>,
    /// γ̃(a*, b*), absent in the degenerate regime.
    pub gamma_tilde: Option<f64>,
}

/// γ̃(·, b) with `l(·; b)` built once.
struct GammaTilde<'a> {
    engine: &'a Engine,
    l: ExpSum,
    b: f64,
}

impl<'a> GammaTilde<'a> {
    fn new(engine: &'a Engine, b: f64) -> Result<Self> {
        Ok(Self { engine, l: engine.kernel_l(b)?, b })
    }

    fn at(&self, a: f64) -> Result<f64> {
        let m = self.engine.model();
        let phi0 = self.engine.phi0();
        let l = if a >= self.b { 0.0 } else { self.l.value(a)? };
        Ok(phi0 * m.delta2() * (m.beta() * (-phi0 * self.b).exp() - (-phi0 * a).exp() - m.delta1() * phi0 * l))
    }
}

/// `a(b)`: zero when `γ̃(0, b) ≥ 0`, otherwise the root of `γ̃(·, b)` on `(0, b)`.
pub fn a_of_b(engine: &Engine, b: f64) -> Result<f64> {
    if b <= 0.0 {
        return Ok(0.0);
    }
    let gt = GammaTilde::new(engine, b)?;
    if gt.at(0.0)? >= 0.0 {
        return Ok(0.0);
    }
    if gt.at(b)? <= 0.0 {
        return Err(Error::BracketFailure(format!("γ̃(b, b) <= 0 at b = {b}")));
    }
    let (mut lo, mut hi) = (0.0, b);
    while hi - lo > INNER_TOL {
        let mid = 0.5 * (lo + hi);
        if gt.at(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `Γ̄(b) = Γ(a(b), b)`.
pub fn gamma_bar(engine: &Engine, b: f64) -> Result<f64> {
    engine.gamma_cap_integral(a_of_b(engine, b)?, b)
}

/// True when the problem degenerates to immediate liquidation-type behaviour:
/// `δ1/q ≤ ρ` or `(δ1/q - ρ) Φ0 ≤ 1`.
pub fn is_degenerate(engine: &Engine) -> bool {
    let m = engine.model();
    let margin = m.delta1() / m.q() - m.rho();
    margin <= 0.0 || margin * engine.phi0() - 1.0 <= 0.0
}

pub fn solve_thresholds(engine: &Engine) -> Result<Thresholds> {
    if is_degenerate(engine) {
        return Ok(Thresholds { a_star: 0.0, b_star: 0.0, regime: Regime::Degenerate, gamma: None, gamma_tilde: None });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut doublings = 0;
    while gamma_bar(engine, hi)? >= 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::BracketFailure(format!("Γ̄(b) stays nonnegative up to b = {hi}")));
        }
    }
    while hi - lo > OUTER_TOL {
        let mid = 0.5 * (lo + hi);
        if gamma_bar(engine, mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b_star = polish_root(engine, lo, hi)?;
    let a_star = a_of_b(engine, b_star)?;
    let regime = if a_star > 0.0 { Regime::Interior } else { Regime::LowerBoundary };
    Ok(Thresholds {
        a_star,
        b_star,
        regime,
        gamma: Some(engine.gamma_cap_integral(a_star, b_star)?),
        gamma_tilde: Some(engine.gamma_tilde(a_star, b_star)?),
    })
}

/// Illinois-type regula falsi on the final bisection bracket, to push |Γ̄| down
/// to rounding level (value continuity at 0 scales with it by `e^{Φ0 b}/Φ0`).
fn polish_root(engine: &Engine, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (mut f_lo, mut f_hi) = (gamma_bar(engine, lo)?, gamma_bar(engine, hi)?);
    let mut best = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    let mut side = 0i8;
    for _ in 0..40 {
        if best.1.abs() < 1e-14 || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(x > lo && x < hi) {
            break;
        }
        let fx = gamma_bar(engine, x)?;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx >= 0.0 {
            lo = x;
            f_lo = fx;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            f_hi = fx;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }
    Ok(best.0)
}

/// `v_{a*,b*}` assembled as `f - (e^{Φ0 b*}/Φ0) g` when `b* > 0`, and as
/// `δ1/q - (δ1/q - ρ) e^{-Φ0 x}` when `b* = 0`.
pub fn value_function(engine: &Engine, th: &Thresholds) -> Result<PiecewiseValue> {
    let m = engine.model();
    let phi0 = engine.phi0();
    if th.b_star > 0.0 {
        let f = engine.f_ab(th.a_star, th.b_star)?;
        let g = engine.g_ab(th.a_star, th.b_star)?;
        Ok(PiecewiseValue::combine(&f, 1.0, &g, -(phi0 * th.b_star).exp() / phi0))
    } else {
        let cap = m.delta1() / m.q();
        let v = ExpSum::constant(cap).add(&ExpSum::exponential(-(cap - m.rho()), -phi0));
        Ok(PiecewiseValue::new(0.0, 0.0, v.clone(), v.clone(), v))
    }
}
