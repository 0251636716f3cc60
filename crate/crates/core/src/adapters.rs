//! Problem-2 reduction, the limiting value functions that anchor the
//! sensitivity studies, and parameter sweeps.
//!
//! In Problem 2 the surplus `Ỹ` pays two dividend streams, one at rate up to
//! `δ1` (unit value 1) and one at rate up to `δ2` (unit value `β`). Writing
//! `Y = Ỹ - δ2 t` and `r = δ2 - r̃` turns it into Problem 1 with
//! `ρ = ρ̃ - βδ2/q`, and the values differ by the constant `βδ2/q`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expsum::ExpSum;
use crate::levy_model::{LevyModel, ModelParams};
use crate::refraction::{Engine, PiecewiseValue};
use crate::solver::{solve_thresholds, value_function, Regime};

const ROOT_TOL: f64 = 1e-13;
const MAX_DOUBLINGS: usize = 60;
/// Tolerance of the pointwise monotonicity flags.
pub const MONOTONE_TOL: f64 = 1e-8;
/// Sup-norm distance under which a δ2 sweep is labelled Case L.
pub const CASE_L_TOL: f64 = 1e-6;

/// Problem-2 economics. `c_Ytilde` is the drift of `Ỹ` (so that
/// `Ỹ(t) = -c_Ytilde t + σB(t) + jumps`) and `rho_tilde` its terminal payoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem2Params {
    pub sigma: f64,
    #[serde(rename = "c_Ytilde")]
    pub c_y_tilde: f64,
    pub kappa: f64,
    pub alpha: Vec<f64>,
    #[serde(rename = "T")]
    pub t_matrix: Vec<Vec<f64>>,
    pub delta1: f64,
    pub delta2: f64,
    pub q: f64,
    pub beta: f64,
    pub rho_tilde: f64,
}

impl Problem2Params {
    /// Reads a Problem-1 parameter set as Problem-2 economics: `Ỹ` takes the
    /// surplus dynamics and `ρ̃` the terminal payoff.
    pub fn from_surplus(p: &ModelParams) -> Self {
        Self {
            sigma: p.sigma,
            c_y_tilde: p.c_y,
            kappa: p.kappa,
            alpha: p.alpha.clone(),
            t_matrix: p.t_matrix.clone(),
            delta1: p.delta1,
            delta2: p.delta2,
            q: p.q,
            beta: p.beta,
            rho_tilde: p.rho,
        }
    }

    /// The Problem-2 formulation whose reduction is exactly `p`.
    pub fn equivalent_to(p: &ModelParams) -> Self {
        Self { c_y_tilde: p.c_y - p.delta2, rho_tilde: p.rho + p.beta * p.delta2 / p.q, ..Self::from_surplus(p) }
    }

    /// `βδ2/q`, the gap between the Problem-2 and Problem-1 values.
    pub fn value_offset(&self) -> f64 {
        self.beta * self.delta2 / self.q
    }

    /// Problem-1 parameters `c_Y = c_Ytilde + δ2`, `ρ = ρ̃ - βδ2/q`.
    pub fn problem1_params(&self) -> Result<ModelParams> {
        if !(self.beta > 1.0) || !(self.q > 0.0) {
            return Err(Error::InvalidEconomics(format!(
                "Problem 2 requires beta > 1 and q > 0, got beta = {}, q = {}",
                self.beta, self.q
            )));
        }
        Ok(ModelParams {
            sigma: self.sigma,
            c_y: self.c_y_tilde + self.delta2,
            kappa: self.kappa,
            alpha: self.alpha.clone(),
            t_matrix: self.t_matrix.clone(),
            delta1: self.delta1,
            delta2: self.delta2,
            q: self.q,
            beta: self.beta,
            rho: self.rho_tilde - self.value_offset(),
        })
    }
}

/// Problem-1 model equivalent to `p2`.
pub fn to_problem1(p2: &Problem2Params) -> Result<LevyModel> {
    p2.problem1_params()?.build()
}

/// A limiting value function with its threshold.
#[derive(Clone, Debug)]
pub struct LimitValue {
    pub b_star: f64,
    /// Residual of the threshold equation at `b_star`.
    pub residual: f64,
    /// Value on `[0, b*)` (stored as both `lower` and `middle`) and `[b*, ∞)`.
    pub value: PiecewiseValue,
}

impl LimitValue {
    pub fn value_at(&self, x: f64) -> Result<f64> {
        self.value.value(x)
    }
}

fn require_zero_rho(engine: &Engine, what: &str) -> Result<()> {
    let rho = engine.model().rho();
    if rho != 0.0 {
        return Err(Error::InvalidEconomics(format!("{what} is defined for rho = 0, got rho = {rho}")));
    }
    Ok(())
}

/// Root of a function that is positive at 0 and eventually negative: doubling
/// from 1 for a bracket, then bisection.
fn decreasing_root(mut f: impl FnMut(f64) -> Result<f64>, what: &str) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut doublings = 0;
    while f(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::BracketFailure(format!("{what}: no sign change up to b = {hi}")));
        }
    }
    while hi - lo > ROOT_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `x ↦ δ1/q - e^{Φ0(b - x)}/Φ0`, the common form of both limits above the barrier.
fn above_barrier(engine: &Engine, b: f64) -> ExpSum {
    let m = engine.model();
    let phi0 = engine.phi0();
    ExpSum::constant(m.delta1() / m.q()).add(&ExpSum::exponential(-(phi0 * b).exp() / phi0, -phi0))
}

/// Payout at the maximal rate from time 0, `δ1/q (1 - e^{-Φ0 x})` (with `ρ = 0`).
fn immediate_payout(engine: &Engine) -> LimitValue {
    let m = engine.model();
    let cap = m.delta1() / m.q();
    let v = ExpSum::constant(cap).add(&ExpSum::exponential(-cap, -engine.phi0()));
    LimitValue { b_star: 0.0, residual: 0.0, value: PiecewiseValue::new(0.0, 0.0, v.clone(), v.clone(), v) }
}

/// Value of the refraction strategy without injections (the `β → ∞` and
/// `δ2 → 0` limit), with its optimal threshold.
///
/// With `H(s) = ∫_0^s W_1(z) e^{-Φ0 z} dz` and `s = b - x`,
/// `v(x) = -δ1 e^{Φ0 s} H(s) + (δ1/q) Z_1(s) - e^{Φ0 s}/Φ0`. Its slope at `b` is
/// 1 for every `b`, so the threshold is fixed by `v(0) = 0`:
/// `δ1 Z_1(b) - (q/Φ0) e^{Φ0 b} (1 + δ1 Φ0 H(b)) = 0`.
pub fn yin_limit(engine: &Engine) -> Result<LimitValue> {
    require_zero_rho(engine, "the no-injection limit")?;
    let m = engine.model();
    let (d1, q, phi0) = (m.delta1(), m.q(), engine.phi0());
    let sf1 = engine.scale(1);
    let damped = sf1.w.multiply(&ExpSum::exponential(1.0, -phi0))?;
    let anti = damped.antiderivative()?;
    let h = anti.sub(&ExpSum::constant(anti.value(0.0)?));

    let root_fn =
        |b: f64| -> Result<f64> { Ok(d1 * sf1.z(b)? - q / phi0 * (phi0 * b).exp() * (1.0 + d1 * phi0 * h.value(b)?)) };
    if root_fn(0.0)? <= 0.0 {
        return Ok(immediate_payout(engine));
    }
    let b = decreasing_root(root_fn, "no-injection threshold")?;

    let grow = ExpSum::exponential(1.0, phi0);
    let in_s = grow.multiply(&h)?.scale(-d1).add(&sf1.z.scale(d1 / q)).add(&grow.scale(-1.0 / phi0));
    let below = in_s.reflect(b);
    Ok(LimitValue {
        b_star: b,
        residual: root_fn(b)?,
        value: PiecewiseValue::new(0.0, b, below.clone(), below, above_barrier(engine, b)),
    })
}

/// Value of the refraction strategy at `b` combined with classical reflection
/// at 0 (the `δ2 → ∞` limit), with its optimal barrier: the root of
/// `β e^{-Φ0 b} = 1 + δ1 Φ0 l(0; b)`, and
/// `v_R(x) = δ1 Z_1(b - x)/q - e^{Φ0 b} (e^{-Φ0 x}/Φ0 + δ1 l(x; b))`.
pub fn refracted_reflected_limit(engine: &Engine) -> Result<LimitValue> {
    require_zero_rho(engine, "the refracted-reflected limit")?;
    let m = engine.model();
    let (d1, q, beta, phi0) = (m.delta1(), m.q(), m.beta(), engine.phi0());
    let root_fn = |b: f64| -> Result<f64> { Ok(beta * (-phi0 * b).exp() - 1.0 - d1 * phi0 * engine.l(0.0, b)?) };
    let b = decreasing_root(root_fn, "refracted-reflected barrier")?;

    let eb = (phi0 * b).exp();
    let below = engine
        .scale(1)
        .z
        .reflect(b)
        .scale(d1 / q)
        .sub(&ExpSum::exponential(eb / phi0, -phi0))
        .sub(&engine.kernel_l(b)?.scale(d1 * eb));
    Ok(LimitValue {
        b_star: b,
        residual: root_fn(b)?,
        value: PiecewiseValue::new(0.0, b, below.clone(), below, above_barrier(engine, b)),
    })
}

/// Parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Rho,
    Beta,
    Delta2,
    /// `δ1` of Problem 2, with the base parameters read as Problem-2
    /// economics (see [`Problem2Params::from_surplus`]); values are `ṽ`.
    Delta1Problem2,
}

/// Direction in which the value is expected to move as the parameter grows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Rho => "rho",
            SweepParameter::Beta => "beta",
            SweepParameter::Delta2 => "delta2",
            SweepParameter::Delta1Problem2 => "delta1_problem2",
        }
    }

    pub fn expected_direction(&self) -> Direction {
        match self {
            SweepParameter::Beta => Direction::Decreasing,
            _ => Direction::Increasing,
        }
    }

    /// Problem-1 parameters at `value` and the constant added to the values.
    fn apply(&self, base: &ModelParams, value: f64) -> Result<(ModelParams, f64)> {
        Ok(match self {
            SweepParameter::Rho => (base.with_rho(value), 0.0),
            SweepParameter::Beta => (ModelParams { beta: value, ..base.clone() }, 0.0),
            SweepParameter::Delta2 => (ModelParams { delta2: value, ..base.clone() }, 0.0),
            SweepParameter::Delta1Problem2 => {
                let p2 = Problem2Params { delta1: value, ..Problem2Params::from_surplus(base) };
                (p2.problem1_params()?, p2.value_offset())
            }
        })
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rho" => Ok(SweepParameter::Rho),
            "beta" => Ok(SweepParameter::Beta),
            "delta2" => Ok(SweepParameter::Delta2),
            "delta1_problem2" => Ok(SweepParameter::Delta1Problem2),
            other => Err(Error::Config(format!(
                "unknown sweep parameter '{other}' (expected rho, beta, delta2 or delta1_problem2)"
            ))),
        }
    }
}

/// Solution at one grid point.
#[derive(Clone, Debug, Serialize)]
pub struct SweepSolution {
    pub a_star: f64,
    pub b_star: f64,
    pub regime: Regime,
    /// Optimal value at each point of the table's x-grid.
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub param_value: f64,
    pub outcome: std::result::Result<SweepSolution, Error>,
}

/// Sup-norm distance between the last grid point's values and a limit.
#[derive(Clone, Debug, Serialize)]
pub struct LimitComparison {
    pub limit: &'static str,
    pub b_star: f64,
    pub sup_distance: f64,
}

/// Which `δ2 → ∞` limit a δ2 sweep approaches: liquidation (`L`, the
/// no-injection value, reached for every δ2) or reflection (`R`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LimitCase {
    L,
    R,
}

#[derive(Clone, Debug)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub xs: Vec<f64>,
    pub points: Vec<SweepPoint>,
    /// Pointwise monotonicity in the expected direction across consecutive
    /// solved grid points (ordered by parameter value), at [`MONOTONE_TOL`].
    pub monotone: bool,
    pub limits: Vec<LimitComparison>,
    pub limit_case: Option<LimitCase>,
}

pub const SWEEP_CSV_HEADER: &str = "param_name,param_value,a_star,b_star,regime,x,value";

impl SweepTable {
    /// One row per (grid point, x). A failed grid point gets a single row whose
    /// regime column reads `error: <message>` and whose numeric fields are empty.
    pub fn to_csv(&self, fmt: impl Fn(f64) -> String) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        let name = self.parameter.name();
        for p in &self.points {
            match &p.outcome {
                Ok(s) => {
                    for (x, v) in self.xs.iter().zip(&s.values) {
                        out.push_str(&format!(
                            "{name},{},{},{},{},{},{}\n",
                            fmt(p.param_value),
                            fmt(s.a_star),
                            fmt(s.b_star),
                            s.regime.as_str(),
                            fmt(*x),
                            fmt(*v)
                        ));
                    }
                }
                Err(e) => {
                    let msg = e.to_string().replace([',', '\n'], ";");
                    out.push_str(&format!("{name},{},,,error: {msg},,\n", fmt(p.param_value)));
                }
            }
        }
        out
    }

    pub fn solved(&self) -> impl Iterator<Item = (f64, &SweepSolution)> {
        self.points.iter().filter_map(|p| p.outcome.as_ref().ok().map(|s| (p.param_value, s)))
    }
}

fn solve_point(parameter: SweepParameter, base: &ModelParams, value: f64, xs: &[f64]) -> Result<SweepSolution> {
    let (params, offset) = parameter.apply(base, value)?;
    let engine = Engine::new(params.build()?)?;
    let th = solve_thresholds(&engine)?;
    let v = value_function(&engine, &th)?;
    let values = xs.iter().map(|&x| Ok(v.value(x)? + offset)).collect::<Result<_>>()?;
    Ok(SweepSolution { a_star: th.a_star, b_star: th.b_star, regime: th.regime, values })
}

fn is_monotone(direction: Direction, points: &[(f64, &SweepSolution)]) -> bool {
    let mut sorted = points.to_vec();
    sorted.sort_by(|l, r| l.0.total_cmp(&r.0));
    sorted.windows(2).all(|w| {
        w[0].1.values.iter().zip(&w[1].1.values).all(|(lo, hi)| match direction {
            Direction::Increasing => hi - lo >= -MONOTONE_TOL,
            Direction::Decreasing => hi - lo <= MONOTONE_TOL,
        })
    })
}

type LimitFn = fn(&Engine) -> Result<LimitValue>;

fn sup_distance(xs: &[f64], values: &[f64], limit: &LimitValue) -> Result<f64> {
    xs.iter().zip(values).try_fold(0.0f64, |acc, (&x, v)| Ok(acc.max((v - limit.value_at(x)?).abs())))
}

/// Solves every grid point (in parallel; rows stay in grid order) and
/// evaluates the optimal value on `xs`. A failing grid point is recorded and
/// the sweep continues.
///
/// For β sweeps with `ρ = 0` the largest β is compared with the no-injection
/// limit; for δ2 sweeps with `ρ = 0` the largest δ2 is compared with both
/// `δ2 → ∞` candidates and labelled Case L when it coincides with the
/// no-injection value, Case R otherwise.
pub fn sweep(base: &ModelParams, parameter: SweepParameter, grid: &[f64], xs: &[f64]) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    if xs.is_empty() {
        return Err(Error::Config("sweep x-grid is empty".into()));
    }
    let points: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&value| SweepPoint { param_value: value, outcome: solve_point(parameter, base, value, xs) })
        .collect();

    let solved: Vec<(f64, &SweepSolution)> =
        points.iter().filter_map(|p| p.outcome.as_ref().ok().map(|s| (p.param_value, s))).collect();
    let monotone = is_monotone(parameter.expected_direction(), &solved);

    let mut limits = Vec::new();
    let mut limit_case = None;
    let last = solved.iter().copied().max_by(|l, r| l.0.total_cmp(&r.0));
    if let (Some((value, sol)), true) = (last, base.rho == 0.0) {
        let candidates: &[(&'static str, LimitFn)] = match parameter {
            SweepParameter::Beta => &[("no_injection", yin_limit)],
            SweepParameter::Delta2 => {
                &[("no_injection", yin_limit), ("refracted_reflected", refracted_reflected_limit)]
            }
            _ => &[],
        };
        if !candidates.is_empty() {
            let (params, _) = parameter.apply(base, value)?;
            let engine = Engine::new(params.build()?)?;
            for (name, limit_fn) in candidates {
                let lim = limit_fn(&engine)?;
                limits.push(LimitComparison {
                    limit: name,
                    b_star: lim.b_star,
                    sup_distance: sup_distance(xs, &sol.values, &lim)?,
                });
            }
        }
        if parameter == SweepParameter::Delta2 {
            // Nearest-in-sup-norm is not usable here: near 0 the solved value is
            // pinned at ρ while v_R(0) > 0, and that boundary layer dominates.
            // In Case L the solved value is the no-injection value itself.
            limit_case = Some(if limits[0].sup_distance <= CASE_L_TOL { LimitCase::L } else { LimitCase::R });
        }
    }
    let table = SweepTable { parameter, xs: xs.to_vec(), points, monotone, limits, limit_case };
    Ok(table)
}

/// `n` equally spaced points on `[0, x_max]`.
pub fn uniform_grid(x_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| x_max * i as f64 / (n - 1) as f64).collect(),
    }
}
