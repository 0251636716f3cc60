//! Monte Carlo oracle for the controlled surplus
//! `V(t) = Y(t) - δ1 ∫1{V ≥ b} ds + δ2 ∫1{V < a} ds`.
//!
//! Discounting at rate `q` is realised as killing at an independent
//! `Exp(q)` time `e_q`: `E ∫_0^κ e^{-qt} dL = E ∫_0^{κ ∧ e_q} dL` and
//! `E e^{-qκ} = P(κ < e_q)`. Both identities are exact, and a path only has to
//! be followed for `1/q` time units on average instead of to a long horizon.
//! `t_max` still caps every path.
//!
//! Each path owns a ChaCha8 stream selected by its index, and path results are
//! reduced in index order, so estimates are bit-identical for a fixed seed
//! regardless of thread count. Several threshold/start configurations can be
//! driven by the same paths (common random numbers) at little extra cost.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy_model::{LevyModel, PhaseTypeRep};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub x0: f64,
    pub a: f64,
    pub b: f64,
}

impl SimConfig {
    /// Config with the shortest admissible horizon `100/q`.
    pub fn new(model: &LevyModel, x0: f64, a: f64, b: f64, dt: f64, n_paths: usize, seed: u64) -> Self {
        Self { dt, t_max: 100.0 / model.q(), n_paths, seed, x0, a, b }
    }

    pub fn validate(&self, model: &LevyModel) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSimConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1".into());
        }
        if !(self.t_max >= 100.0 / model.q() * (1.0 - 1e-12)) {
            return bad(format!("t_max must be at least 100/q = {}", 100.0 / model.q()));
        }
        if !(self.a >= 0.0 && self.b >= self.a && self.b.is_finite()) {
            return bad(format!("thresholds must satisfy 0 <= a <= b, got a = {}, b = {}", self.a, self.b));
        }
        if !(self.x0 >= 0.0 && self.x0.is_finite()) {
            return bad(format!("x0 must be nonnegative, got {}", self.x0));
        }
        Ok(())
    }
}

/// A Monte Carlo point estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimEstimate {
    pub x0: f64,
    pub a: f64,
    pub b: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// Fraction of paths ruined before being killed.
    pub ruin_fraction: f64,
    /// Mean ruin time over those paths (NaN if none).
    pub mean_ruin_time: f64,
    pub dt: f64,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "x0,a,b,mean,stderr,n_paths,dt,seed,ruin_fraction";

impl SimEstimate {
    pub fn csv_row(&self, fmt: impl Fn(f64) -> String) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            fmt(self.x0),
            fmt(self.a),
            fmt(self.b),
            fmt(self.mean),
            fmt(self.stderr),
            self.n_paths,
            fmt(self.dt),
            self.seed,
            fmt(self.ruin_fraction)
        )
    }

    /// Upper bound on the horizon-truncation bias, `(δ1 + βδ2 + q|ρ|) e^{-q t_max}/q`.
    pub fn truncation_bias(model: &LevyModel, t_max: f64) -> f64 {
        (model.delta1() + model.beta() * model.delta2() + model.q() * model.rho().abs()) * (-model.q() * t_max).exp()
            / model.q()
    }
}

/// Both estimates of one simulation pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimResult {
    pub value: SimEstimate,
    pub ruin_laplace: SimEstimate,
}

/// Table-driven sampler of phase-type absorption times.
#[derive(Clone, Debug)]
pub struct PhaseTypeSampler {
    /// cumulative initial law; the defect `1 - α·1` means "size 0"
    start: Vec<f64>,
    rates: Vec<f64>,
    /// per state: cumulative jump probabilities to states 0..m, absorption last
    moves: Vec<Vec<f64>>,
}

impl PhaseTypeSampler {
    pub fn new(rep: &PhaseTypeRep) -> Self {
        let m = rep.m();
        let t = rep.sub_generator();
        let mut start = Vec::with_capacity(m);
        let mut acc = 0.0;
        for a in rep.alpha().iter() {
            acc += a;
            start.push(acc);
        }
        let mut rates = Vec::with_capacity(m);
        let mut moves = Vec::with_capacity(m);
        for i in 0..m {
            let rate = -t[(i, i)];
            let mut row = Vec::with_capacity(m);
            let mut acc = 0.0;
            for j in 0..m {
                if j != i {
                    acc += t[(i, j)] / rate;
                }
                row.push(acc);
            }
            rates.push(rate);
            moves.push(row);
        }
        Self { start, rates, moves }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let Some(mut state) = self.start.iter().position(|c| u < *c) else { return 0.0 };
        let mut time = 0.0;
        loop {
            let e: f64 = Exp1.sample(rng);
            time += e / self.rates[state];
            let u: f64 = rng.random();
            match self.moves[state].iter().position(|c| u < *c) {
                Some(next) => state = next,
                None => return time,
            }
        }
    }
}

/// One draw of a phase-type absorption time.
pub fn sample_phase_type<R: Rng + ?Sized>(rng: &mut R, rep: &PhaseTypeRep) -> f64 {
    PhaseTypeSampler::new(rep).sample(rng)
}

#[derive(Clone, Copy, Default)]
struct PathOutcome {
    payoff: f64,
    ruined: bool,
    ruin_time: f64,
}

/// One controlled surplus driven by the shared noise of a path.
#[derive(Clone, Copy)]
struct Member {
    v: f64,
    a: f64,
    b: f64,
    payoff: f64,
    done: bool,
}

struct PathSim<'a> {
    model: &'a LevyModel,
    cfgs: &'a [SimConfig],
    sampler: PhaseTypeSampler,
    jump_clock: Option<Exp<f64>>,
    kill_clock: Exp<f64>,
}

impl PathSim<'_> {
    /// Path `index` for every config at once. The random draws (killing time,
    /// one Gaussian per step, the jump sequence) do not depend on the configs,
    /// so each member sees exactly what it would see if simulated alone.
    fn run(&self, index: usize) -> Vec<PathOutcome> {
        let m = self.model;
        let base = &self.cfgs[0];
        let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
        rng.set_stream(index as u64);

        let kill: f64 = self.kill_clock.sample(&mut rng);
        let horizon = kill.min(base.t_max);
        let mut next_jump = self.jump_clock.map_or(f64::INFINITY, |c| c.sample(&mut rng));

        let mut out = vec![PathOutcome { payoff: 0.0, ruined: false, ruin_time: f64::NAN }; self.cfgs.len()];
        let mut members: Vec<Member> =
            self.cfgs.iter().map(|c| Member { v: c.x0, a: c.a, b: c.b, payoff: 0.0, done: false }).collect();
        let mut alive = members.len();
        for (mem, o) in members.iter_mut().zip(out.iter_mut()) {
            if mem.v < 0.0 {
                mem.done = true;
                alive -= 1;
                *o = PathOutcome { payoff: m.rho(), ruined: true, ruin_time: 0.0 };
            }
        }

        let (d1, d2, beta, c) = (m.delta1(), m.delta2(), m.beta(), m.c_y());
        let dt = base.dt;
        let sd = m.sigma() * dt.sqrt();
        // full steps on the grid k·dt, then one partial step up to the horizon
        let full_steps = (horizon / dt).floor() as u64;
        let last = horizon - full_steps as f64 * dt;
        let steps = full_steps + u64::from(last > 0.0);
        let mut k = 0;
        while alive > 0 && k < steps {
            k += 1;
            let (t, h, sd) =
                if k <= full_steps { (k as f64 * dt, dt, sd) } else { (horizon, last, sd * (last / dt).sqrt()) };
            let z: f64 = if sd > 0.0 { StandardNormal.sample(&mut rng) } else { 0.0 };
            let mut jump = 0.0;
            while next_jump <= t {
                jump += self.sampler.sample(&mut rng);
                next_jump += self.jump_clock.expect("jump clock exists when a jump is due").sample(&mut rng);
            }
            for (mem, o) in members.iter_mut().zip(out.iter_mut()).filter(|(mem, _)| !mem.done) {
                // Control from the start-of-step region, computed without
                // branches: the surplus hovers around the thresholds.
                let above = f64::from(u8::from(mem.v >= mem.b));
                let below = f64::from(u8::from(mem.v < mem.a));
                mem.payoff += h * (d1 * above - beta * d2 * below);
                mem.v += (d2 * below - d1 * above - c) * h + sd * z + jump;
                if mem.v < 0.0 {
                    // ruined before the killing time, so e^{-qκ} averages to 1 on this event
                    mem.done = true;
                    alive -= 1;
                    *o = PathOutcome { payoff: mem.payoff + m.rho(), ruined: true, ruin_time: t };
                }
            }
        }
        for (mem, o) in members.iter().zip(out.iter_mut()).filter(|(mem, _)| !mem.done) {
            o.payoff = mem.payoff;
        }
        out
    }
}

fn summarize(cfg: &SimConfig, samples: impl Iterator<Item = f64>, ruin: (usize, f64)) -> SimEstimate {
    let n = cfg.n_paths as f64;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for s in samples {
        sum += s;
        sum_sq += s * s;
    }
    let mean = sum / n;
    let var = if cfg.n_paths > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    let (n_ruined, total_time) = ruin;
    SimEstimate {
        x0: cfg.x0,
        a: cfg.a,
        b: cfg.b,
        mean,
        stderr: (var / n).sqrt(),
        n_paths: cfg.n_paths,
        ruin_fraction: n_ruined as f64 / n,
        mean_ruin_time: if n_ruined > 0 { total_time / n_ruined as f64 } else { f64::NAN },
        dt: cfg.dt,
        seed: cfg.seed,
    }
}

/// Simulates several `(x0, a, b)` configurations on common random numbers.
///
/// All configs must share `dt`, `t_max`, `n_paths` and `seed`. Every result is
/// bit-identical to what [`simulate`] returns for that config alone; only the
/// cost is shared.
pub fn simulate_many(model: &LevyModel, cfgs: &[SimConfig]) -> Result<Vec<SimResult>> {
    let Some(base) = cfgs.first() else { return Ok(Vec::new()) };
    for cfg in cfgs {
        cfg.validate(model)?;
        if (cfg.dt, cfg.t_max, cfg.n_paths, cfg.seed) != (base.dt, base.t_max, base.n_paths, base.seed) {
            return Err(Error::InvalidSimConfig("batched configs must share dt, t_max, n_paths and seed".into()));
        }
    }
    let sim = PathSim {
        model,
        cfgs,
        sampler: PhaseTypeSampler::new(model.jumps()),
        jump_clock: model.has_jumps().then(|| Exp::new(model.kappa()).expect("kappa > 0")),
        kill_clock: Exp::new(model.q()).expect("q > 0"),
    };
    let outcomes: Vec<PathOutcome> = (0..base.n_paths).into_par_iter().flat_map_iter(|i| sim.run(i)).collect();
    let width = cfgs.len();
    Ok(cfgs
        .iter()
        .enumerate()
        .map(|(j, cfg)| {
            let column = || outcomes.iter().skip(j).step_by(width);
            let ruined = column().filter(|o| o.ruined).count();
            let ruin_time: f64 = column().filter(|o| o.ruined).map(|o| o.ruin_time).sum();
            SimResult {
                value: summarize(cfg, column().map(|o| o.payoff), (ruined, ruin_time)),
                ruin_laplace: summarize(cfg, column().map(|o| if o.ruined { 1.0 } else { 0.0 }), (ruined, ruin_time)),
            }
        })
        .collect())
}

/// Simulates `n_paths` controlled paths once and returns both the NPV estimate
/// and the ruin-time Laplace transform estimate.
pub fn simulate(model: &LevyModel, cfg: &SimConfig) -> Result<SimResult> {
    Ok(simulate_many(model, std::slice::from_ref(cfg))?.remove(0))
}

/// Estimate of `v_{a,b}(x0)`.
pub fn simulate_value(model: &LevyModel, cfg: &SimConfig) -> Result<SimEstimate> {
    Ok(simulate(model, cfg)?.value)
}

/// Estimate of `E_{x0} e^{-q κ}`.
pub fn estimate_ruin_laplace(model: &LevyModel, cfg: &SimConfig) -> Result<SimEstimate> {
    Ok(simulate(model, cfg)?.ruin_laplace)
}
