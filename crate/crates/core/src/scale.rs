//! q-scale functions of the three controlled processes.
//!
//! The roots of `ψ_k(s) = q` are the eigenvalues of a block companion matrix
//! obtained by writing `v = (sI - T)^{-1} t` as an auxiliary state, so no
//! polynomial coefficients are ever formed. With the roots in hand,
//!
//! ```text
//! W_k(x) = Σ_r e^{r x} / ψ_k'(r)
//! ```
//!
//! summed over the positive root `Φ_k(q)` and the roots with negative real part.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expsum::{Domain, ExpSum, ExpTerm};
use crate::levy_model::LevyModel;

/// Below this pairwise distance roots are treated as repeated.
pub const REPEATED_ROOT_GAP: f64 = 1e-7;
const NEWTON_STEPS: usize = 5;

/// Solutions of `ψ_k(s) = q`.
#[derive(Clone, Debug, PartialEq)]
pub struct RootSet {
    pub k: usize,
    pub q: f64,
    /// Φ_k(q), the unique positive root.
    pub phi: f64,
    /// Roots with negative real part, conjugate pairs adjacent.
    pub negative_roots: Vec<Complex64>,
    /// Smallest distance between any two roots.
    pub min_gap: f64,
}

impl RootSet {
    pub fn all(&self) -> impl Iterator<Item = Complex64> + '_ {
        std::iter::once(Complex64::new(self.phi, 0.0)).chain(self.negative_roots.iter().copied())
    }

    /// Largest `|ψ_k(r) - q|` over all roots.
    pub fn max_residual(&self, model: &LevyModel) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for r in self.all() {
            worst = worst.max((model.laplace_exponent(self.k, r)? - self.q).norm());
        }
        Ok(worst)
    }
}

fn expected_negative_roots(model: &LevyModel) -> usize {
    let m = if model.has_jumps() { model.jumps().m() } else { 0 };
    if model.sigma() > 0.0 {
        m + 1
    } else {
        m
    }
}

/// Eigenvalue problem whose spectrum is the root set of `ψ_k(s) = q`.
fn companion(model: &LevyModel, k: usize, q: f64) -> DMatrix<f64> {
    let mu = model.drift(k);
    let sig2 = model.sigma() * model.sigma();
    let (m, kappa, mass) =
        if model.has_jumps() { (model.jumps().m(), model.kappa(), model.jumps().mass()) } else { (0, 0.0, 0.0) };
    let jumps = model.jumps();
    let lead = kappa * mass + q;
    if sig2 > 0.0 {
        // state (v, u, w = s u):  s v = T v + t u,  s u = w,
        // s w = (2/σ²)[(κα·1 + q) u - μ w - κ α v]
        let n = m + 2;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] = jumps.sub_generator()[(i, j)];
            }
            a[(i, m)] = jumps.exit_rates()[i];
            a[(m + 1, i)] = -2.0 * kappa * jumps.alpha()[i] / sig2;
        }
        a[(m, m + 1)] = 1.0;
        a[(m + 1, m)] = 2.0 * lead / sig2;
        a[(m + 1, m + 1)] = -2.0 * mu / sig2;
        a
    } else {
        // state (v, u):  s u = (1/μ)[(κα·1 + q) u - κ α v]
        let n = m + 1;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] = jumps.sub_generator()[(i, j)];
            }
            a[(i, m)] = jumps.exit_rates()[i];
            a[(m, i)] = -kappa * jumps.alpha()[i] / mu;
        }
        a[(m, m)] = lead / mu;
        a
    }
}

fn polish(model: &LevyModel, k: usize, q: f64, mut s: Complex64) -> Complex64 {
    let residual = |s: Complex64| model.laplace_exponent(k, s).map(|v| v - q);
    let Ok(mut f) = residual(s) else { return s };
    for _ in 0..NEWTON_STEPS {
        let Ok(d) = model.laplace_exponent_derivative(k, s, 1) else { break };
        if d.norm() == 0.0 {
            break;
        }
        let next = s - f / d;
        match residual(next) {
            Ok(fn_) if fn_.norm() < f.norm() => {
                s = next;
                f = fn_;
            }
            _ => break,
        }
    }
    s
}

/// Roots of `ψ_k(s) = q` without the repeated-root check.
fn compute_roots(model: &LevyModel, k: usize, q: f64) -> Result<RootSet> {
    let a = companion(model, k, q);
    let eig: Vec<Complex64> = a.complex_eigenvalues().iter().copied().collect();
    let poles: Vec<Complex64> = if model.has_jumps() { model.jumps().eigenvalues() } else { Vec::new() };
    let scale = eig.iter().map(|z| z.norm()).fold(1.0, f64::max);

    let mut reals = Vec::new();
    let mut upper = Vec::new();
    let mut n_lower = 0usize;
    for z in eig {
        // a non-minimal representation can leave eigenvalues of T in the spectrum
        if poles.iter().any(|p| (z - p).norm() < 1e-9 * scale) {
            continue;
        }
        let z = polish(model, k, q, z);
        if z.im.abs() <= 1e-10 * (1.0 + z.re.abs()) {
            reals.push(z.re);
        } else if z.im > 0.0 {
            upper.push(z);
        } else {
            n_lower += 1;
        }
    }
    if n_lower != upper.len() {
        return Err(Error::RootCountMismatch { k, expected: 2 * upper.len(), found: upper.len() + n_lower });
    }

    let positive: Vec<f64> = reals.iter().copied().filter(|r| *r > 0.0).collect();
    let expected = expected_negative_roots(model);
    let mut negative_roots: Vec<Complex64> =
        reals.iter().filter(|r| **r < 0.0).map(|r| Complex64::new(*r, 0.0)).collect();
    negative_roots.sort_by(|x, y| y.re.total_cmp(&x.re));
    let mut pairs: Vec<Complex64> = upper.iter().filter(|z| z.re < 0.0).copied().collect();
    pairs.sort_by(|x, y| y.re.total_cmp(&x.re).then(x.im.total_cmp(&y.im)));
    for z in pairs {
        negative_roots.push(z);
        negative_roots.push(z.conj());
    }
    if positive.len() != 1 || upper.iter().any(|z| z.re >= 0.0) {
        return Err(Error::RootCountMismatch { k, expected: 1, found: positive.len() });
    }
    if negative_roots.len() != expected {
        return Err(Error::RootCountMismatch { k, expected, found: negative_roots.len() });
    }
    let phi = positive[0];

    let all: Vec<Complex64> = std::iter::once(Complex64::new(phi, 0.0)).chain(negative_roots.iter().copied()).collect();
    let mut min_gap = f64::INFINITY;
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            min_gap = min_gap.min((all[i] - all[j]).norm());
        }
    }

    let set = RootSet { k, q, phi, negative_roots, min_gap };
    let residual = set.max_residual(model)?;
    let magnitude = all.iter().map(|r| r.norm()).fold(1.0, f64::max);
    let sig2 = model.sigma() * model.sigma();
    let tol = 1e-9 * (1.0 + q) + 1e-14 * (model.drift(k).abs() * magnitude + sig2 * magnitude * magnitude);
    if residual > tol {
        return Err(Error::RootAccuracy { k, residual });
    }
    Ok(set)
}

/// Solves `ψ_k(s) = q` for `k ∈ {0, 1, 2}`.
pub fn solve_exponent_roots(model: &LevyModel, k: usize, q: f64) -> Result<RootSet> {
    let set = compute_roots(model, k, q)?;
    if set.min_gap < REPEATED_ROOT_GAP {
        return Err(Error::RepeatedRoots { k, min_gap: set.min_gap });
    }
    Ok(set)
}

/// `W_k`, `W̄_k`, `Z_k` as exponential sums on `x ≥ 0`, extended by
/// `W = 0`, `W̄ = 0`, `Z = 1` for `x < 0` at evaluation time.
#[derive(Clone, Debug)]
pub struct ScaleFunction {
    pub roots: RootSet,
    pub w: ExpSum,
    pub wbar: ExpSum,
    pub z: ExpSum,
    pub psi_prime_at_phi: f64,
    /// True when nearly repeated roots were merged into `x e^{rx}` terms.
    pub confluent: bool,
}

/// Coefficient of `e^{rx}` in the inverse Laplace transform of `1/(ψ_k(s) - q)`.
fn residue(model: &LevyModel, k: usize, r: Complex64) -> Result<Complex64> {
    if r.im < 0.0 {
        return Ok(residue(model, k, r.conj())?.conj());
    }
    Ok(model.laplace_exponent_derivative(k, r, 1)?.inv())
}

/// Builds the scale function of `X_k` at discount rate `q`.
pub fn build_scale_function(model: &LevyModel, k: usize, q: f64) -> Result<ScaleFunction> {
    let roots = compute_roots(model, k, q)?;
    let mut terms = Vec::new();
    let mut confluent = false;
    if roots.min_gap >= REPEATED_ROOT_GAP {
        for r in roots.all() {
            terms.push(ExpTerm::new(residue(model, k, r)?, r, 0));
        }
    } else {
        confluent = true;
        let all: Vec<Complex64> = roots.all().collect();
        let mut used = vec![false; all.len()];
        for i in 0..all.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            let cluster: Vec<usize> =
                (i + 1..all.len()).filter(|&j| !used[j] && (all[i] - all[j]).norm() < REPEATED_ROOT_GAP).collect();
            match cluster.as_slice() {
                [] => terms.push(ExpTerm::new(residue(model, k, all[i])?, all[i], 0)),
                [j] => {
                    used[*j] = true;
                    let r = (all[i] + all[*j]) * 0.5;
                    // double pole of 1/(ψ - q): 2/ψ'' (s-r)^{-2} - 2ψ'''/(3ψ''²) (s-r)^{-1}
                    let d2 = model.laplace_exponent_derivative(k, r, 2)?;
                    let d3 = model.laplace_exponent_derivative(k, r, 3)?;
                    terms.push(ExpTerm::new(d2.inv() * 2.0, r, 1));
                    terms.push(ExpTerm::new(-d3 * 2.0 / (d2 * d2 * 3.0), r, 0));
                }
                _ => return Err(Error::RepeatedRoots { k, min_gap: roots.min_gap }),
            }
        }
    }
    let w = ExpSum::from_terms(terms).with_domain(Domain::HalfLine { lo: 0.0 });
    let anti = w.antiderivative()?;
    let c0 = anti.value(0.0)?;
    let wbar = anti.sub(&ExpSum::constant(c0));
    let z = ExpSum::constant(1.0).add(&wbar.scale(q));
    let psi_prime_at_phi = model.laplace_exponent_derivative(k, Complex64::new(roots.phi, 0.0), 1)?.re;
    Ok(ScaleFunction { roots, w, wbar, z, psi_prime_at_phi, confluent })
}

impl ScaleFunction {
    pub fn phi(&self) -> f64 {
        self.roots.phi
    }

    /// `W(x)`, zero for `x < 0`.
    pub fn w(&self, x: f64) -> Result<f64> {
        self.w_deriv(x, 0)
    }

    /// Derivative of `W` of the given order; right limit at 0, zero for `x < 0`.
    pub fn w_deriv(&self, x: f64, order: u32) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        self.w.eval(x, order)
    }

    pub fn wbar(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        self.wbar.value(x)
    }

    pub fn z(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(1.0);
        }
        self.z.value(x)
    }
}

/// Boundary values and the large-x behaviour of a scale function against their
/// analytic values.
#[derive(Clone, Debug, Serialize)]
pub struct ScaleDiagnostics {
    pub k: usize,
    pub w0: f64,
    pub w0_expected: f64,
    pub w_prime0: f64,
    pub w_prime0_expected: f64,
    /// `(x, e^{-Φx} W(x))` at x = 10, 20, 40.
    pub normalized_growth: Vec<(f64, f64)>,
    pub growth_limit: f64,
    pub w0_ok: bool,
    pub w_prime0_ok: bool,
    pub growth_ok: bool,
}

pub fn boundary_and_asymptotics(model: &LevyModel, sf: &ScaleFunction) -> Result<ScaleDiagnostics> {
    let k = sf.roots.k;
    let (w0_expected, w_prime0_expected) = if model.sigma() > 0.0 {
        (0.0, 2.0 / (model.sigma() * model.sigma()))
    } else {
        let c = model.drift(k);
        (1.0 / c, (sf.roots.q + model.jump_intensity()) / (c * c))
    };
    let w0 = sf.w(0.0)?;
    let w_prime0 = sf.w_deriv(0.0, 1)?;
    let damped = sf.w.multiply(&ExpSum::exponential(1.0, -sf.phi()))?;
    let normalized_growth =
        [10.0, 20.0, 40.0].iter().map(|&x| damped.value(x).map(|v| (x, v))).collect::<Result<Vec<_>>>()?;
    let growth_limit = 1.0 / sf.psi_prime_at_phi;
    let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol * b.abs().max(1.0);
    Ok(ScaleDiagnostics {
        k,
        w0,
        w0_expected,
        w_prime0,
        w_prime0_expected,
        growth_ok: close(normalized_growth[2].1, growth_limit, 1e-6),
        normalized_growth,
        growth_limit,
        w0_ok: close(w0, w0_expected, 1e-6),
        w_prime0_ok: close(w_prime0, w_prime0_expected, 1e-6),
    })
}
