//! Gauss–Legendre quadrature, fixed and adaptive.
//!
//! This is the independent oracle against which the closed-form exponential-sum
//! calculus is tested, and the workhorse for the jump integral of the generator.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule by Newton iteration on the Legendre polynomial `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule on `[a, b]`.
    pub fn integrate<T: Real, F: FnMut(T) -> T>(&self, f: &mut F, a: T, b: T) -> T {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += T::lit(*w) * f(mid + half * T::lit(*x));
        }
        acc * half
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule10() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(10))
}

/// Absolute and relative targets for adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// Maximum bisection depth of any subinterval.
    pub max_depth: u32,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-13, rel: 1e-12, max_depth: 40 }
    }
}

/// Adaptive 10-point Gauss–Legendre on `[a, b]`: each interval is split in half
/// until the halves agree with the whole to the local share of the tolerance.
pub fn integrate<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, tol: Tolerance) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let rule = rule10();
    let whole = rule.integrate(&mut f, a, b);
    let target = T::lit(tol.abs).max(T::lit(tol.rel) * whole.abs());
    let mut budget = 200_000usize;
    refine(&mut f, rule, a, b, whole, target, b - a, tol.max_depth, &mut budget)
}

#[allow(clippy::too_many_arguments)]
fn refine<T: Real, F: FnMut(T) -> T>(
    f: &mut F,
    rule: &GaussLegendre,
    a: T,
    b: T,
    whole: T,
    target: T,
    total: T,
    depth: u32,
    budget: &mut usize,
) -> Result<T> {
    let mid = (a + b) * T::lit(0.5);
    let left = rule.integrate(f, a, mid);
    let right = rule.integrate(f, mid, b);
    let sum = left + right;
    // Below a few ulps of the pieces the difference is rounding, not error.
    let noise = T::lit(4.0) * T::epsilon() * (left.abs() + right.abs());
    let local = (target * ((b - a) / total).abs()).max(noise);
    if (sum - whole).abs() <= local || mid == a || mid == b {
        return Ok(sum);
    }
    if !sum.is_finite() {
        return Err(Error::QuadratureFailure(format!("non-finite integrand on [{a}, {b}]")));
    }
    if depth == 0 || *budget == 0 {
        return Err(Error::QuadratureFailure(format!("no convergence on [{a}, {b}]: estimates {sum} and {whole}")));
    }
    *budget -= 1;
    let l = refine(f, rule, a, mid, left, target, total, depth - 1, budget)?;
    let r = refine(f, rule, mid, b, right, target, total, depth - 1, budget)?;
    Ok(l + r)
}

/// Adaptive integration over consecutive segments of a sorted breakpoint list,
/// so kinks of the integrand sit on segment boundaries.
pub fn integrate_segments<T: Real, F: FnMut(T) -> T>(mut f: F, breakpoints: &[T], tol: Tolerance) -> Result<T> {
    let mut acc = T::zero();
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            acc += integrate(&mut f, w[0], w[1], tol)?;
        }
    }
    Ok(acc)
}

/// Sorts `points`, keeps those inside `[lo, hi]`, and adds the end points.
pub fn breakpoints<T: Real>(lo: T, hi: T, points: &[T]) -> Vec<T> {
    let mut v: Vec<T> = points.iter().copied().filter(|p| *p > lo && *p < hi).collect();
    v.push(lo);
    v.push(hi);
    v.sort_by(|x, y| x.partial_cmp(y).expect("breakpoints must not be NaN"));
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(5);
        // exact up to degree 9
        let v = rule.integrate(&mut |x: f64| x.powi(9) + 3.0 * x.powi(8), 0.0, 1.0);
        assert!((v - (0.1 + 3.0 / 9.0)).abs() < 1e-15);
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaks_and_kinks() {
        let v = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, Tolerance::default()).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() < 1e-9 * exact);

        let v =
            integrate_segments(|x: f64| (x - 0.3).abs(), &breakpoints(0.0, 1.0, &[0.3]), Tolerance::default()).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn divergent_integrand_is_reported() {
        let r = integrate(|x: f64| 1.0 / x, 0.0, 1.0, Tolerance { max_depth: 12, ..Default::default() });
        assert!(matches!(r, Err(Error::QuadratureFailure(_))));
    }
}
