//! Exact calculus on exponential sums
//!
//! ```text
//! f(x) = Σ_i c_i · x^{p_i} · e^{r_i x}
//! ```
//!
//! with complex coefficients `c_i`, complex rates `r_i` and small integer powers
//! `p_i`. Every scale function of a phase-type Lévy model has this form, and the
//! class is closed under products, reflections, shifts, antiderivatives and
//! convolutions, so every functional built on top of the scale functions stays
//! exact.
//!
//! Terms are merged on construction under the key `(rate rounded to 1e-10, power)`.
//! Real-valuedness is only enforced when a sum is evaluated: the imaginary part
//! of the result must vanish up to rounding, which holds as long as complex
//! rates come in conjugate pairs with conjugate coefficients.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest polynomial power a term may carry.
pub const MAX_POWER: u32 = 8;

/// Rates closer than this (after rounding) share a merge key.
const MERGE_SCALE: f64 = 1e10;
/// A merged coefficient smaller than this fraction of its inputs is a cancellation.
const PRUNE_REL: f64 = 1e-14;
/// Rates below this magnitude integrate as pure polynomials.
const ZERO_RATE: f64 = 1e-12;
/// Definite integrals use the Taylor series when `|r|·max(|lo|, |hi|)` is at most this.
const SERIES_REACH: f64 = 2.0;
/// Enough series terms to reach double precision at `SERIES_REACH`.
const SERIES_TERMS: u32 = 40;
/// Rate differences below this are treated as confluent inside convolutions.
const CONFLUENT_GAP: f64 = 1e-8;
/// Relative imaginary residue tolerated on evaluation.
const RESIDUE_REL: f64 = 1e-10;

/// One summand `coeff · x^power · e^{rate·x}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpTerm<T = f64> {
    pub coeff: Complex<T>,
    pub rate: Complex<T>,
    pub power: u32,
}

impl<T: Real> ExpTerm<T> {
    pub fn new(coeff: Complex<T>, rate: Complex<T>, power: u32) -> Self {
        Self { coeff, rate, power }
    }

    pub fn real(coeff: T, rate: T, power: u32) -> Self {
        Self::new(Complex::new(coeff, T::zero()), Complex::new(rate, T::zero()), power)
    }

    /// Value of the `order`-th derivative at `x`.
    fn eval(&self, x: T, order: u32) -> Complex<T> {
        let exp = (self.rate * x).exp();
        if order == 0 {
            return self.coeff * x.powi(self.power as i32) * exp;
        }
        // d^n [x^p e^{rx}] = e^{rx} Σ_j C(n,j) p!/(p-j)! x^{p-j} r^{n-j}
        let mut acc = Complex::zero();
        for j in 0..=order.min(self.power) {
            let factor = T::lit(binomial(order, j) * falling(self.power, j));
            let poly = x.powi((self.power - j) as i32);
            acc += self.rate.powu(order - j) * (factor * poly);
        }
        self.coeff * acc * exp
    }

    /// `∫_lo^hi` by the series `Σ_k r^k/k! (hi^{n} - lo^{n})/n` with `n = p + k + 1`,
    /// together with the matching magnitude bound.
    fn series_integral(&self, lo: T, hi: T) -> (Complex<T>, T) {
        let mut acc = Complex::zero();
        let mut mag = T::zero();
        let mut rk = Complex::<T>::one();
        let (r_abs, reach) = (self.rate.norm(), lo.abs().max(hi.abs()));
        for k in 0..SERIES_TERMS {
            if k > 0 {
                rk = rk * self.rate / T::lit(k as f64);
            }
            let n = (self.power + k + 1) as i32;
            let span = (hi.powi(n) - lo.powi(n)) / T::lit(n as f64);
            acc += rk * span;
            mag += rk.norm() * (hi.abs().powi(n) + lo.abs().powi(n)) / T::lit(n as f64);
            if rk.norm() * reach.powi(n) <= T::epsilon() * mag.max(T::min_positive_value()) || r_abs.is_zero() {
                break;
            }
        }
        (self.coeff * acc, self.coeff.norm() * mag)
    }

    fn key(&self) -> (i64, i64, u32) {
        (
            (self.rate.re.as_f64() * MERGE_SCALE).round() as i64,
            (self.rate.im.as_f64() * MERGE_SCALE).round() as i64,
            self.power,
        )
    }
}

/// Where an [`ExpSum`] is meant to be evaluated. Purely informational: evaluation
/// outside the domain is allowed and returns the analytic continuation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain<T = f64> {
    Line,
    HalfLine { lo: T },
    Interval { lo: T, hi: T },
}

impl<T: Real> Domain<T> {
    fn bounds(&self) -> (T, T) {
        match *self {
            Domain::Line => (T::neg_infinity(), T::infinity()),
            Domain::HalfLine { lo } => (lo, T::infinity()),
            Domain::Interval { lo, hi } => (lo, hi),
        }
    }

    fn from_bounds(lo: T, hi: T) -> Self {
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => Domain::Line,
            (true, false) => Domain::HalfLine { lo },
            (true, true) => Domain::Interval { lo, hi },
            // (-inf, hi] never arises from the operations below except by reflection
            (false, true) => Domain::Line,
        }
    }

    fn intersect(&self, other: &Self) -> Self {
        let (a0, a1) = self.bounds();
        let (b0, b1) = other.bounds();
        Self::from_bounds(a0.max(b0), a1.min(b1))
    }

    /// Domain of `x ↦ f(s - x)` (reflect) or `x ↦ f(x - s)`.
    fn mapped(&self, s: T, reflect: bool) -> Self {
        let (lo, hi) = self.bounds();
        if reflect {
            Self::from_bounds(s - hi, s - lo)
        } else {
            Self::from_bounds(lo + s, hi + s)
        }
    }

    pub fn contains(&self, x: T) -> bool {
        let (lo, hi) = self.bounds();
        x >= lo && x <= hi
    }
}

/// A finite exponential sum. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpSum<T = f64> {
    terms: Vec<ExpTerm<T>>,
    domain: Domain<T>,
}

impl<T: Real> Default for ExpSum<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real> ExpSum<T> {
    pub fn zero() -> Self {
        Self { terms: Vec::new(), domain: Domain::Line }
    }

    pub fn constant(c: T) -> Self {
        Self::from_terms([ExpTerm::real(c, T::zero(), 0)])
    }

    /// `coeff · e^{rate·x}`
    pub fn exponential(coeff: T, rate: T) -> Self {
        Self::from_terms([ExpTerm::real(coeff, rate, 0)])
    }

    /// Builds a sum from raw terms, merging like terms.
    pub fn from_terms<I: IntoIterator<Item = ExpTerm<T>>>(terms: I) -> Self {
        Self { terms: normalize(terms), domain: Domain::Line }
    }

    pub fn with_domain(mut self, domain: Domain<T>) -> Self {
        self.domain = domain;
        self
    }

    pub fn domain(&self) -> Domain<T> {
        self.domain
    }

    pub fn terms(&self) -> &[ExpTerm<T>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_power(&self) -> u32 {
        self.terms.iter().map(|t| t.power).max().unwrap_or(0)
    }

    fn derived(&self, terms: impl IntoIterator<Item = ExpTerm<T>>, domain: Domain<T>) -> Self {
        Self { terms: normalize(terms), domain }
    }

    /// Pointwise sum.
    pub fn add(&self, other: &Self) -> Self {
        let terms = self.terms.iter().chain(other.terms.iter()).copied();
        self.derived(terms, self.domain.intersect(&other.domain))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(-T::one())
    }

    pub fn scale(&self, c: T) -> Self {
        self.scale_complex(Complex::new(c, T::zero()))
    }

    pub fn scale_complex(&self, c: Complex<T>) -> Self {
        let terms = self.terms.iter().map(|t| ExpTerm { coeff: t.coeff * c, ..*t });
        self.derived(terms, self.domain)
    }

    /// `x ↦ c·f(s - x)` when `reflect`, otherwise `x ↦ c·f(x - s)`.
    ///
    /// The polynomial factor is re-expanded binomially in powers of `x`.
    pub fn scale_shift(&self, c: T, s: T, reflect: bool) -> Self {
        let mut out = Vec::new();
        if c != T::zero() {
            for t in &self.terms {
                let (rate, shift_exp) =
                    if reflect { (-t.rate, (t.rate * s).exp()) } else { (t.rate, (-t.rate * s).exp()) };
                let base = t.coeff * shift_exp * c;
                for j in 0..=t.power {
                    // (s - x)^p = Σ C(p,j) s^{p-j} (-x)^j,  (x - s)^p = Σ C(p,j) (-s)^{p-j} x^j
                    let mut k = T::lit(binomial(t.power, j));
                    if reflect {
                        k *= s.powi((t.power - j) as i32);
                        if j % 2 == 1 {
                            k = -k;
                        }
                    } else {
                        k *= (-s).powi((t.power - j) as i32);
                    }
                    out.push(ExpTerm::new(base * k, rate, j));
                }
            }
        }
        self.derived(out, self.domain.mapped(s, reflect))
    }

    /// `x ↦ f(s - x)`
    pub fn reflect(&self, s: T) -> Self {
        self.scale_shift(T::one(), s, true)
    }

    /// `x ↦ f(x - s)`
    pub fn shift(&self, s: T) -> Self {
        self.scale_shift(T::one(), s, false)
    }

    /// Pointwise product.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for a in &self.terms {
            for b in &other.terms {
                let power = a.power + b.power;
                check_power(power)?;
                out.push(ExpTerm::new(a.coeff * b.coeff, a.rate + b.rate, power));
            }
        }
        Ok(self.derived(out, self.domain.intersect(&other.domain)))
    }

    pub fn derivative(&self) -> Self {
        let mut out = Vec::with_capacity(2 * self.len());
        for t in &self.terms {
            if t.power > 0 {
                out.push(ExpTerm::new(t.coeff * T::lit(t.power as f64), t.rate, t.power - 1));
            }
            out.push(ExpTerm::new(t.coeff * t.rate, t.rate, t.power));
        }
        self.derived(out, self.domain)
    }

    /// Antiderivative with zero constant of integration.
    pub fn antiderivative(&self) -> Result<Self> {
        let mut out = Vec::new();
        for t in &self.terms {
            if t.rate.norm() < T::lit(ZERO_RATE) {
                check_power(t.power + 1)?;
            }
            out.extend(antiderivative_terms(t));
        }
        Ok(self.derived(out, self.domain))
    }

    /// `∫_lo^hi f(x) dx`, real part.
    ///
    /// Terms whose rate is small against the interval use the Taylor series of
    /// `e^{rx}`, since the closed form subtracts two values of size `|r|^{-p-1}`.
    pub fn definite_integral(&self, lo: T, hi: T) -> Result<T> {
        if lo == hi {
            return Ok(T::zero());
        }
        let reach = lo.abs().max(hi.abs());
        let mut acc = Complex::zero();
        let mut mag = T::zero();
        for t in &self.terms {
            if t.rate.norm() * reach <= T::lit(SERIES_REACH) {
                let (v, m) = t.series_integral(lo, hi);
                acc += v;
                mag += m;
                continue;
            }
            let anti = Self::from_terms(antiderivative_terms(t));
            let (v_hi, m_hi) = anti.eval_with_magnitude(hi, 0);
            let (v_lo, m_lo) = anti.eval_with_magnitude(lo, 0);
            acc += v_hi - v_lo;
            mag += m_hi + m_lo;
        }
        real_part(acc, mag)
    }

    /// Value of `f`, `f'` or `f''` (any `order`) at `x`.
    pub fn eval(&self, x: T, order: u32) -> Result<T> {
        let (v, mag) = self.eval_with_magnitude(x, order);
        real_part(v, mag)
    }

    /// Shorthand for `eval(x, 0)`.
    pub fn value(&self, x: T) -> Result<T> {
        self.eval(x, 0)
    }

    /// Complex value without the real-valuedness check.
    pub fn eval_complex(&self, x: T, order: u32) -> Complex<T> {
        self.eval_with_magnitude(x, order).0
    }

    fn eval_with_magnitude(&self, x: T, order: u32) -> (Complex<T>, T) {
        let mut acc = Complex::zero();
        let mut mag = T::zero();
        for t in &self.terms {
            let v = t.eval(x, order);
            mag += v.norm();
            acc += v;
        }
        (acc, mag)
    }

    /// Overflow-safe evaluation: returns `(mantissa, log_scale)` with
    /// `f(x) = mantissa · e^{log_scale}`.
    pub fn eval_scaled(&self, x: T) -> Result<(T, T)> {
        let mut logs = Vec::with_capacity(self.len());
        for t in &self.terms {
            let c = t.coeff.norm();
            if c == T::zero() || (x == T::zero() && t.power > 0) {
                continue;
            }
            let mut l = c.ln() + t.rate.re * x;
            if t.power > 0 {
                l += T::lit(t.power as f64) * x.abs().ln();
            }
            logs.push((t, l));
        }
        let Some(scale) = logs.iter().map(|(_, l)| *l).reduce(T::max) else {
            return Ok((T::zero(), T::zero()));
        };
        let mut acc = Complex::zero();
        let mut mag = T::zero();
        for (t, _) in &logs {
            let e = Complex::new(t.rate.re * x - scale, t.rate.im * x).exp();
            let v = t.coeff * x.powi(t.power as i32) * e;
            mag += v.norm();
            acc += v;
        }
        Ok((real_part(acc, mag)?, scale))
    }

    /// Convolution `s ↦ ∫_0^s f(y)·g(s - y) dy` as a sum in `s`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        let mut out = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                convolve_terms(a, b, &mut out)?;
            }
        }
        Ok(self.derived(out, Domain::HalfLine { lo: T::zero() }))
    }

    /// Largest `|c_j - conj(c_i)|` over terms whose rates are conjugates of each
    /// other (missing partners count with their full coefficient).
    pub fn conjugate_pairing_defect(&self) -> T {
        let mut worst = T::zero();
        for t in &self.terms {
            if t.rate.im.abs() <= T::lit(0.5 / MERGE_SCALE) {
                worst = worst.max(t.coeff.im.abs());
                continue;
            }
            let target = t.rate.conj();
            let partner =
                self.terms.iter().find(|u| u.power == t.power && (u.rate - target).norm() <= T::lit(2.0 / MERGE_SCALE));
            let d = match partner {
                Some(u) => (u.coeff - t.coeff.conj()).norm(),
                None => t.coeff.norm(),
            };
            worst = worst.max(d);
        }
        worst
    }

    /// One line per term: `coeff_re coeff_im rate_re rate_im power`.
    pub fn to_debug_text(&self) -> String {
        let mut s = String::new();
        for t in &self.terms {
            let _ = writeln!(
                s,
                "{:.17e} {:.17e} {:.17e} {:.17e} {}",
                t.coeff.re.as_f64(),
                t.coeff.im.as_f64(),
                t.rate.re.as_f64(),
                t.rate.im.as_f64(),
                t.power
            );
        }
        s
    }

    pub fn from_debug_text(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Config(format!("expsum line {}: `{}`", lineno + 1, line));
            if fields.len() != 5 {
                return Err(bad());
            }
            let num = |i: usize| fields[i].parse::<f64>().map(T::lit).map_err(|_| bad());
            let power = fields[4].parse::<u32>().map_err(|_| bad())?;
            check_power(power)?;
            terms.push(ExpTerm::new(Complex::new(num(0)?, num(1)?), Complex::new(num(2)?, num(3)?), power));
        }
        Ok(Self::from_terms(terms))
    }
}

impl<T: Real> Add for &ExpSum<T> {
    type Output = ExpSum<T>;
    fn add(self, rhs: Self) -> ExpSum<T> {
        ExpSum::add(self, rhs)
    }
}

impl<T: Real> Sub for &ExpSum<T> {
    type Output = ExpSum<T>;
    fn sub(self, rhs: Self) -> ExpSum<T> {
        ExpSum::sub(self, rhs)
    }
}

impl<T: Real> Neg for &ExpSum<T> {
    type Output = ExpSum<T>;
    fn neg(self) -> ExpSum<T> {
        ExpSum::neg(self)
    }
}

fn check_power(power: u32) -> Result<()> {
    if power > MAX_POWER {
        Err(Error::PowerOverflow { power, limit: MAX_POWER })
    } else {
        Ok(())
    }
}

fn normalize<T: Real, I: IntoIterator<Item = ExpTerm<T>>>(terms: I) -> Vec<ExpTerm<T>> {
    let mut merged: BTreeMap<(i64, i64, u32), (ExpTerm<T>, T)> = BTreeMap::new();
    for t in terms {
        if t.coeff.is_zero() {
            continue;
        }
        let size = t.coeff.norm();
        merged
            .entry(t.key())
            .and_modify(|(acc, scale)| {
                acc.coeff += t.coeff;
                *scale = scale.max(size);
            })
            .or_insert((t, size));
    }
    merged
        .into_values()
        .filter(|(t, scale)| !t.coeff.is_zero() && !(t.coeff.norm() <= T::lit(PRUNE_REL) * *scale))
        .map(|(t, _)| t)
        .collect()
}

/// Terms of `∫ t(x) dx` with zero constant.
fn antiderivative_terms<T: Real>(t: &ExpTerm<T>) -> Vec<ExpTerm<T>> {
    if t.rate.norm() < T::lit(ZERO_RATE) {
        let c = t.coeff / T::lit((t.power + 1) as f64);
        return vec![ExpTerm::new(c, Complex::zero(), t.power + 1)];
    }
    // ∫ x^p e^{rx} = e^{rx} Σ_k (-1)^k p!/(p-k)! x^{p-k} / r^{k+1}
    let inv_r = t.rate.inv();
    let mut inv_pow = inv_r;
    let mut out = Vec::with_capacity(t.power as usize + 1);
    for k in 0..=t.power {
        let mut c = t.coeff * inv_pow * T::lit(falling(t.power, k));
        if k % 2 == 1 {
            c = -c;
        }
        out.push(ExpTerm::new(c, t.rate, t.power - k));
        inv_pow *= inv_r;
    }
    out
}

fn real_part<T: Real>(v: Complex<T>, magnitude: T) -> Result<T> {
    let tol = T::lit(RESIDUE_REL) * (T::one() + v.re.abs()) + T::lit(256.0) * T::epsilon() * magnitude;
    if v.im.abs() <= tol || !v.im.is_finite() && !v.re.is_finite() {
        Ok(v.re)
    } else {
        Err(Error::ImaginaryResidue { real: v.re.as_f64(), imag: v.im.as_f64() })
    }
}

/// Adds the terms of `∫_0^s a(y)·b(s - y) dy` for single terms `a`, `b`.
fn convolve_terms<T: Real>(a: &ExpTerm<T>, b: &ExpTerm<T>, out: &mut Vec<ExpTerm<T>>) -> Result<()> {
    let (p, q) = (a.power, b.power);
    let delta = a.rate - b.rate;
    let confluent = delta.norm() < T::lit(CONFLUENT_GAP);
    // (s - y)^q e^{t(s-y)} = e^{ts} Σ_j C(q,j) s^{q-j} (-y)^j e^{-ty}
    for j in 0..=q {
        let mut base = a.coeff * b.coeff * T::lit(binomial(q, j));
        if j % 2 == 1 {
            base = -base;
        }
        let n = p + j;
        if confluent {
            // ∫_0^s y^n e^{δy} dy = Σ_k δ^k/k! · s^{n+k+1}/(n+k+1), truncated at third order
            let lead = q - j + n + 1;
            check_power(lead)?;
            let mut dk = Complex::<T>::one();
            let mut fact = 1.0;
            for k in 0..=3u32 {
                let power = lead + k;
                if power > MAX_POWER {
                    break;
                }
                if k > 0 {
                    dk *= delta;
                    fact *= k as f64;
                }
                let c = base * dk / T::lit(fact * (n + k + 1) as f64);
                out.push(ExpTerm::new(c, b.rate, power));
            }
        } else {
            // ∫_0^s y^n e^{δy} dy = e^{δs} Σ_k (-1)^k n!/(n-k)! s^{n-k}/δ^{k+1} - (-1)^n n!/δ^{n+1}
            check_power(q - j + n)?;
            let inv = delta.inv();
            let mut inv_pow = inv;
            for k in 0..=n {
                let mut c = base * inv_pow * T::lit(falling(n, k));
                if k % 2 == 1 {
                    c = -c;
                }
                out.push(ExpTerm::new(c, a.rate, q - j + n - k));
                if k < n {
                    inv_pow *= inv;
                }
            }
            let mut c = base * inv_pow * T::lit(falling(n, n));
            if n % 2 == 0 {
                c = -c;
            }
            out.push(ExpTerm::new(c, b.rate, q - j));
        }
    }
    Ok(())
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// n!/(n-k)!
fn falling(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64)
}
