//! The uncontrolled surplus model: a spectrally positive jump diffusion
//! `Y(t) = -c_Y t + σB(t) + Σ jumps` with compound-Poisson phase-type jumps, plus
//! the control bounds and economics of the dividend/injection problem.
//!
//! The three controlled processes are `X_0 = -Y + δ1 t`, `X_1 = -Y` and
//! `X_2 = -Y - δ2 t`, all spectrally negative with Laplace exponents
//!
//! ```text
//! ψ_k(s) = c_k s + σ²s²/2 + κ(α(sI - T)^{-1} t - α·1)
//! ```
//!
//! where `c_0 = c_Y + δ1`, `c_1 = c_Y`, `c_2 = c_Y - δ2`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PH_TOL: f64 = 1e-12;

/// Raw model configuration as read from a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub sigma: f64,
    #[serde(rename = "c_Y")]
    pub c_y: f64,
    pub kappa: f64,
    pub alpha: Vec<f64>,
    #[serde(rename = "T")]
    pub t_matrix: Vec<Vec<f64>>,
    pub delta1: f64,
    pub delta2: f64,
    pub q: f64,
    pub beta: f64,
    pub rho: f64,
}

impl ModelParams {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("model file: {e}")))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("model parameters serialize")
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        Self { rho, ..self.clone() }
    }

    pub fn build(&self) -> Result<LevyModel> {
        LevyModel::build(self)
    }
}

/// Phase-type law `(α, T)`: absorption time of a Markov chain with initial
/// distribution `α` and sub-generator `T`. A defect `1 - α·1 > 0` is an atom at 0,
/// which for a jump size means "no jump"; it is kept consistent throughout.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTypeRep {
    alpha: DVector<f64>,
    t: DMatrix<f64>,
    exit: DVector<f64>,
}

impl PhaseTypeRep {
    pub fn new(alpha: &[f64], t_rows: &[Vec<f64>]) -> Result<Self> {
        let m = alpha.len();
        let bad = |msg: String| Err(Error::InvalidPhaseType(msg));
        if m == 0 {
            return bad("empty representation".into());
        }
        if t_rows.len() != m || t_rows.iter().any(|r| r.len() != m) {
            return bad(format!("T must be {m}x{m} to match alpha"));
        }
        if alpha.iter().chain(t_rows.iter().flatten()).any(|v| !v.is_finite()) {
            return bad("non-finite entry".into());
        }
        if alpha.iter().any(|&a| a < 0.0) {
            return bad("alpha has a negative entry".into());
        }
        if alpha.iter().sum::<f64>() > 1.0 + PH_TOL {
            return bad("alpha sums to more than one".into());
        }
        for (i, row) in t_rows.iter().enumerate() {
            if row[i] >= 0.0 {
                return bad(format!("T[{i}][{i}] must be strictly negative"));
            }
            if row.iter().enumerate().any(|(j, &v)| j != i && v < 0.0) {
                return bad(format!("row {i} of T has a negative off-diagonal entry"));
            }
            let scale: f64 = row.iter().map(|v| v.abs()).sum();
            if row.iter().sum::<f64>() > PH_TOL * scale {
                return bad(format!("row {i} of T has a positive sum"));
            }
        }
        let t = DMatrix::from_fn(m, m, |i, j| t_rows[i][j]);
        let exit = -(&t * DVector::from_element(m, 1.0));
        let exit = exit.map(|v| v.max(0.0));
        Ok(Self { alpha: DVector::from_column_slice(alpha), t, exit })
    }

    /// Exponential law with the given rate.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(&[1.0], &[vec![-rate]])
    }

    pub fn m(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn sub_generator(&self) -> &DMatrix<f64> {
        &self.t
    }

    /// `t = -T·1`
    pub fn exit_rates(&self) -> &DVector<f64> {
        &self.exit
    }

    /// `α·1`, the probability that a jump has positive size.
    pub fn mass(&self) -> f64 {
        self.alpha.sum()
    }

    /// `n`-th moment `n!·α(-T)^{-n}·1`.
    pub fn moment(&self, n: u32) -> f64 {
        let u = (-&self.t).try_inverse().expect("sub-generator is invertible");
        let mut v = DVector::from_element(self.m(), 1.0);
        let mut fact = 1.0;
        for k in 1..=n {
            v = &u * v;
            fact *= k as f64;
        }
        fact * self.alpha.dot(&v)
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.t.complex_eigenvalues().iter().copied().collect()
    }

    /// `α (sI - T)^{-(power)} t` for `power ≥ 1`.
    pub fn resolvent_form(&self, s: Complex64, power: u32) -> Result<Complex64> {
        let m = self.m();
        let a = DMatrix::from_fn(m, m, |i, j| {
            let d = if i == j { s } else { Complex64::new(0.0, 0.0) };
            d - Complex64::new(self.t[(i, j)], 0.0)
        });
        let lu = a.lu();
        let mut v: DVector<Complex64> = self.exit.map(|x| Complex64::new(x, 0.0));
        for _ in 0..power {
            v = lu.solve(&v).ok_or(Error::PoleAtEigenvalue { re: s.re, im: s.im })?;
        }
        if v.iter().any(|z| !z.is_finite()) {
            return Err(Error::PoleAtEigenvalue { re: s.re, im: s.im });
        }
        Ok(self.alpha.iter().zip(v.iter()).map(|(a, z)| z * *a).sum())
    }

    /// Density `α e^{Tz} t` of the absolutely continuous part.
    pub fn density(&self, z: f64) -> f64 {
        let e = (&self.t * z).exp();
        self.alpha.dot(&(e * &self.exit))
    }
}

/// Path regularity of the processes `X_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariationClass {
    BoundedVariation,
    UnboundedVariation,
}

/// A validated model.
#[derive(Clone, Debug, PartialEq)]
pub struct LevyModel {
    params: ModelParams,
    jumps: PhaseTypeRep,
}

impl LevyModel {
    pub fn build(p: &ModelParams) -> Result<Self> {
        let scalars = [
            ("sigma", p.sigma),
            ("c_Y", p.c_y),
            ("kappa", p.kappa),
            ("delta1", p.delta1),
            ("delta2", p.delta2),
            ("q", p.q),
            ("beta", p.beta),
            ("rho", p.rho),
        ];
        if let Some((name, _)) = scalars.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Config(format!("{name} must be finite")));
        }
        let jumps = PhaseTypeRep::new(&p.alpha, &p.t_matrix)?;
        if p.q <= 0.0 {
            return Err(Error::InvalidEconomics(format!("q must be positive, got {}", p.q)));
        }
        if p.beta <= 1.0 {
            return Err(Error::InvalidEconomics(format!("beta must exceed 1, got {}", p.beta)));
        }
        if p.delta1 <= 0.0 || p.delta2 <= 0.0 {
            return Err(Error::InvalidEconomics("delta1 and delta2 must be positive".into()));
        }
        if p.sigma < 0.0 || p.kappa < 0.0 {
            return Err(Error::Config("sigma and kappa must be nonnegative".into()));
        }
        let model = Self { params: p.clone(), jumps };
        if model.sigma() == 0.0 {
            if !model.has_jumps() {
                return Err(Error::SubordinatorViolation("sigma = 0 and no jumps: Y is a deterministic drift".into()));
            }
            let c2 = model.drift(2);
            if c2 <= 0.0 {
                return Err(Error::SubordinatorViolation(format!("sigma = 0 requires c_Y - delta2 > 0, got {c2}")));
            }
        }
        Ok(model)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn sigma(&self) -> f64 {
        self.params.sigma
    }

    pub fn c_y(&self) -> f64 {
        self.params.c_y
    }

    pub fn kappa(&self) -> f64 {
        self.params.kappa
    }

    pub fn jumps(&self) -> &PhaseTypeRep {
        &self.jumps
    }

    pub fn delta1(&self) -> f64 {
        self.params.delta1
    }

    pub fn delta2(&self) -> f64 {
        self.params.delta2
    }

    pub fn q(&self) -> f64 {
        self.params.q
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn rho(&self) -> f64 {
        self.params.rho
    }

    pub fn has_jumps(&self) -> bool {
        self.kappa() > 0.0 && self.jumps.mass() > 0.0
    }

    /// Total mass `Π(0,∞)` of the Lévy measure.
    pub fn jump_intensity(&self) -> f64 {
        self.kappa() * self.jumps.mass()
    }

    /// Linear coefficient `c_k` of ψ_k (the drift of `X_k` in the bounded-variation case).
    pub fn drift(&self, k: usize) -> f64 {
        match k {
            0 => self.c_y() + self.delta1(),
            1 => self.c_y(),
            2 => self.c_y() - self.delta2(),
            _ => panic!("process index must be 0, 1 or 2, got {k}"),
        }
    }

    pub fn variation_class(&self) -> VariationClass {
        if self.sigma() > 0.0 {
            VariationClass::UnboundedVariation
        } else {
            VariationClass::BoundedVariation
        }
    }

    /// ψ_k(s) for complex `s`.
    pub fn laplace_exponent(&self, k: usize, s: Complex64) -> Result<Complex64> {
        let sig2 = self.sigma() * self.sigma();
        let mut v = s * self.drift(k) + s * s * (0.5 * sig2);
        if self.has_jumps() {
            v += (self.jumps.resolvent_form(s, 1)? - self.jumps.mass()) * self.kappa();
        }
        Ok(v)
    }

    /// ψ_k(λ) for real λ not an eigenvalue of T.
    pub fn psi(&self, k: usize, lambda: f64) -> Result<f64> {
        Ok(self.laplace_exponent(k, Complex64::new(lambda, 0.0))?.re)
    }

    /// `n`-th derivative of ψ_k at `s`, `n ≥ 1`.
    pub fn laplace_exponent_derivative(&self, k: usize, s: Complex64, n: u32) -> Result<Complex64> {
        assert!(n >= 1, "use laplace_exponent for the value itself");
        let sig2 = self.sigma() * self.sigma();
        let mut v = match n {
            1 => s * sig2 + self.drift(k),
            2 => Complex64::new(sig2, 0.0),
            _ => Complex64::new(0.0, 0.0),
        };
        if self.has_jumps() {
            // d^n/ds^n α(sI-T)^{-1}t = (-1)^n n! α(sI-T)^{-(n+1)} t
            let fact: f64 = (1..=n).map(f64::from).product();
            let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
            v += self.jumps.resolvent_form(s, n + 1)? * (sign * fact * self.kappa());
        }
        Ok(v)
    }

    /// Density of the Lévy measure Π at `z > 0`.
    pub fn levy_density(&self, z: f64) -> f64 {
        if !self.has_jumps() {
            return 0.0;
        }
        self.kappa() * self.jumps.density(z)
    }

    /// `∫_(0,1) z Π(dz)`, in closed form `κα[(e^T - I)T^{-1} - e^T]·1`.
    pub fn small_jump_mean(&self) -> f64 {
        if !self.has_jumps() {
            return 0.0;
        }
        let t = self.jumps.sub_generator();
        let m = self.jumps.m();
        let e = t.exp();
        let one = DVector::from_element(m, 1.0);
        let t_inv = t.clone().try_inverse().expect("sub-generator is invertible");
        let eye = DMatrix::<f64>::identity(m, m);
        let v = (&e - &eye) * (t_inv * &one) - &e * &one;
        self.kappa() * self.jumps.alpha().dot(&v)
    }
}
