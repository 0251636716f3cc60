//! The functionals of the multi-refraction strategy `π^{a,b}` (pay dividends at
//! rate δ1 above `b`, inject capital at rate δ2 below `a`) as exact piecewise
//! exponential sums.
//!
//! Every integral has the shape `∫_x^c K(z - x) h(z) dz` for a scale function `K`,
//! which [`int_kernel`] turns into a reflected convolution.

mod appendix;
mod piecewise;

pub use appendix::AppendixReport;
pub use piecewise::PiecewiseValue;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expsum::ExpSum;
use crate::levy_model::LevyModel;
use crate::scale::{build_scale_function, ScaleFunction};

/// `x ↦ ∫_x^c K(z - x) h(z) dz` for `x ≤ c`.
pub fn int_kernel(kernel: &ExpSum, h: &ExpSum, c: f64) -> Result<ExpSum> {
    Ok(kernel.convolve(&h.reflect(c))?.reflect(c))
}

/// A model together with the scale functions of `X_0`, `X_1`, `X_2` at its
/// discount rate.
#[derive(Clone, Debug)]
pub struct Engine {
    model: LevyModel,
    sf: [ScaleFunction; 3],
}

/// One-sided derivative jumps of `v_{a,b}` at the thresholds, `right - left`.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Pasting {
    pub dv1_a: Option<f64>,
    pub dv2_a: Option<f64>,
    pub dv1_b: Option<f64>,
    pub dv2_b: Option<f64>,
}

impl Pasting {
    pub fn max_abs(&self) -> f64 {
        [self.dv1_a, self.dv2_a, self.dv1_b, self.dv2_b].iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Pasting jumps computed from the exponential sums and from the closed forms.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PastingResiduals {
    pub from_pieces: Pasting,
    pub closed_form: Pasting,
}

impl Engine {
    pub fn new(model: LevyModel) -> Result<Self> {
        let q = model.q();
        let sf = [
            build_scale_function(&model, 0, q)?,
            build_scale_function(&model, 1, q)?,
            build_scale_function(&model, 2, q)?,
        ];
        Ok(Self { model, sf })
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn scale(&self, k: usize) -> &ScaleFunction {
        &self.sf[k]
    }

    /// Φ_0(q)
    pub fn phi0(&self) -> f64 {
        self.sf[0].phi()
    }

    fn exp_phi0(&self, coeff: f64) -> ExpSum {
        ExpSum::exponential(coeff, -self.phi0())
    }

    /// `l(x; b) = ∫_x^b e^{-Φ0 z} W_1(z - x) dz` as a sum valid for `x ≤ b`.
    pub fn kernel_l(&self, b: f64) -> Result<ExpSum> {
        int_kernel(&self.sf[1].w, &self.exp_phi0(1.0), b)
    }

    /// `l(x; b)`, zero for `x ≥ b`.
    pub fn l(&self, x: f64, b: f64) -> Result<f64> {
        if x >= b {
            return Ok(0.0);
        }
        self.kernel_l(b)?.value(x)
    }

    /// `f_{a,b}`: discounted dividends minus injection costs up to ruin,
    /// without the ruin correction.
    pub fn f_ab(&self, a: f64, b: f64) -> Result<PiecewiseValue> {
        check_thresholds(a, b)?;
        let m = &self.model;
        let (d1, d2) = (m.delta1(), m.delta2());
        let upper = ExpSum::constant(d1 / m.q());
        let middle = self.sf[1].wbar.reflect(b).scale(d1).add(&upper);
        let lower = if a > 0.0 {
            let cross = int_kernel(&self.sf[2].w, &self.sf[1].w.reflect(b), a)?;
            middle.add(&cross.scale(d1 * d2)).add(&self.sf[2].wbar.reflect(a).scale(m.beta() * d2))
        } else {
            ExpSum::zero()
        };
        Ok(PiecewiseValue::new(a, b, lower, middle, upper))
    }

    /// `g_{a,b}`, proportional to the Laplace transform of the ruin time.
    pub fn g_ab(&self, a: f64, b: f64) -> Result<PiecewiseValue> {
        check_thresholds(a, b)?;
        let phi0 = self.phi0();
        let d1 = self.model.delta1();
        let upper = self.exp_phi0(1.0);
        let l = self.kernel_l(b)?;
        let middle = upper.add(&l.scale(phi0 * d1));
        let lower = if a > 0.0 {
            let h = self.exp_phi0(1.0).sub(&l.derivative().scale(d1));
            middle.add(&int_kernel(&self.sf[2].w, &h, a)?.scale(phi0 * self.model.delta2()))
        } else {
            ExpSum::zero()
        };
        Ok(PiecewiseValue::new(a, b, lower, middle, upper))
    }

    /// Expected NPV of the strategy `π^{a,b}`:
    /// `v = f - (f(0) - ρ) g / g(0)`.
    pub fn value_v_ab(&self, a: f64, b: f64) -> Result<PiecewiseValue> {
        let f = self.f_ab(a, b)?;
        let g = self.g_ab(a, b)?;
        let g0 = g.value(0.0)?;
        if g0.abs() < 1e-12 {
            return Err(Error::DegenerateNormalizer(g0));
        }
        let c = (f.value(0.0)? - self.model.rho()) / g0;
        Ok(PiecewiseValue::combine(&f, 1.0, &g, -c))
    }

    /// `Γ(a, b) = (f(0) - ρ) Φ0 e^{-Φ0 b} - g(0)`, the smooth-fit residual at `b`.
    pub fn gamma_cap(&self, a: f64, b: f64) -> Result<f64> {
        let f0 = self.f_ab(a, b)?.value(0.0)?;
        let g0 = self.g_ab(a, b)?.value(0.0)?;
        let phi0 = self.phi0();
        Ok((f0 - self.model.rho()) * phi0 * (-phi0 * b).exp() - g0)
    }

    /// Γ(a, b) as `Γ(0, b) + ∫_0^a γ(s, b) ds`.
    ///
    /// This route never forms `f(0)` with `a > 0`, whose terms grow like
    /// `e^{Φ2 a}`; the integral is evaluated in scaled form, so the sign stays
    /// right even when the magnitude overflows (the result then saturates to ±∞).
    pub fn gamma_cap_integral(&self, a: f64, b: f64) -> Result<f64> {
        check_thresholds(a, b)?;
        let m = &self.model;
        let (phi0, d1, d2) = (self.phi0(), m.delta1(), m.delta2());
        let l = self.kernel_l(b)?;
        let f0 = d1 * self.sf[1].wbar(b)? + d1 / m.q();
        let g0 = 1.0 + phi0 * d1 * if b > 0.0 { l.value(0.0)? } else { 0.0 };
        let base = (f0 - m.rho()) * phi0 * (-phi0 * b).exp() - g0;
        if a == 0.0 {
            return Ok(base);
        }
        let tilde = ExpSum::constant(m.beta() * (-phi0 * b).exp())
            .sub(&self.exp_phi0(1.0))
            .sub(&l.scale(d1 * phi0))
            .scale(phi0 * d2);
        let anti = self.sf[2].w.multiply(&tilde)?.antiderivative()?;
        let (mantissa, log_scale) = anti.eval_scaled(a)?;
        let at_zero = anti.value(0.0)?;
        Ok(base + mantissa * log_scale.exp() - at_zero)
    }

    /// `γ̃(a, b) = Φ0 δ2 (β e^{-Φ0 b} - e^{-Φ0 a} - δ1 Φ0 l(a; b))`.
    pub fn gamma_tilde(&self, a: f64, b: f64) -> Result<f64> {
        check_thresholds(a, b)?;
        let m = &self.model;
        let phi0 = self.phi0();
        let l = self.l(a, b)?;
        Ok(phi0 * m.delta2() * (m.beta() * (-phi0 * b).exp() - (-phi0 * a).exp() - m.delta1() * phi0 * l))
    }

    /// `γ(a, b) = W_2(a) γ̃(a, b) = ∂Γ/∂a`.
    pub fn gamma_small(&self, a: f64, b: f64) -> Result<f64> {
        Ok(self.sf[2].w(a)? * self.gamma_tilde(a, b)?)
    }

    /// Derivative jumps of `v_{a,b}` at `a` and `b`, from the pieces and from the
    /// closed forms. Second-derivative closed forms need `σ > 0`; entries at `a`
    /// are absent when `a = 0`.
    pub fn pasting_residuals(&self, a: f64, b: f64) -> Result<PastingResiduals> {
        check_thresholds(a, b)?;
        if b <= a {
            return Err(Error::Config(format!("pasting needs a < b, got a = {a}, b = {b}")));
        }
        let m = &self.model;
        let (d1, d2) = (m.delta1(), m.delta2());
        let v = self.value_v_ab(a, b)?;
        let f0 = self.f_ab(a, b)?.value(0.0)?;
        let g0 = self.g_ab(a, b)?.value(0.0)?;
        let gamma = self.gamma_cap(a, b)?;
        let smooth = m.sigma() > 0.0;
        let (w1, w2) = (&self.sf[1], &self.sf[2]);

        let mut pieces = Pasting {
            dv1_b: Some(v.jump(b, 1)?),
            dv2_b: smooth.then(|| v.jump(b, 2)).transpose()?,
            ..Default::default()
        };
        let mut closed = Pasting {
            dv1_b: Some(-d1 * w1.w(0.0)? * gamma / g0),
            dv2_b: if smooth { Some(d1 * w1.w_deriv(0.0, 1)? * gamma / g0) } else { None },
            ..Default::default()
        };
        if a > 0.0 {
            let bracket = (f0 - m.rho()) * self.gamma_tilde(a, b)? - d2 * (m.beta() + d1 * w1.w(b - a)?) * gamma;
            pieces.dv1_a = Some(v.jump(a, 1)?);
            closed.dv1_a = Some(w2.w(0.0)? * bracket / g0);
            if smooth {
                pieces.dv2_a = Some(v.jump(a, 2)?);
                closed.dv2_a = Some(-w2.w_deriv(0.0, 1)? * bracket / g0);
            }
        }
        Ok(PastingResiduals { from_pieces: pieces, closed_form: closed })
    }
}

fn check_thresholds(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0 && b >= a && b.is_finite()) {
        return Err(Error::Config(format!("thresholds must satisfy 0 <= a <= b, got a = {a}, b = {b}")));
    }
    Ok(())
}
