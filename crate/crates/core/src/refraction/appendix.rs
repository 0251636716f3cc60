//! Second construction of `f_{a,b}` and `g_{a,b}` through the reflected process
//! `-V^{a,b}`: the ruin-time transform `u_2` and the NPV functional `f̃`, built from
//! `W_0`-based kernels `w_1`, `w_2` instead of the `W_1`/`W_2` convolutions used
//! on the production path.
//!
//! With `s = y - d`, the kernels depend on the level `d` only through a shift:
//! `w_1(y; d) = K_1(y - d)` where `K_1 = W_0 + δ1 (W_1 * W_0')`, and for
//! `-a ≤ d ≤ 0`, `w_2(y; d) = K_2(y - d)` where `K_2 = K_1 + δ2 (W_2 * K_1')`.
//! Derivatives are densities; the atom of `W_0` at 0 (bounded variation only) is
//! what the normalising factors `1 - δ_j W_{j-1}(0)` account for.

use serde::Serialize;

use super::Engine;
use crate::error::Result;
use crate::expsum::ExpSum;

/// Values of both constructions at one point.
#[derive(Clone, Debug, Serialize)]
pub struct AppendixReport {
    pub a: f64,
    pub b: f64,
    pub x: f64,
    pub u2: f64,
    pub g: f64,
    pub f_tilde: f64,
    pub f: f64,
    /// `∫_{-a}^0 w_2(-x; y) dy / Π_j (1 - δ_j W_{j-1}(0))`
    pub iden_lhs: f64,
    /// `W̄_2(a - x)`
    pub iden_rhs: f64,
}

impl AppendixReport {
    pub fn u2_error(&self) -> f64 {
        (self.u2 - self.g).abs()
    }

    pub fn f_error(&self) -> f64 {
        (self.f_tilde - self.f).abs()
    }

    pub fn iden_error(&self) -> f64 {
        (self.iden_lhs - self.iden_rhs).abs()
    }
}

/// `∫_0^s k(y) dy` as a sum in `s`.
fn running_integral(k: &ExpSum) -> Result<ExpSum> {
    let anti = k.antiderivative()?;
    let c = anti.value(0.0)?;
    Ok(anti.sub(&ExpSum::constant(c)))
}

impl Engine {
    /// Builds `u_2(-x)` and `f̃(-x)` from their reflected-process definitions and
    /// reports them next to `g_{a,b}(x)` and `f_{a,b}(x)`.
    pub fn appendix_cross_check(&self, a: f64, b: f64, x: f64) -> Result<AppendixReport> {
        let m = self.model();
        let (d1, d2, q, phi0) = (m.delta1(), m.delta2(), m.q(), self.phi0());
        let (w0, w1, w2) = (&self.scale(0).w, &self.scale(1).w, &self.scale(2).w);

        // u_1(y) = e^{Φ0 y} + δ1 Φ0 l(-y; b), valid for y ≥ -b
        let u1 = ExpSum::exponential(1.0, phi0).add(&self.kernel_l(b)?.reflect(0.0).scale(d1 * phi0));
        let y = -x;
        let u2 = if y < -b {
            (phi0 * y).exp()
        } else if y < -a {
            u1.value(y)?
        } else {
            // δ2 ∫_{-a}^y W_2(y - z) u_1'(z) dz = δ2 (W_2 * u_1'(· - a))(y + a)
            let tail = w2.convolve(&u1.derivative().shift(a))?;
            u1.value(y)? + d2 * tail.value(y + a)?
        };

        let k1 = w0.add(&w1.convolve(&w0.derivative())?.scale(d1));
        let k2 = k1.add(&w2.convolve(&k1.derivative())?.scale(d2));
        let k1bar = running_integral(&k1)?;
        let k2bar = running_integral(&k2)?;
        let bar = |s: &ExpSum, t: f64| if t > 0.0 { s.value(t) } else { Ok(0.0) };

        let norm1 = 1.0 - d1 * self.scale(0).w(0.0)?;
        let norm12 = norm1 * (1.0 - d2 * self.scale(1).w(0.0)?);

        // ∫_{-a}^0 w_2(-x; y) dy = K̄_2(a - x)
        let lower_part = bar(&k2bar, a - x)?;
        // ∫_{-b}^{-a} w_2(-x; y) dy = K̄_1(b-x) - K̄_1(a-x) + δ2 [W_2 * (K_1(· + b - a) - K_1)](a - x)
        let mut upper_part = bar(&k1bar, b - x)? - bar(&k1bar, a - x)?;
        if x < a {
            let diff = k1.shift(-(b - a)).sub(&k1);
            upper_part += d2 * w2.convolve(&diff)?.value(a - x)?;
        }
        let f_tilde = d1 / q + d1 * upper_part / norm1 + (d1 + m.beta() * d2) * lower_part / norm12;

        Ok(AppendixReport {
            a,
            b,
            x,
            u2,
            g: self.g_ab(a, b)?.value(x)?,
            f_tilde,
            f: self.f_ab(a, b)?.value(x)?,
            iden_lhs: lower_part / norm12,
            iden_rhs: self.scale(2).wbar(a - x)?,
        })
    }
}
