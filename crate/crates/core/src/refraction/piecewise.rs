use crate::error::Result;
use crate::expsum::ExpSum;

/// A function on `[0, ∞)` given by one exponential sum on each of `[0, a)`,
/// `[a, b)` and `[b, ∞)`. At a split point the right-hand piece is used; the
/// left limit is available through [`PiecewiseValue::eval_left`].
#[derive(Clone, Debug)]
pub struct PiecewiseValue {
    pub a: f64,
    pub b: f64,
    pub lower: ExpSum,
    pub middle: ExpSum,
    pub upper: ExpSum,
}

impl PiecewiseValue {
    pub fn new(a: f64, b: f64, lower: ExpSum, middle: ExpSum, upper: ExpSum) -> Self {
        Self { a, b, lower, middle, upper }
    }

    /// Piece in force at `x` under the right-limit convention.
    pub fn piece(&self, x: f64) -> &ExpSum {
        if x >= self.b {
            &self.upper
        } else if x >= self.a {
            &self.middle
        } else {
            &self.lower
        }
    }

    fn piece_left(&self, x: f64) -> &ExpSum {
        if x > self.b {
            &self.upper
        } else if x > self.a {
            &self.middle
        } else {
            &self.lower
        }
    }

    pub fn eval(&self, x: f64, order: u32) -> Result<f64> {
        self.piece(x).eval(x, order)
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        self.eval(x, 0)
    }

    /// Left limit of the `order`-th derivative at `x`.
    pub fn eval_left(&self, x: f64, order: u32) -> Result<f64> {
        self.piece_left(x).eval(x, order)
    }

    /// Right minus left limit of the `order`-th derivative at `x`.
    pub fn jump(&self, x: f64, order: u32) -> Result<f64> {
        Ok(self.eval(x, order)? - self.eval_left(x, order)?)
    }

    /// `|jump|` of the value at `a` (if `a > 0`) and at `b` (if `b > a`).
    pub fn continuity_residuals(&self) -> Result<[f64; 2]> {
        let at_a = if self.a > 0.0 { self.jump(self.a, 0)?.abs() } else { 0.0 };
        let at_b = if self.b > self.a { self.jump(self.b, 0)?.abs() } else { 0.0 };
        Ok([at_a, at_b])
    }

    /// `cf·f + cg·g` piece by piece; both must share thresholds.
    pub fn combine(f: &Self, cf: f64, g: &Self, cg: f64) -> Self {
        debug_assert!(f.a == g.a && f.b == g.b);
        let mix = |p: &ExpSum, q: &ExpSum| p.scale(cf).add(&q.scale(cg));
        Self::new(f.a, f.b, mix(&f.lower, &g.lower), mix(&f.middle, &g.middle), mix(&f.upper, &g.upper))
    }

    /// Adds a constant to every piece.
    pub fn offset(&self, c: f64) -> Self {
        let k = ExpSum::constant(c);
        Self::new(self.a, self.b, self.lower.add(&k), self.middle.add(&k), self.upper.add(&k))
    }
}
