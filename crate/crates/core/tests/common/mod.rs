#![allow(dead_code)]

use std::path::PathBuf;

use multirefraction::quadrature::{integrate, Tolerance};
use multirefraction::{Engine, ModelParams};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(format!("{name}.json"))
}

pub fn params(name: &str) -> ModelParams {
    ModelParams::from_path(fixture_path(name)).expect("fixture parses")
}

pub fn engine_for(p: &ModelParams) -> Engine {
    Engine::new(p.build().expect("model builds")).expect("engine builds")
}

pub fn engine(name: &str) -> Engine {
    engine_for(&params(name))
}

/// Tight adaptive quadrature used as the numerical oracle.
pub fn quad(f: impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    integrate(f, a, b, Tolerance { abs: 1e-14, rel: 1e-13, max_depth: 50 }).expect("quadrature converges")
}

/// Composite Simpson rule on `n` (even) panels, independent of the crate's
/// quadrature code.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}
