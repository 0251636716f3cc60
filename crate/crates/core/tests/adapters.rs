mod common;

use common::{engine, engine_for, params};
use multirefraction::adapters::{uniform_grid, LimitCase, SWEEP_CSV_HEADER};
use multirefraction::{
    refracted_reflected_limit, solve_thresholds, sweep, to_problem1, value_function, yin_limit, Engine, Error,
    ModelParams, Problem2Params, Regime, SweepParameter,
};

#[test]
fn zero_second_stream_is_the_identity() {
    let p = params("case1");
    let p2 = Problem2Params { delta2: 0.0, ..Problem2Params::from_surplus(&p) };
    let back = p2.problem1_params().unwrap();
    assert_eq!((back.c_y, back.rho), (p.c_y, p.rho));
    assert_eq!(p2.value_offset(), 0.0);
}

#[test]
fn problem2_round_trip_on_three_fixtures() {
    for name in ["case1", "case2", "hyperexp"] {
        let p = params(name);
        let p2 = Problem2Params::equivalent_to(&p);
        assert!((p2.rho_tilde - (p.rho + p.beta * p.delta2 / p.q)).abs() < 1e-12);
        let direct = engine_for(&p);
        let via = Engine::new(to_problem1(&p2).unwrap()).unwrap();
        let (t1, t2) = (solve_thresholds(&direct).unwrap(), solve_thresholds(&via).unwrap());
        assert_eq!((t1.a_star, t1.b_star, t1.regime), (t2.a_star, t2.b_star, t2.regime), "{name}");
        let (v1, v2) = (value_function(&direct, &t1).unwrap(), value_function(&via, &t2).unwrap());
        let offset = p2.value_offset();
        assert!((offset - p.beta * p.delta2 / p.q).abs() < 1e-12);
        for i in 0..40 {
            let x = 0.1 * i as f64;
            let tilde = v2.value(x).unwrap() + offset;
            assert!((tilde - v1.value(x).unwrap() - offset).abs() < 1e-10, "{name} x = {x}");
        }
        // ṽ(0) = ρ + βδ2/q = ρ̃
        assert!((v2.value(0.0).unwrap() + offset - p2.rho_tilde).abs() < 1e-9);
    }
}

#[test]
fn problem2_rejects_bad_economics_and_unknown_fields() {
    let p2 = Problem2Params { beta: 1.0, ..Problem2Params::from_surplus(&params("case1")) };
    assert!(matches!(to_problem1(&p2), Err(Error::InvalidEconomics(_))));
    let text = r#"{"sigma":0.2,"c_Ytilde":0.5,"kappa":1,"alpha":[1],"T":[[-1]],"delta1":1,"delta2":0.5,"q":0.05,"beta":1.2,"rho_tilde":0,"extra":1}"#;
    assert!(serde_json::from_str::<Problem2Params>(text).is_err());
    let ok = text.replace(",\"extra\":1", "");
    let p2: Problem2Params = serde_json::from_str(&ok).unwrap();
    assert_eq!(p2.c_y_tilde, 0.5);
}

#[test]
fn no_injection_limit() {
    let e = engine("case1");
    let lim = yin_limit(&e).unwrap();
    let b = lim.b_star;
    assert!(lim.residual.abs() < 1e-9);
    let v = &lim.value;
    assert!((v.eval_left(b, 0).unwrap() - v.value(b).unwrap()).abs() < 1e-9);
    let h = 1e-6;
    let slope = (lim.value_at(b + h).unwrap() - lim.value_at(b - h).unwrap()) / (2.0 * h);
    assert!((slope - 1.0).abs() < 1e-6, "{slope}");
    assert!(lim.value_at(0.0).unwrap().abs() < 1e-9);

    let big_beta = engine_for(&ModelParams { beta: 50.0, ..params("case1") });
    let th = solve_thresholds(&big_beta).unwrap();
    assert!(th.a_star < 1e-3);
    assert!((th.b_star - b).abs() < 1e-2);
    let v50 = value_function(&big_beta, &th).unwrap();
    let sup = (0..=200)
        .map(|i| 2.0 * th.b_star * i as f64 / 200.0)
        .map(|x| (v50.value(x).unwrap() - lim.value_at(x).unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(sup < 1e-2, "{sup}");

    assert!(matches!(yin_limit(&engine("case2")), Err(Error::InvalidEconomics(_))));
}

#[test]
fn reflection_limit_root_and_slope() {
    let e = engine("case1");
    let lim = refracted_reflected_limit(&e).unwrap();
    let m = e.model();
    let phi0 = e.phi0();
    let b = lim.b_star;
    let residual = (-phi0 * b).exp() * m.beta() - 1.0 - m.delta1() * phi0 * e.l(0.0, b).unwrap();
    assert!(residual.abs() < 1e-9);
    assert!(lim.value_at(0.0).unwrap() >= 0.0);
    let h = 1e-6;
    let slope = (lim.value_at(b + h).unwrap() - lim.value_at(b - h).unwrap()) / (2.0 * h);
    assert!((slope - 1.0).abs() < 1e-6);
}

/// With σ > 0 the refraction value stays pinned at v(0) = ρ while v_R(0) > 0,
/// so large δ2 approaches v_R only away from 0 and only like 1/δ2.
#[test]
fn large_delta2_approaches_reflection_away_from_zero() {
    let base = params("case1");
    let lim = refracted_reflected_limit(&engine("case1")).unwrap();
    let dist = |d2: f64| {
        let e = engine_for(&ModelParams { delta2: d2, ..base.clone() });
        let th = solve_thresholds(&e).unwrap();
        let v = value_function(&e, &th).unwrap();
        let sup = (0..=200)
            .map(|i| 0.05 + (2.0 * lim.b_star - 0.05) * i as f64 / 200.0)
            .map(|x| (v.value(x).unwrap() - lim.value_at(x).unwrap()).abs())
            .fold(0.0, f64::max);
        (th.a_star, sup)
    };
    let (a10, d10) = dist(10.0);
    let (_, d100) = dist(100.0);
    assert!(a10 < 5e-2);
    assert!(d100 < d10 / 5.0, "{d10} -> {d100}");
}

#[test]
fn rho_sweep_matches_the_captions() {
    let grid: Vec<f64> = (-6..=6).map(f64::from).collect();
    let table = sweep(&params("case1"), SweepParameter::Rho, &grid, &uniform_grid(4.0, 41)).unwrap();
    assert!(table.monotone);
    let sol: Vec<_> = table.solved().collect();
    assert_eq!(sol.len(), grid.len());
    let at = |rho: f64| sol.iter().find(|(v, _)| *v == rho).unwrap().1;
    assert_eq!(at(6.0).regime, Regime::Degenerate);
    assert_eq!((at(6.0).a_star, at(6.0).b_star), (0.0, 0.0));
    assert_eq!(at(5.0).regime, Regime::LowerBoundary);
    assert!(at(5.0).b_star > 0.0);
    for w in sol.windows(2).filter(|w| w[1].1.regime == Regime::Interior) {
        assert!(w[0].1.a_star >= w[1].1.a_star && w[0].1.b_star >= w[1].1.b_star);
    }
    assert!(table.limits.is_empty() && table.limit_case.is_none());
}

#[test]
fn beta_sweep_shrinks_the_band_near_one() {
    let grid = [1.01, 1.2, 2.0, 5.0, 50.0];
    let table = sweep(&params("case1"), SweepParameter::Beta, &grid, &uniform_grid(4.0, 41)).unwrap();
    assert!(table.monotone);
    let sol: Vec<_> = table.solved().collect();
    let band = |i: usize| sol[i].1.b_star - sol[i].1.a_star;
    assert!(band(0) < band(3));
    assert_eq!(table.limits[0].limit, "no_injection");
    assert!(table.limits[0].sup_distance < 1e-2);
}

#[test]
fn delta2_sweep_labels_the_limit_case() {
    let xs = uniform_grid(4.0, 41);
    let r = sweep(&params("case1"), SweepParameter::Delta2, &[0.1, 0.5, 2.0, 10.0], &xs).unwrap();
    assert!(r.monotone);
    assert_eq!(r.limit_case, Some(LimitCase::R));
    assert_eq!(r.limits.len(), 2);

    let steep = ModelParams { beta: 6.0, ..params("case1") };
    let l = sweep(&steep, SweepParameter::Delta2, &[0.5, 2.0, 10.0], &xs).unwrap();
    assert_eq!(l.limit_case, Some(LimitCase::L));
}

#[test]
fn problem2_delta1_sweep_is_increasing() {
    let grid = [0.2, 0.5, 1.0, 2.0];
    let table = sweep(&params("case1"), SweepParameter::Delta1Problem2, &grid, &uniform_grid(3.0, 31)).unwrap();
    assert!(table.monotone);
    assert_eq!(table.solved().count(), grid.len());
}

#[test]
fn sweep_csv_layout_and_errors() {
    let xs = [0.0, 1.0];
    let table = sweep(&params("case1"), SweepParameter::Beta, &[2.0, 0.5, 1.5], &xs).unwrap();
    let csv = table.to_csv(|x| format!("{x}"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], SWEEP_CSV_HEADER);
    assert_eq!(lines.len(), 1 + 2 + 1 + 2);
    assert!(lines[1].starts_with("beta,2,"));
    assert!(lines[3].starts_with("beta,0.5,,,error: "));
    assert_eq!(lines[3].split(',').count(), 7);
    assert!(lines[4].starts_with("beta,1.5,"));

    assert!(matches!(sweep(&params("case1"), SweepParameter::Rho, &[], &xs), Err(Error::Config(_))));
    assert!(matches!("gamma".parse::<SweepParameter>(), Err(Error::Config(_))));
    assert_eq!("delta1_problem2".parse::<SweepParameter>().unwrap(), SweepParameter::Delta1Problem2);
}

#[test]
fn reflection_pays_earlier_than_no_injection() {
    // Cheap unlimited injections make surplus less precious, so dividends start lower.
    for name in ["case1", "hyperexp"] {
        let e = engine(name);
        assert!(yin_limit(&e).unwrap().b_star > refracted_reflected_limit(&e).unwrap().b_star, "{name}");
    }
}
