//! Batch frontend: solve, evaluate, verify, simulate, sweep and crosscheck.
//!
//! CSV goes to standard output (or `--out`), summaries and diagnostics to
//! standard error. Exit status: 0 on success, 1 when a requested check fails
//! or a numerical step breaks down, 2 on configuration errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use multirefraction::adapters::uniform_grid;
use multirefraction::crosscheck::CROSSCHECK_CSV_HEADER;
use multirefraction::format::sig;
use multirefraction::simulate::CSV_HEADER as SIM_CSV_HEADER;
use multirefraction::solver::GridSpec;
use multirefraction::{
    crosscheck, simulate_many, solve_thresholds, sweep, value_function, verify_optimality, Engine, Error, ModelParams,
    SimConfig, SweepParameter,
};

#[derive(Parser)]
#[command(
    name = "multirefraction",
    version,
    about = "Optimal multi-refraction dividend and capital-injection thresholds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for (a*, b*) and write the optimal value on a uniform x-grid as CSV `x,value`.
    Solve {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        grid: XGrid,
        #[command(flatten)]
        out: OutArg,
    },
    /// Evaluate the value of the (a, b) strategy at the given surplus levels, one number per line.
    Value {
        #[command(flatten)]
        model: ModelArg,
        /// Injection threshold a (0 <= a <= b).
        #[arg(long)]
        a: f64,
        /// Dividend threshold b.
        #[arg(long)]
        b: f64,
        /// Surplus levels (comma-separated or repeated).
        #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
        x: Vec<f64>,
    },
    /// Solve, then run the pasting, HJB, concavity and appendix checks; writes a JSON report.
    Verify {
        #[command(flatten)]
        model: ModelArg,
        /// Number of log-spaced verification points.
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Monte Carlo estimate of the value (or ruin Laplace transform) of the (a, b) strategy.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        /// Starting surplus levels (comma-separated or repeated).
        #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
        x0: Vec<f64>,
        /// Estimate E[e^{-q κ}] instead of the expected NPV.
        #[arg(long)]
        ruin_laplace: bool,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Solve over a parameter grid; CSV `param_name,param_value,a_star,b_star,regime,x,value`.
    Sweep {
        #[command(flatten)]
        model: ModelArg,
        /// Swept parameter: rho, beta, delta2 or delta1_problem2.
        #[arg(long)]
        param: SweepParameter,
        /// Parameter values (comma-separated or repeated).
        #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
        grid: Vec<f64>,
        #[command(flatten)]
        xgrid: XGrid,
        #[command(flatten)]
        out: OutArg,
    },
    /// Compare analytic values and ruin transforms with Monte Carlo estimates.
    Crosscheck {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        /// Starting surplus levels (comma-separated or repeated).
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = vec![0.5, 1.0, 2.0])]
        x0: Vec<f64>,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args)]
struct ModelArg {
    /// Model file (JSON with sigma, c_Y, kappa, alpha, T, delta1, delta2, q, beta, rho).
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct XGrid {
    /// Right end of the x-grid [0, xmax].
    #[arg(long, default_value_t = 5.0)]
    xmax: f64,
    /// Number of grid points.
    #[arg(long, default_value_t = 101)]
    nx: usize,
}

#[derive(Args)]
struct OutArg {
    /// Write the table or report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Injection threshold a; defaults to the solved a* (requires --b when given).
    #[arg(long, requires = "b")]
    a: Option<f64>,
    /// Dividend threshold b; defaults to the solved b* (requires --a when given).
    #[arg(long, requires = "a")]
    b: Option<f64>,
}

#[derive(Args)]
struct SimArgs {
    /// Euler time step.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Number of simulated paths.
    #[arg(long, default_value_t = 100_000)]
    n_paths: usize,
    /// Random seed; every path draws from its own stream keyed by (seed, path index).
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Horizon cap; at least 100/q (the default).
    #[arg(long)]
    t_max: Option<f64>,
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::InvalidSimConfig(_)
            | Error::InvalidEconomics(_)
            | Error::InvalidPhaseType(_)
            | Error::SubordinatorViolation(_) => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type Outcome = Result<bool, Failure>;

fn load(arg: &ModelArg) -> Result<Engine, Failure> {
    let params = ModelParams::from_path(&arg.model)?;
    Ok(Engine::new(params.build()?)?)
}

fn emit(out: &OutArg, text: &str) -> Result<(), Failure> {
    match &out.out {
        Some(path) => write_file(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure { code: 1, message: format!("stdout: {e}") })
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn x_grid(g: &XGrid) -> Result<Vec<f64>, Failure> {
    if !(g.xmax > 0.0 && g.xmax.is_finite()) || g.nx < 2 {
        return Err(config_error(format!("need xmax > 0 and nx >= 2, got xmax = {}, nx = {}", g.xmax, g.nx)));
    }
    Ok(uniform_grid(g.xmax, g.nx))
}

fn thresholds(engine: &Engine, t: &ThresholdArgs) -> Result<(f64, f64), Failure> {
    match (t.a, t.b) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => {
            let th = solve_thresholds(engine)?;
            Ok((th.a_star, th.b_star))
        }
    }
}

fn sim_configs(engine: &Engine, xs: &[f64], (a, b): (f64, f64), s: &SimArgs) -> Vec<SimConfig> {
    xs.iter()
        .map(|&x| {
            let mut cfg = SimConfig::new(engine.model(), x, a, b, s.dt, s.n_paths, s.seed);
            if let Some(t) = s.t_max {
                cfg.t_max = t;
            }
            cfg
        })
        .collect()
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Solve { model, grid, out } => {
            let engine = load(&model)?;
            let xs = x_grid(&grid)?;
            let th = solve_thresholds(&engine)?;
            let v = value_function(&engine, &th)?;
            let mut csv = String::from("x,value\n");
            for x in xs {
                csv.push_str(&format!("{},{}\n", sig(x), sig(v.value(x)?)));
            }
            let residual = |r: Option<f64>| r.map_or_else(|| "n/a".to_string(), sig);
            eprintln!(
                "a_star={} b_star={} regime={} gamma_residual={} gamma_tilde_residual={}",
                sig(th.a_star),
                sig(th.b_star),
                th.regime.as_str(),
                residual(th.gamma),
                residual(th.gamma_tilde)
            );
            emit(&out, &csv)?;
            Ok(true)
        }
        Command::Value { model, a, b, x } => {
            let engine = load(&model)?;
            let v = engine.value_v_ab(a, b)?;
            let mut text = String::new();
            for xi in x {
                if xi < 0.0 {
                    return Err(config_error(format!("x must be nonnegative, got {xi}")));
                }
                text.push_str(&sig(v.value(xi)?));
                text.push('\n');
            }
            emit(&OutArg { out: None }, &text)?;
            Ok(true)
        }
        Command::Verify { model, grid_points, out } => {
            if grid_points < 2 {
                return Err(config_error("grid-points must be at least 2"));
            }
            let engine = load(&model)?;
            let th = solve_thresholds(&engine)?;
            let v = value_function(&engine, &th)?;
            let spec = GridSpec { n: grid_points, ..GridSpec::default() };
            let report = verify_optimality(&engine, &th, &v, &spec)?;
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("check {} failed: worst {} > tolerance {}", c.name, sig(c.worst), sig(c.tolerance));
            }
            emit(&out, &(report.to_json() + "\n"))?;
            Ok(report.passed)
        }
        Command::Simulate { model, thresholds: t, x0, ruin_laplace, sim, out } => {
            let engine = load(&model)?;
            let ab = thresholds(&engine, &t)?;
            let results = simulate_many(engine.model(), &sim_configs(&engine, &x0, ab, &sim))?;
            let mut csv = format!("{SIM_CSV_HEADER}\n");
            for r in results {
                let est = if ruin_laplace { r.ruin_laplace } else { r.value };
                csv.push_str(&est.csv_row(sig));
                csv.push('\n');
            }
            emit(&out, &csv)?;
            Ok(true)
        }
        Command::Sweep { model, param, grid, xgrid, out } => {
            let base = ModelParams::from_path(&model.model)?;
            let xs = x_grid(&xgrid)?;
            let table = sweep(&base, param, &grid, &xs)?;
            for p in &table.points {
                if let Err(e) = &p.outcome {
                    eprintln!("{}={}: {e}", param.name(), sig(p.param_value));
                }
            }
            eprintln!("monotone={}", table.monotone);
            for l in &table.limits {
                eprintln!("limit {}: b_star={} sup_distance={}", l.limit, sig(l.b_star), sig(l.sup_distance));
            }
            if let Some(case) = table.limit_case {
                eprintln!("limit_case={case:?}");
            }
            emit(&out, &table.to_csv(sig))?;
            Ok(table.points.iter().all(|p| p.outcome.is_ok()))
        }
        Command::Crosscheck { model, thresholds: t, x0, sim, out } => {
            let engine = load(&model)?;
            let ab = thresholds(&engine, &t)?;
            if sim.t_max.is_some() {
                return Err(config_error("crosscheck uses the default horizon 100/q; drop --t-max"));
            }
            let report = crosscheck(&engine, &[ab], &x0, sim.dt, sim.n_paths, sim.seed)?;
            eprintln!(
                "calibrated allowance: value={} ruin_laplace={} truncation={}",
                sig(report.value_allowance),
                sig(report.ruin_allowance),
                sig(report.truncation_bias)
            );
            let mut csv = format!("{CROSSCHECK_CSV_HEADER}\n");
            for row in &report.rows {
                csv.push_str(&row.csv_row(sig));
                csv.push('\n');
            }
            emit(&out, &csv)?;
            Ok(report.passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
