mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use ksos::bounds::{self, BoundsReport, BoundsTerms, DomainGrid, BOUNDS_RESOLUTION};
use ksos::experiments::{
    self, boundary_samples, fit_lv, global_opt_lower_bound, lv_metrics, make_dataset, ot_dual_estimate, perimeter_grid,
    BenchmarkConfig, ConstraintGrid, FitMode, HyperChoice, VectorFieldProblem, BOUNDARY_POINTS, METRIC_RESOLUTION,
};
use ksos::solver::{gcv_select, solve_margin_function, Hyperparameters, SearchGrid};
use ksos::KernelSpec;

use config::{Config, View};

#[derive(Parser, Debug)]
#[command(name = "ksos", version, about = "Kernel sum-of-squares constrained regression")]
struct Cli {
    /// Configuration file (`key = value` lines, `[command]` sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for stochastic commands; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Fit one model on the Lotka-Volterra problem.
    Fit,
    /// Repeated fits over modes and sample counts, aggregated into quartiles.
    Benchmark,
    /// Constraint-approximation bounds for a kSoS fit.
    Bounds,
    /// Lower bound on the minimum of a 1-d function from samples.
    Globalopt,
    /// Transport cost between two 1-d empirical measures.
    Ot,
}

impl Command {
    fn section(self) -> &'static str {
        match self {
            Self::Fit => "fit",
            Self::Benchmark => "benchmark",
            Self::Bounds => "bounds",
            Self::Globalopt => "globalopt",
            Self::Ot => "ot",
        }
    }
}

enum Outcome {
    Done,
    NotConverged,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("solver did not converge");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Config::parse(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => Config::default(),
    };
    let view = config.view(cli.command.section());
    let start = Instant::now();
    let (files, outcome) = match cli.command {
        Command::Fit => cmd_fit(&view, seed(cli, &view)?)?,
        Command::Benchmark => cmd_benchmark(&view, seed(cli, &view)?)?,
        Command::Bounds => cmd_bounds(&view, seed(cli, &view)?)?,
        Command::Globalopt => cmd_globalopt(&view)?,
        Command::Ot => cmd_ot(&view)?,
    };
    write_outputs(&cli.out, cli.force, &files)?;
    eprintln!("{} finished in {:.3} s", cli.command.section(), start.elapsed().as_secs_f64());
    Ok(outcome)
}

fn seed(cli: &Cli, view: &View) -> Result<u64> {
    match cli.seed {
        Some(s) => Ok(s),
        None => view
            .get::<u64>("seed")?
            .ok_or_else(|| anyhow!("this command is stochastic: pass --seed or set 'seed' in the config")),
    }
}

/// Writes every file, refusing to touch any existing one without `force`.
fn write_outputs(dir: &Path, force: bool, files: &[(String, String)]) -> Result<()> {
    if !force {
        if let Some((name, _)) = files.iter().find(|(name, _)| dir.join(name).exists()) {
            bail!("{} exists; pass --force to overwrite", dir.join(name).display());
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, content) in files {
        let path = dir.join(name);
        fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), num)
}

fn csv(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

const PROBLEM_KEYS: [&str; 11] =
    ["seed", "mode", "n", "noise", "m", "sigma_k", "lambda_k", "sigma_phi", "lambda_phi", "resolution", "boundary_points"];

struct ProblemSetup {
    mode: FitMode,
    problem: VectorFieldProblem,
    m: usize,
    hyper: Hyperparameters,
    resolution: usize,
    boundary_points: usize,
}

fn problem_setup(view: &View, seed: u64, default_mode: FitMode) -> Result<ProblemSetup> {
    let mode = view.get_or("mode", default_mode)?;
    let problem = VectorFieldProblem::new(view.get_or("n", 5)?, view.get_or("noise", 1e-2)?, seed)?;
    let m: usize = view.get_or("m", 20)?;
    boundary_samples(m)?;
    let resolution = view.get_or("resolution", METRIC_RESOLUTION)?;
    if resolution < 2 {
        bail!("resolution must be >= 2");
    }
    let boundary_points: usize = view.get_or("boundary_points", BOUNDARY_POINTS)?;
    if boundary_points < 4 || !boundary_points.is_multiple_of(4) {
        bail!("boundary_points must be a positive multiple of 4");
    }
    let sigma_k: f64 = view.get_or("sigma_k", 1.0)?;
    let spec = KernelSpec::new(sigma_k, 2)?;
    let lambda_k = match view.get::<f64>("lambda_k")? {
        Some(l) => l,
        None => {
            let data = make_dataset(&problem);
            gcv_select(&spec.gram(&data.inputs), &data.target_matrix(), &SearchGrid::default().lambda_k)?
        }
    };
    let hyper = Hyperparameters {
        sigma_k,
        lambda_k,
        sigma_phi: view.get_or("sigma_phi", sigma_k / 2.0)?,
        lambda_phi: view.get_or("lambda_phi", 1e-3)?,
    };
    Ok(ProblemSetup { mode, problem, m, hyper, resolution, boundary_points })
}

fn cmd_fit(view: &View, seed: u64) -> Result<(Vec<(String, String)>, Outcome)> {
    view.check_keys(&PROBLEM_KEYS)?;
    let setup = problem_setup(view, seed, FitMode::Ksos)?;
    let data = make_dataset(&setup.problem);
    let (fit, _) = fit_lv(setup.mode, &data, setup.m, &setup.hyper)?;
    let boundary = ConstraintGrid::lv_boundary(setup.boundary_points)?;
    let f = |x: &[f64]| fit.model.eval(x);
    let metrics = lv_metrics(&f, setup.resolution, &boundary)?;
    let r = &fit.report;
    eprintln!("solve wall time {:.3} s", r.wall_time.as_secs_f64());

    let coeffs: Vec<Vec<String>> = fit
        .model
        .anchors()
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let a = fit.model.coefficients().row(j);
            vec![num(z[0]), num(z[1]), num(a[0]), num(a[1])]
        })
        .collect();
    let report = vec![vec![
        setup.mode.as_str().to_string(),
        setup.m.to_string(),
        num(setup.hyper.sigma_k),
        num(setup.hyper.lambda_k),
        num(setup.hyper.sigma_phi),
        num(setup.hyper.lambda_phi),
        num(r.objective),
        num(r.primal_residual),
        num(r.stationarity_residual),
        r.iterations.to_string(),
        r.converged.to_string(),
        num(metrics.angular),
        metrics.angular_excluded.to_string(),
        num(metrics.l2),
        num(metrics.linf_violation),
        num(metrics.l1_violation),
        metrics.grid_resolution.to_string(),
    ]];
    let grid = DomainGrid::unit_cube(2, setup.resolution)?;
    let field: Vec<Vec<String>> = grid
        .points()
        .iter()
        .map(|x| {
            let v = f(x);
            vec![num(x[0]), num(x[1]), num(v[0]), num(v[1])]
        })
        .collect();
    let files = vec![
        ("fit_coefficients.csv".to_string(), csv("x1,x2,alpha1,alpha2", &coeffs)),
        (
            "fit_report.csv".to_string(),
            csv(
                "mode,M,sigma_k,lambda_k,sigma_phi,lambda_phi,objective,primal_residual,stationarity_residual,iterations,converged,angular,angular_excluded,l2,linf_violation,l1_violation,grid_resolution",
                &report,
            ),
        ),
        ("fit_grid.csv".to_string(), csv("x1,x2,f1,f2", &field)),
    ];
    let outcome = if r.converged { Outcome::Done } else { Outcome::NotConverged };
    Ok((files, outcome))
}

fn cmd_benchmark(view: &View, seed: u64) -> Result<(Vec<(String, String)>, Outcome)> {
    view.check_keys(&[
        "seed", "n", "noise", "m_list", "repeats", "modes", "hyper", "tune_m", "sigma_k", "lambda_k", "sigma_phi",
        "lambda_phi", "sigma_grid", "lambda_phi_grid", "resolution", "boundary_points",
    ])?;
    let defaults = BenchmarkConfig::standard(seed);
    let modes = match view.list::<FitMode>("modes")? {
        Some(m) => m,
        None => defaults.modes.clone(),
    };
    let hyper = match view.get_or("hyper", "gcv".to_string())?.as_str() {
        "search" => {
            let mut grid = SearchGrid::default();
            if let Some(s) = view.list::<f64>("sigma_grid")? {
                grid.sigma_k = s;
            }
            if let Some(l) = view.list::<f64>("lambda_phi_grid")? {
                grid.lambda_phi = l;
            }
            HyperChoice::Search { grid, tune_m: view.get("tune_m")? }
        }
        "fixed" => {
            let sigma_k = view.get_or("sigma_k", 1.0)?;
            HyperChoice::Fixed(Hyperparameters {
                sigma_k,
                lambda_k: view.get_or("lambda_k", 1e-3)?,
                sigma_phi: view.get_or("sigma_phi", sigma_k / 2.0)?,
                lambda_phi: view.get_or("lambda_phi", 1e-3)?,
            })
        }
        "gcv" => {
            let sigma_k = view.get_or("sigma_k", 1.0)?;
            HyperChoice::Gcv {
                sigma_k,
                sigma_phi: view.get_or("sigma_phi", sigma_k / 2.0)?,
                lambda_phi: view.get_or("lambda_phi", 1e-3)?,
                lambda_grid: SearchGrid::default().lambda_k,
            }
        }
        other => bail!("hyper must be 'search', 'fixed' or 'gcv', got '{other}'"),
    };
    let config = BenchmarkConfig {
        n: view.get_or("n", defaults.n)?,
        noise_scale: view.get_or("noise", defaults.noise_scale)?,
        m_list: view.list("m_list")?.unwrap_or(defaults.m_list),
        repeats: view.get_or("repeats", defaults.repeats)?,
        modes,
        master_seed: seed,
        hyper,
        metric_resolution: view.get_or("resolution", defaults.metric_resolution)?,
        boundary_points: view.get_or("boundary_points", defaults.boundary_points)?,
    };
    let result = experiments::run_benchmark(&config)?;
    let h = result.hypers[0];
    eprintln!(
        "hyperparameters (repeat 0): sigma_k={} lambda_k={:e} sigma_phi={} lambda_phi={:e}",
        h.sigma_k, h.lambda_k, h.sigma_phi, h.lambda_phi
    );
    let cells: Vec<Vec<String>> = result
        .cells
        .iter()
        .map(|c| {
            vec![
                c.mode.as_str().to_string(),
                c.m.to_string(),
                c.metric.as_str().to_string(),
                num(c.q1),
                num(c.median),
                num(c.q3),
                c.n_converged.to_string(),
                c.n_substituted.to_string(),
            ]
        })
        .collect();
    let repeats: Vec<Vec<String>> = result
        .records
        .iter()
        .map(|r| {
            vec![
                r.mode.as_str().to_string(),
                r.m.to_string(),
                r.repeat.to_string(),
                r.converged.to_string(),
                num(result.hypers[r.repeat].lambda_k),
                num(r.metrics.angular),
                num(r.metrics.l2),
                num(r.metrics.linf_violation),
                num(r.metrics.l1_violation),
                num(r.sample_violation),
            ]
        })
        .collect();
    let files = vec![
        ("benchmark.csv".to_string(), csv("mode,M,metric,q1,median,q3,n_converged,n_substituted", &cells)),
        (
            "benchmark_repeats.csv".to_string(),
            csv("mode,M,repeat,converged,lambda_k,angular,l2,linf_violation,l1_violation,sample_violation", &repeats),
        ),
    ];
    let outcome = if result.records.iter().all(|r| r.converged) { Outcome::Done } else { Outcome::NotConverged };
    Ok((files, outcome))
}

fn cmd_bounds(view: &View, seed: u64) -> Result<(Vec<(String, String)>, Outcome)> {
    let mut keys = PROBLEM_KEYS.to_vec();
    keys.extend(["s", "domain_resolution", "kset_points", "beta", "ball_radius", "h"]);
    view.check_keys(&keys)?;
    let setup = problem_setup(view, seed, FitMode::Ksos)?;
    if setup.mode != FitMode::Ksos {
        bail!("bounds are computed for mode = ksos");
    }
    let s: usize = view.get_or("s", 2)?;
    if !(1..=2).contains(&s) {
        bail!("s must be 1 or 2");
    }
    let domain_res = view.get_or("domain_resolution", BOUNDS_RESOLUTION)?;
    let kset_points: usize = view.get_or("kset_points", 4 * BOUNDS_RESOLUTION)?;
    if kset_points < 4 {
        bail!("kset_points must be >= 4");
    }
    let data = make_dataset(&setup.problem);
    let (fit, constraints) = fit_lv(FitMode::Ksos, &data, setup.m, &setup.hyper)?;
    let spec = KernelSpec::new(setup.hyper.sigma_k, 2)?;
    let phi_spec = KernelSpec::scalar(setup.hyper.sigma_phi)?;

    let kset = DomainGrid::from_points(perimeter_grid(kset_points))?;
    let omega = DomainGrid::unit_cube(2, domain_res)?;
    let h = match view.get::<f64>("h")? {
        Some(h) if h >= 0.0 => h,
        Some(h) => bail!("h must be >= 0, got {h}"),
        None => bounds::fill_distance(&constraints.sample_points(), &kset)?,
    };
    let rows: Vec<Vec<f64>> = constraints.blocks.iter().flat_map(|b| b.rows.iter().cloned()).collect();
    let m_a = fit
        .sos_blocks
        .iter()
        .zip(&constraints.blocks)
        .map(|(sos, block)| {
            let values = nalgebra::DMatrix::from_vec(block.len(), 1, block.values(&fit.model));
            bounds::ma_bound(sos.basis().factor(), &values)
        })
        .fold(0.0, f64::max);
    let gap_inputs = match view.get::<f64>("beta")? {
        Some(beta) => Some((beta, solve_margin_function(&constraints, spec)?.norm)),
        None => None,
    };
    let terms = BoundsTerms {
        h,
        s,
        d: 2,
        // the invariance offsets vanish identically
        d_seminorm1: 0.0,
        d_seminorm: 0.0,
        ck1: bounds::ck_constant(spec, &rows, 2, 1)?,
        cks: bounds::ck_constant(spec, &rows, 2, s)?,
        d2: bounds::kernel_deriv_sup(phi_spec, &omega, s)?,
        m_f: fit.model.rkhs_norm(),
        m_a,
        gap_inputs,
        ball_radius: view.get("ball_radius")?,
    };
    let report = BoundsReport::assemble(&terms)?;
    let text = report.to_text();
    print!("{text}");
    let row = vec![vec![
        num(report.h),
        report.s.to_string(),
        num(report.d_seminorm),
        num(report.ck1),
        num(report.cks),
        num(report.d2),
        num(report.c0),
        num(report.m_f),
        num(report.m_a),
        num(report.sigma_slow),
        opt_num(report.sigma_fast),
        num(report.sigma),
        opt_num(report.gap),
        report.fast_rate_conditional.to_string(),
    ]];
    let files = vec![
        (
            "bounds.csv".to_string(),
            csv("h,s,d_seminorm,C_K1,C_Ks,D2,C0,M_f,M_A,sigma_slow,sigma_fast,sigma,gap,fast_rate_conditional", &row),
        ),
        ("bounds.txt".to_string(), text),
    ];
    let outcome = if fit.report.converged { Outcome::Done } else { Outcome::NotConverged };
    Ok((files, outcome))
}

fn cmd_globalopt(view: &View) -> Result<(Vec<(String, String)>, Outcome)> {
    view.check_keys(&["function", "center", "value", "m", "lower", "upper", "sigma_phi", "lambda_tr"])?;
    let function = view.get_or("function", "parabola".to_string())?;
    let center: f64 = view.get_or("center", 0.3)?;
    let value: f64 = view.get_or("value", 5.0)?;
    let g: Box<dyn Fn(&[f64]) -> f64> = match function.as_str() {
        "parabola" => Box::new(move |x| (x[0] - center).powi(2)),
        "constant" => Box::new(move |_| value),
        "cosine" => Box::new(move |x| (6.0 * (x[0] - center)).cos()),
        other => bail!("function must be parabola, constant or cosine, got '{other}'"),
    };
    let m: usize = view.get_or("m", 50)?;
    let (lo, hi): (f64, f64) = (view.get_or("lower", 0.0)?, view.get_or("upper", 1.0)?);
    if m == 0 || !(lo < hi) {
        bail!("need m >= 1 and lower < upper");
    }
    let samples: Vec<Vec<f64>> = if m == 1 {
        vec![vec![0.5 * (lo + hi)]]
    } else {
        (0..m).map(|i| vec![lo + (hi - lo) * i as f64 / (m - 1) as f64]).collect()
    };
    let phi = KernelSpec::scalar(view.get_or("sigma_phi", 0.3)?)?;
    let result = global_opt_lower_bound(&*g, &samples, phi, view.get_or("lambda_tr", 1e-6)?)?;
    let sampled_min = samples.iter().map(|x| g(x)).fold(f64::INFINITY, f64::min);
    let r = &result.report;
    println!("c_hat = {}", result.c_hat);
    let row = vec![vec![
        num(result.c_hat),
        num(sampled_min),
        num(result.sos.trace()),
        num(r.objective),
        num(r.primal_residual),
        num(r.stationarity_residual),
        r.iterations.to_string(),
        r.converged.to_string(),
    ]];
    let files = vec![(
        "globalopt.csv".to_string(),
        csv("c_hat,sampled_min,trace,objective,primal_residual,stationarity_residual,iterations,converged", &row),
    )];
    let outcome = if r.converged { Outcome::Done } else { Outcome::NotConverged };
    Ok((files, outcome))
}

fn cmd_ot(view: &View) -> Result<(Vec<(String, String)>, Outcome)> {
    view.check_keys(&["n", "shift", "sigma_k", "sigma_phi", "lambda_k", "lambda_tr"])?;
    let n: usize = view.get_or("n", 8)?;
    if n == 0 {
        bail!("n must be >= 1");
    }
    let shift: f64 = view.get_or("shift", 0.5)?;
    let xs: Vec<Vec<f64>> = (0..n).map(|i| vec![if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 }]).collect();
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] + shift]).collect();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = xs.iter().flat_map(|a| ys.iter().map(move |b| (a.clone(), b.clone()))).collect();
    let cost = |a: &[f64], b: &[f64]| (a[0] - b[0]).powi(2);
    let result = ot_dual_estimate(
        &xs,
        &ys,
        &cost,
        &pairs,
        KernelSpec::scalar(view.get_or("sigma_k", 0.5)?)?,
        KernelSpec::scalar(view.get_or("sigma_phi", 0.3)?)?,
        view.get_or("lambda_k", 1e-6)?,
        view.get_or("lambda_tr", 1e-6)?,
    )?;
    let r = &result.report;
    println!("W_hat = {}", result.w_hat);
    let row = vec![vec![
        num(result.w_hat),
        num(shift * shift),
        num(result.sos.trace()),
        num(r.objective),
        num(r.primal_residual),
        num(r.stationarity_residual),
        r.iterations.to_string(),
        r.converged.to_string(),
    ]];
    let files = vec![(
        "ot.csv".to_string(),
        csv("W_hat,shift_cost,trace,objective,primal_residual,stationarity_residual,iterations,converged", &row),
    )];
    let outcome = if r.converged { Outcome::Done } else { Outcome::NotConverged };
    Ok((files, outcome))
}
