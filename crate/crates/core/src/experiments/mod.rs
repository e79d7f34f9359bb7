//! Lotka-Volterra invariance benchmark.
//!
//! A competitive two-species field on `[0,1]^2` is learned from a handful of
//! noisy samples. The square is forward invariant, so the learned field should
//! point inward (`<n, f> <= 0`) on the boundary.

mod demos;

pub use demos::{global_opt_lower_bound, ot_dual_estimate, GlobalOptResult, OtResult};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bounds::DomainGrid;
use crate::error::{KsosError, Result};
use crate::kernels::KernelSpec;
use crate::solver::{
    self, dot, fit_ksos, fit_sampled, fit_unconstrained, ConstraintBlock, ConstraintSpec, Dataset, EqualityPair,
    FitResult, Hyperparameters, SearchGrid,
};

/// Fields with norm below this are left out of the angular error.
pub const VANISHING_NORM: f64 = 1e-9;
/// Value substituted for exact-zero violations.
pub const MACHINE_EPS: f64 = f64::EPSILON;
/// Points per dimension of the interior metric grid.
pub const METRIC_RESOLUTION: usize = 100;
/// Points on the boundary metric grid (all four sides).
pub const BOUNDARY_POINTS: usize = 400;
/// Boundary points per side used when scoring `lambda_phi`.
pub const TUNING_POINTS_PER_SIDE: usize = 50;

const BOUNDARY_TOL: f64 = 1e-12;

/// `f(x) = (x1 (1 - x1 - 0.2 x2), x2 (1 - x2 - 0.4 x1))`.
pub fn lv_field(x: &[f64]) -> Vec<f64> {
    vec![x[0] * (1.0 - x[0] - 0.2 * x[1]), x[1] * (1.0 - x[1] - 0.4 * x[0])]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorFieldProblem {
    pub n: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl VectorFieldProblem {
    pub fn new(n: usize, noise_scale: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(KsosError::InvalidParameter("need at least one data point".into()));
        }
        if !(noise_scale.is_finite() && noise_scale >= 0.0) {
            return Err(KsosError::InvalidParameter(format!("noise scale must be >= 0, got {noise_scale}")));
        }
        Ok(Self { n, noise_scale, seed })
    }

    /// The benchmark setting: five points, noise `1e-2`.
    pub fn standard(seed: u64) -> Self {
        Self { n: 5, noise_scale: 1e-2, seed }
    }
}

/// Uniform inputs on the unit square, targets `f(x) + noise_scale * N(0, I)`.
pub fn make_dataset(problem: &VectorFieldProblem) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    let mut inputs = Vec::with_capacity(problem.n);
    let mut targets = Vec::with_capacity(problem.n);
    for _ in 0..problem.n {
        let x = vec![rng.random::<f64>(), rng.random::<f64>()];
        let mut y = lv_field(&x);
        for v in &mut y {
            let e: f64 = rng.sample(StandardNormal);
            *v += problem.noise_scale * e;
        }
        inputs.push(x);
        targets.push(y);
    }
    Dataset { inputs, targets }
}

/// Faces of the unit square in the order used for constraint blocks.
const FACES: [(usize, f64, [f64; 2]); 4] = [
    (0, 0.0, [-1.0, 0.0]),
    (0, 1.0, [1.0, 0.0]),
    (1, 0.0, [0.0, -1.0]),
    (1, 1.0, [0.0, 1.0]),
];

fn incident_faces(x: &[f64]) -> Result<Vec<usize>> {
    let inside = x.len() == 2 && x.iter().all(|&v| (-BOUNDARY_TOL..=1.0 + BOUNDARY_TOL).contains(&v));
    let faces: Vec<usize> = FACES
        .iter()
        .enumerate()
        .filter(|(_, (axis, level, _))| x.len() == 2 && (x[*axis] - level).abs() <= BOUNDARY_TOL)
        .map(|(i, _)| i)
        .collect();
    if !inside || faces.is_empty() {
        return Err(KsosError::NotOnBoundary(x.to_vec()));
    }
    Ok(faces)
}

/// Unit outward normals of every face containing `x`; corners get two.
pub fn outward_normal(x: &[f64]) -> Result<Vec<[f64; 2]>> {
    Ok(incident_faces(x)?.into_iter().map(|f| FACES[f].2).collect())
}

/// Point at arclength `t` in `[0, 4)` along the perimeter, counterclockwise from the origin.
pub fn perimeter_point(t: f64) -> Vec<f64> {
    let side = (t.floor() as usize).min(3);
    let s = t - side as f64;
    match side {
        0 => vec![s, 0.0],
        1 => vec![1.0, s],
        2 => vec![1.0 - s, 1.0],
        _ => vec![0.0, 1.0 - s],
    }
}

/// `m` equispaced perimeter points starting at the origin, `m / 4` per side.
pub fn perimeter_grid(m: usize) -> Vec<Vec<f64>> {
    (0..m).map(|k| perimeter_point(4.0 * k as f64 / m as f64)).collect()
}

/// Invariance constraints `-<n, f(x)> >= 0` at `m` perimeter samples, one block
/// per face (corners belong to both of their faces), plus `f(0) = 0`.
pub fn boundary_samples(m: usize) -> Result<ConstraintSpec> {
    if m < 4 || !m.is_multiple_of(4) {
        return Err(KsosError::InvalidSampleCount(m));
    }
    let mut points: Vec<Vec<Vec<f64>>> = vec![Vec::new(); FACES.len()];
    for x in perimeter_grid(m) {
        for f in incident_faces(&x)? {
            points[f].push(x.clone());
        }
    }
    let blocks = points
        .into_iter()
        .enumerate()
        .map(|(f, pts)| {
            let c = vec![-FACES[f].2[0], -FACES[f].2[1]];
            let n = pts.len();
            ConstraintBlock::new(pts, vec![c; n], vec![0.0; n])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstraintSpec {
        blocks,
        equalities: vec![EqualityPair { point: vec![0.0, 0.0], target: vec![0.0, 0.0] }],
    })
}

/// Dense constraint evaluation set: each point with all its `(c, d)` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintGrid {
    pub points: Vec<Vec<f64>>,
    pub rows: Vec<Vec<(Vec<f64>, f64)>>,
}

impl ConstraintGrid {
    /// Invariance rows on the perimeter, `total` points.
    pub fn lv_boundary(total: usize) -> Result<Self> {
        let points = perimeter_grid(total);
        let rows = points
            .iter()
            .map(|x| {
                outward_normal(x).map(|ns| ns.iter().map(|n| (vec![-n[0], -n[1]], 0.0)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points, rows })
    }

    /// The sample points and rows of a [`ConstraintSpec`].
    pub fn from_spec(spec: &ConstraintSpec) -> Self {
        let mut points = Vec::new();
        let mut rows = Vec::new();
        for block in &spec.blocks {
            for ((x, c), d) in block.points.iter().zip(&block.rows).zip(&block.offsets) {
                points.push(x.clone());
                rows.push(vec![(c.clone(), *d)]);
            }
        }
        Self { points, rows }
    }

    /// `max(0, -min_i c_i' f(x) - d_i)` at every point.
    pub fn violations(&self, f: &dyn Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
        self.points
            .iter()
            .zip(&self.rows)
            .map(|(x, rows)| {
                let fx = f(x);
                rows.iter().map(|(c, d)| dot(c, &fx) + d).fold(0.0_f64, f64::min).abs()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularError {
    pub value: f64,
    /// Grid points skipped because a field nearly vanishes there.
    pub excluded: usize,
}

/// Mean angle between the two fields over the grid.
pub fn angular_error(f_hat: &dyn Fn(&[f64]) -> Vec<f64>, f_true: &dyn Fn(&[f64]) -> Vec<f64>, grid: &DomainGrid) -> AngularError {
    let (mut total, mut count, mut excluded) = (0.0, 0usize, 0usize);
    for i in 0..grid.len() {
        let x = grid.point(i);
        let (a, b) = (f_hat(&x), f_true(&x));
        let (na, nb) = (dot(&a, &a).sqrt(), dot(&b, &b).sqrt());
        if na < VANISHING_NORM || nb < VANISHING_NORM {
            excluded += 1;
            continue;
        }
        // atan2 of the wedge norm keeps identical directions at exactly zero
        let mut wedge = 0.0;
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                wedge += (a[i] * b[j] - a[j] * b[i]).powi(2);
            }
        }
        total += wedge.sqrt().atan2(dot(&a, &b));
        count += 1;
    }
    AngularError { value: if count == 0 { 0.0 } else { total / count as f64 }, excluded }
}

/// Grid mean of `|f_hat - f_true|^2`.
pub fn l2_error(f_hat: &dyn Fn(&[f64]) -> Vec<f64>, f_true: &dyn Fn(&[f64]) -> Vec<f64>, grid: &DomainGrid) -> f64 {
    let total: f64 = (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            f_hat(&x).iter().zip(f_true(&x)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum();
    total / grid.len() as f64
}

pub fn linf_violation(f_hat: &dyn Fn(&[f64]) -> Vec<f64>, constraints: &ConstraintGrid) -> f64 {
    constraints.violations(f_hat).into_iter().fold(0.0, f64::max)
}

pub fn l1_violation(f_hat: &dyn Fn(&[f64]) -> Vec<f64>, constraints: &ConstraintGrid) -> f64 {
    let v = constraints.violations(f_hat);
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub angular: f64,
    pub angular_excluded: usize,
    pub l2: f64,
    pub linf_violation: f64,
    pub l1_violation: f64,
    pub grid_resolution: usize,
}

/// The four benchmark metrics of a learned field against [`lv_field`].
pub fn lv_metrics(f_hat: &dyn Fn(&[f64]) -> Vec<f64>, resolution: usize, boundary: &ConstraintGrid) -> Result<MetricsReport> {
    let grid = DomainGrid::unit_cube(2, resolution)?;
    let ang = angular_error(f_hat, &lv_field, &grid);
    Ok(MetricsReport {
        angular: ang.value,
        angular_excluded: ang.excluded,
        l2: l2_error(f_hat, &lv_field, &grid),
        linf_violation: linf_violation(f_hat, boundary),
        l1_violation: l1_violation(f_hat, boundary),
        grid_resolution: resolution,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FitMode {
    None,
    Sampled,
    Ksos,
}

impl FitMode {
    pub const ALL: [FitMode; 3] = [FitMode::None, FitMode::Sampled, FitMode::Ksos];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Sampled => "sampled",
            Self::Ksos => "ksos",
        }
    }
}

impl std::str::FromStr for FitMode {
    type Err = KsosError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(Self::None),
            "sampled" => Ok(Self::Sampled),
            "ksos" => Ok(Self::Ksos),
            other => Err(KsosError::InvalidParameter(format!("unknown mode '{other}'"))),
        }
    }
}

/// Fit one mode on the invariance problem with `m` boundary samples.
pub fn fit_lv(mode: FitMode, data: &Dataset, m: usize, hyper: &Hyperparameters) -> Result<(FitResult, ConstraintSpec)> {
    let constraints = boundary_samples(m)?;
    let spec = KernelSpec::new(hyper.sigma_k, 2)?;
    let fit = match mode {
        FitMode::None => fit_unconstrained(data, spec, hyper.lambda_k)?,
        FitMode::Sampled => fit_sampled(data, spec, hyper.lambda_k, &constraints)?,
        FitMode::Ksos => fit_ksos(data, spec, hyper.lambda_k, hyper.lambda_phi, KernelSpec::scalar(hyper.sigma_phi)?, &constraints)?,
    };
    Ok((fit, constraints))
}

/// Hyperparameters tuned on one dataset with `m` boundary samples.
pub fn tune_lv(data: &Dataset, m: usize, grid: &SearchGrid) -> Result<Hyperparameters> {
    let constraints = boundary_samples(m)?;
    let scoring = ConstraintGrid::lv_boundary(4 * TUNING_POINTS_PER_SIDE)?;
    solver::hyperparameter_search(data, &constraints, grid, &|model| l1_violation(&|x| model.eval(x), &scoring))
}

#[derive(Debug, Clone, PartialEq)]
pub enum HyperChoice {
    Fixed(Hyperparameters),
    /// Bandwidths and `lambda_phi` searched on the first repeat's dataset with
    /// `tune_m` boundary samples; `lambda_K` by GCV on every repeat's dataset.
    Search { grid: SearchGrid, tune_m: Option<usize> },
    /// Fixed bandwidths and `lambda_phi`; `lambda_K` by GCV on every repeat's dataset.
    Gcv { sigma_k: f64, sigma_phi: f64, lambda_phi: f64, lambda_grid: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub n: usize,
    pub noise_scale: f64,
    pub m_list: Vec<usize>,
    pub repeats: usize,
    pub modes: Vec<FitMode>,
    pub master_seed: u64,
    pub hyper: HyperChoice,
    pub metric_resolution: usize,
    pub boundary_points: usize,
}

impl BenchmarkConfig {
    /// Five noisy samples, M in {8, 20, 40}, 100 repeats, `sigma_K = 1`, `lambda_phi = 1e-3`.
    pub fn standard(master_seed: u64) -> Self {
        Self {
            n: 5,
            noise_scale: 1e-2,
            m_list: vec![8, 20, 40],
            repeats: 100,
            modes: FitMode::ALL.to_vec(),
            master_seed,
            hyper: HyperChoice::Gcv {
                sigma_k: 1.0,
                sigma_phi: 0.5,
                lambda_phi: 1e-3,
                lambda_grid: SearchGrid::default().lambda_k,
            },
            metric_resolution: METRIC_RESOLUTION,
            boundary_points: BOUNDARY_POINTS,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(KsosError::InvalidParameter("repeats must be >= 1".into()));
        }
        if self.m_list.is_empty() || self.modes.is_empty() {
            return Err(KsosError::EmptyInput("M list or modes"));
        }
        for &m in &self.m_list {
            if m < 4 || m % 4 != 0 {
                return Err(KsosError::InvalidSampleCount(m));
            }
        }
        let ridge_grid = match &self.hyper {
            HyperChoice::Fixed(_) => None,
            HyperChoice::Search { grid, .. } => Some(&grid.lambda_k),
            HyperChoice::Gcv { lambda_grid, .. } => Some(lambda_grid),
        };
        if ridge_grid.is_some_and(|g| g.is_empty()) {
            return Err(KsosError::EmptyInput("lambda_K grid"));
        }
        VectorFieldProblem::new(self.n, self.noise_scale, 0)?;
        Ok(())
    }
}

/// One fit of one repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatRecord {
    pub mode: FitMode,
    pub m: usize,
    pub repeat: usize,
    pub converged: bool,
    pub metrics: MetricsReport,
    /// Largest violation over the `m` constraint samples themselves.
    pub sample_violation: f64,
    pub has_sos_blocks: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Angular,
    L2,
    Linf,
    L1,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Angular, Metric::L2, Metric::Linf, Metric::L1];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Angular => "angular",
            Self::L2 => "l2",
            Self::Linf => "linf",
            Self::L1 => "l1",
        }
    }

    fn read(self, m: &MetricsReport) -> f64 {
        match self {
            Self::Angular => m.angular,
            Self::L2 => m.l2,
            Self::Linf => m.linf_violation,
            Self::L1 => m.l1_violation,
        }
    }

    fn is_violation(self) -> bool {
        matches!(self, Self::Linf | Self::L1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSummary {
    pub mode: FitMode,
    pub m: usize,
    pub metric: Metric,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub n_converged: usize,
    pub n_substituted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    /// Indexed by repeat.
    pub hypers: Vec<Hyperparameters>,
    pub records: Vec<RepeatRecord>,
    pub cells: Vec<CellSummary>,
}

impl BenchmarkResult {
    pub fn cell(&self, mode: FitMode, m: usize, metric: Metric) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.mode == mode && c.m == m && c.metric == metric)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Runs every (mode, M, repeat) fit; repeat `r` uses seed `master_seed + r` for a fresh dataset.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkResult> {
    config.validate()?;
    let datasets: Vec<Dataset> = (0..config.repeats)
        .map(|r| {
            let seed = config.master_seed.wrapping_add(r as u64);
            make_dataset(&VectorFieldProblem::new(config.n, config.noise_scale, seed).expect("validated"))
        })
        .collect();
    let with_gcv_ridge = |base: Hyperparameters, grid: &[f64]| -> Result<Vec<Hyperparameters>> {
        let spec = KernelSpec::new(base.sigma_k, 2)?;
        datasets
            .iter()
            .map(|d| {
                let lambda_k = solver::gcv_select(&spec.gram(&d.inputs), &d.target_matrix(), grid)?;
                Ok(Hyperparameters { lambda_k, ..base })
            })
            .collect()
    };
    let hypers = match &config.hyper {
        HyperChoice::Fixed(h) => vec![*h; config.repeats],
        HyperChoice::Search { grid, tune_m } => {
            let m = tune_m.unwrap_or_else(|| {
                if config.m_list.contains(&20) {
                    20
                } else {
                    config.m_list[config.m_list.len() / 2]
                }
            });
            with_gcv_ridge(tune_lv(&datasets[0], m, grid)?, &grid.lambda_k)?
        }
        HyperChoice::Gcv { sigma_k, sigma_phi, lambda_phi, lambda_grid } => {
            let base = Hyperparameters { sigma_k: *sigma_k, lambda_k: lambda_grid[0], sigma_phi: *sigma_phi, lambda_phi: *lambda_phi };
            with_gcv_ridge(base, lambda_grid)?
        }
    };
    let boundary = ConstraintGrid::lv_boundary(config.boundary_points)?;

    let mut tasks = Vec::new();
    for &mode in &config.modes {
        for &m in &config.m_list {
            for r in 0..config.repeats {
                tasks.push((mode, m, r));
            }
        }
    }
    let records = tasks
        .par_iter()
        .map(|&(mode, m, repeat)| -> Result<RepeatRecord> {
            let (fit, constraints) = fit_lv(mode, &datasets[repeat], m, &hypers[repeat])?;
            let f = |x: &[f64]| fit.model.eval(x);
            let metrics = lv_metrics(&f, config.metric_resolution, &boundary)?;
            let sample_violation = ConstraintGrid::from_spec(&constraints).violations(&f).into_iter().fold(0.0, f64::max);
            Ok(RepeatRecord {
                mode,
                m,
                repeat,
                converged: fit.report.converged,
                metrics,
                sample_violation,
                has_sos_blocks: !fit.sos_blocks.is_empty(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for &mode in &config.modes {
        for &m in &config.m_list {
            let group: Vec<&RepeatRecord> = records.iter().filter(|r| r.mode == mode && r.m == m && r.converged).collect();
            for metric in Metric::ALL {
                let mut substituted = 0;
                let mut values: Vec<f64> = group
                    .iter()
                    .map(|r| {
                        let v = metric.read(&r.metrics);
                        if metric.is_violation() && v == 0.0 {
                            substituted += 1;
                            MACHINE_EPS
                        } else {
                            v
                        }
                    })
                    .collect();
                values.sort_by(f64::total_cmp);
                cells.push(CellSummary {
                    mode,
                    m,
                    metric,
                    q1: quantile(&values, 0.25),
                    median: quantile(&values, 0.5),
                    q3: quantile(&values, 0.75),
                    n_converged: group.len(),
                    n_substituted: substituted,
                });
            }
        }
    }
    Ok(BenchmarkResult { hypers, records, cells })
}
