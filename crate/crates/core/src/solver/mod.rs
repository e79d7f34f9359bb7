//! Constrained kernel ridge regression.
//!
//! The loss is `sum_n |y_n - f(x_n)|^2 + lambda_K |f|_K^2 (+ lambda_phi sum_i tr(A_i))`
//! over a diagonal Gaussian vRKHS. Three modes are available: closed-form ridge
//! ([`fit_unconstrained`]), affine inequalities at sample points ([`fit_sampled`]),
//! and kSoS equalities at sample points ([`fit_ksos`]). Both constrained modes
//! use the representer expansion over data points, constraint samples and
//! equality points.

pub(crate) mod admm;
pub(crate) mod features;

use std::time::Duration;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{KsosError, Result};
use crate::kernels::{dedup_points, KernelSpec};
use crate::sos::{SosBasis, SosModel};

pub use admm::AdmmSettings;
use admm::{ConeBlock, SplitProblem, SplitSolution};
use features::FeatureBasis;

/// Training pairs `(x_n, y_n)` with `y_n` in `R^P`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(KsosError::EmptyInput("dataset"));
        }
        if inputs.len() != targets.len() {
            return Err(KsosError::DimensionMismatch { expected: inputs.len(), found: targets.len() });
        }
        let (d, p) = (inputs[0].len(), targets[0].len());
        for (x, y) in inputs.iter().zip(&targets) {
            if x.len() != d {
                return Err(KsosError::DimensionMismatch { expected: d, found: x.len() });
            }
            if y.len() != p {
                return Err(KsosError::DimensionMismatch { expected: p, found: y.len() });
            }
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.targets[0].len()
    }

    /// `N x P` target matrix.
    pub fn target_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.output_dim(), |n, p| self.targets[n][p])
    }

    /// Copy with sample `n` removed.
    pub fn without(&self, n: usize) -> Self {
        let mut inputs = self.inputs.clone();
        let mut targets = self.targets.clone();
        inputs.remove(n);
        targets.remove(n);
        Self { inputs, targets }
    }
}

/// `f_p(x) = sum_j alpha_{j,p} k(x, z_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresenterModel {
    anchors: Vec<Vec<f64>>,
    spec: KernelSpec,
    coefficients: DMatrix<f64>,
}

impl RepresenterModel {
    pub fn new(anchors: Vec<Vec<f64>>, spec: KernelSpec, coefficients: DMatrix<f64>) -> Result<Self> {
        if coefficients.nrows() != anchors.len() {
            return Err(KsosError::DimensionMismatch { expected: anchors.len(), found: coefficients.nrows() });
        }
        if coefficients.ncols() != spec.output_dim() {
            return Err(KsosError::DimensionMismatch { expected: spec.output_dim(), found: coefficients.ncols() });
        }
        Ok(Self { anchors, spec, coefficients })
    }

    pub fn zero(anchors: Vec<Vec<f64>>, spec: KernelSpec) -> Self {
        let coefficients = DMatrix::zeros(anchors.len(), spec.output_dim());
        Self { anchors, spec, coefficients }
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let k = self.spec.kernel_vector(&self.anchors, x);
        (self.coefficients.transpose() * k).iter().copied().collect()
    }

    /// `d^alpha f(x)`, closed form for `|alpha| <= 2`.
    pub fn partial(&self, alpha: &[usize], x: &[f64]) -> Result<Vec<f64>> {
        let zero = vec![0; alpha.len()];
        let mut out = vec![0.0; self.output_dim()];
        for (j, z) in self.anchors.iter().enumerate() {
            let kd = self.spec.partial(alpha, &zero, x, z)?;
            for (p, o) in out.iter_mut().enumerate() {
                *o += self.coefficients[(j, p)] * kd;
            }
        }
        Ok(out)
    }

    /// `sum_p alpha_p' G_Z alpha_p`.
    pub fn rkhs_norm_squared(&self) -> f64 {
        let g = self.spec.gram(&self.anchors);
        (0..self.output_dim())
            .map(|p| {
                let a = self.coefficients.column(p);
                a.dot(&(&g * a))
            })
            .sum::<f64>()
            .max(0.0)
    }

    pub fn rkhs_norm(&self) -> f64 {
        self.rkhs_norm_squared().sqrt()
    }
}

/// One family `i` of affine constraints `c_i(x)' f(x) + d_i(x) >= 0`, sampled at its own points.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintBlock {
    pub points: Vec<Vec<f64>>,
    pub rows: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
}

impl ConstraintBlock {
    pub fn new(points: Vec<Vec<f64>>, rows: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self> {
        if points.len() != rows.len() {
            return Err(KsosError::DimensionMismatch { expected: points.len(), found: rows.len() });
        }
        if points.len() != offsets.len() {
            return Err(KsosError::DimensionMismatch { expected: points.len(), found: offsets.len() });
        }
        Ok(Self { points, rows, offsets })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `c(x_m)' f(x_m) + d(x_m)` for every sample.
    pub fn values(&self, model: &RepresenterModel) -> Vec<f64> {
        self.points
            .iter()
            .zip(&self.rows)
            .zip(&self.offsets)
            .map(|((x, c), d)| dot(c, &model.eval(x)) + d)
            .collect()
    }
}

/// Exact interpolation constraint `f(point) = target`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityPair {
    pub point: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSpec {
    pub blocks: Vec<ConstraintBlock>,
    pub equalities: Vec<EqualityPair>,
}

impl ConstraintSpec {
    pub fn validate(&self, input_dim: usize, output_dim: usize) -> Result<()> {
        for block in &self.blocks {
            for ((x, c), d) in block.points.iter().zip(&block.rows).zip(&block.offsets) {
                if x.len() != input_dim {
                    return Err(KsosError::DimensionMismatch { expected: input_dim, found: x.len() });
                }
                if c.len() != output_dim {
                    return Err(KsosError::DimensionMismatch { expected: output_dim, found: c.len() });
                }
                if !d.is_finite() || c.iter().any(|v| !v.is_finite()) {
                    return Err(KsosError::InvalidParameter("non-finite constraint data".into()));
                }
            }
        }
        for eq in &self.equalities {
            if eq.point.len() != input_dim {
                return Err(KsosError::DimensionMismatch { expected: input_dim, found: eq.point.len() });
            }
            if eq.target.len() != output_dim {
                return Err(KsosError::DimensionMismatch { expected: output_dim, found: eq.target.len() });
            }
            if eq.target.iter().any(|v| !v.is_finite()) {
                return Err(KsosError::InvalidParameter("non-finite equality target".into()));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.blocks.iter().map(ConstraintBlock::len).sum()
    }

    /// All sample points, duplicates included.
    pub fn sample_points(&self) -> Vec<Vec<f64>> {
        self.blocks.iter().flat_map(|b| b.points.iter().cloned()).collect()
    }

    /// `min_{i,m} c_i(x_m)' f(x_m) + d_i(x_m)`; `+inf` without samples.
    pub fn min_slack(&self, model: &RepresenterModel) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.values(model))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_equality_residual(&self, model: &RepresenterModel) -> f64 {
        self.equalities
            .iter()
            .flat_map(|eq| {
                let v = model.eval(&eq.point);
                v.iter().zip(&eq.target).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub objective: f64,
    pub primal_residual: f64,
    pub stationarity_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: RepresenterModel,
    /// One PSD block per constraint family in kSoS mode, empty otherwise.
    pub sos_blocks: Vec<SosModel>,
    pub report: SolveReport,
}

impl FitResult {
    /// `max_{i,m} |c_i' f(x_m) + d_i - Phi_m' B_i Phi_m|` evaluated through the returned models.
    pub fn sos_equality_residual(&self, constraints: &ConstraintSpec) -> f64 {
        let mut worst: f64 = 0.0;
        for (block, sos) in constraints.blocks.iter().zip(&self.sos_blocks) {
            for (x, value) in block.points.iter().zip(block.values(&self.model)) {
                worst = worst.max((value - sos.evaluate(x)).abs());
            }
        }
        worst
    }
}

/// Data loss `sum_n |y_n - f(x_n)|^2`.
pub fn data_loss(model: &RepresenterModel, data: &Dataset) -> f64 {
    data.inputs
        .iter()
        .zip(&data.targets)
        .map(|(x, y)| {
            let f = model.eval(x);
            f.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum()
}

/// Closed-form ridge solution `alpha = (G + lambda_K Id)^{-1} Y` on the data anchors.
pub fn fit_unconstrained(data: &Dataset, spec: KernelSpec, lambda_k: f64) -> Result<FitResult> {
    check_lambda_k(lambda_k)?;
    check_output(data, spec)?;
    let start = std::time::Instant::now();
    let n = data.len();
    let gram = spec.gram(&data.inputs);
    let y = data.target_matrix();
    let shifted = &gram + DMatrix::<f64>::identity(n, n) * lambda_k;
    let alpha = match shifted.clone().cholesky() {
        Some(chol) => chol.solve(&y),
        None => shifted
            .lu()
            .solve(&y)
            .ok_or_else(|| KsosError::InvalidParameter("ridge system is singular".into()))?,
    };
    let model = RepresenterModel::new(data.inputs.clone(), spec, alpha)?;
    let objective = data_loss(&model, data) + lambda_k * model.rkhs_norm_squared();
    let report = SolveReport {
        objective,
        primal_residual: 0.0,
        stationarity_residual: 0.0,
        iterations: 0,
        converged: true,
        wall_time: start.elapsed(),
    };
    Ok(FitResult { model, sos_blocks: Vec::new(), report })
}

/// Ridge regression under `c_i(x_m)' f(x_m) + d_i(x_m) >= 0` at every sample and the equality pairs.
pub fn fit_sampled(data: &Dataset, spec: KernelSpec, lambda_k: f64, constraints: &ConstraintSpec) -> Result<FitResult> {
    fit_sampled_with(data, spec, lambda_k, constraints, &AdmmSettings::default())
}

pub fn fit_sampled_with(
    data: &Dataset,
    spec: KernelSpec,
    lambda_k: f64,
    constraints: &ConstraintSpec,
    settings: &AdmmSettings,
) -> Result<FitResult> {
    check_lambda_k(lambda_k)?;
    let layout = RegressionLayout::new(data, spec, lambda_k, constraints)?;
    let mut problem = layout.problem(constraints);
    problem.blocks = (0..problem.n_rows()).map(ConeBlock::scalar).collect();
    let solution = admm::solve(&problem, settings);
    layout.finish(solution, Vec::new())
}

/// Ridge regression with `c_i(x_m)' f(x_m) + d_i(x_m) = <phi(x_m), A_i phi(x_m)>`,
/// `A_i` PSD, and `lambda_phi sum_i tr(A_i)` added to the objective.
pub fn fit_ksos(
    data: &Dataset,
    spec: KernelSpec,
    lambda_k: f64,
    lambda_phi: f64,
    phi_spec: KernelSpec,
    constraints: &ConstraintSpec,
) -> Result<FitResult> {
    fit_ksos_with(data, spec, lambda_k, lambda_phi, phi_spec, constraints, &AdmmSettings::default())
}

pub fn fit_ksos_with(
    data: &Dataset,
    spec: KernelSpec,
    lambda_k: f64,
    lambda_phi: f64,
    phi_spec: KernelSpec,
    constraints: &ConstraintSpec,
    settings: &AdmmSettings,
) -> Result<FitResult> {
    check_lambda_k(lambda_k)?;
    if !(lambda_phi.is_finite() && lambda_phi >= 0.0) {
        return Err(KsosError::InvalidParameter(format!("lambda_phi must be >= 0, got {lambda_phi}")));
    }
    let layout = RegressionLayout::new(data, spec, lambda_k, constraints)?;
    let mut problem = layout.problem(constraints);
    let (blocks, bases) = sos_blocks(constraints, phi_spec, lambda_phi)?;
    problem.blocks = blocks;
    let solution = admm::solve(&problem, settings);
    layout.finish(solution, bases)
}

/// One PSD block per constraint family over its deduplicated samples.
fn sos_blocks(constraints: &ConstraintSpec, phi_spec: KernelSpec, weight: f64) -> Result<(Vec<ConeBlock>, Vec<SosBasis>)> {
    let mut blocks = Vec::with_capacity(constraints.blocks.len());
    let mut bases = Vec::with_capacity(constraints.blocks.len());
    let mut row = 0;
    for block in &constraints.blocks {
        let unique = dedup_points(&block.points);
        let basis = SosBasis::new(phi_spec, unique)?;
        let mut rows = Vec::with_capacity(block.len());
        for x in &block.points {
            let col = basis
                .anchors()
                .iter()
                .position(|z| crate::kernels::distance(z, x) <= crate::kernels::DEDUP_TOL)
                .expect("sample belongs to its deduplicated set");
            rows.push((row, col));
            row += 1;
        }
        blocks.push(ConeBlock { features: basis.factor().factor().clone(), rows, trace_weight: weight });
        bases.push(basis);
    }
    Ok((blocks, bases))
}

/// Shared assembly for the constrained regression modes.
struct RegressionLayout {
    basis: FeatureBasis,
    spec: KernelSpec,
    hess: DMatrix<f64>,
    lin: DVector<f64>,
    constant: f64,
}

impl RegressionLayout {
    fn new(data: &Dataset, spec: KernelSpec, lambda_k: f64, constraints: &ConstraintSpec) -> Result<Self> {
        check_output(data, spec)?;
        constraints.validate(data.input_dim(), data.output_dim())?;
        let mut points = data.inputs.clone();
        points.extend(constraints.sample_points());
        points.extend(constraints.equalities.iter().map(|e| e.point.clone()));
        let basis = FeatureBasis::new(spec, dedup_points(&points));
        let (r, pdim) = (basis.rank(), spec.output_dim());
        let feats = DMatrix::from_fn(data.len(), r, |n, k| basis.feature(&data.inputs[n])[k]);
        let y = data.target_matrix();
        let gram_f = feats.transpose() * &feats + DMatrix::<f64>::identity(r, r) * lambda_k;
        let mut hess = DMatrix::zeros(pdim * r, pdim * r);
        let mut lin = DVector::zeros(pdim * r);
        for p in 0..pdim {
            hess.view_mut((p * r, p * r), (r, r)).copy_from(&(&gram_f * 2.0));
            lin.rows_mut(p * r, r).copy_from(&(feats.transpose() * y.column(p) * -2.0));
        }
        let constant = y.norm_squared();
        Ok(Self { basis, spec, hess, lin, constant })
    }

    fn problem(&self, constraints: &ConstraintSpec) -> SplitProblem {
        let (r, pdim) = (self.basis.rank(), self.spec.output_dim());
        let n_rows = constraints.n_rows();
        let mut coupling = DMatrix::zeros(n_rows, pdim * r);
        let mut offsets = DVector::zeros(n_rows);
        let mut row = 0;
        for block in &constraints.blocks {
            for ((x, c), d) in block.points.iter().zip(&block.rows).zip(&block.offsets) {
                let psi = self.basis.feature(x);
                for p in 0..pdim {
                    coupling.view_mut((row, p * r), (1, r)).copy_from(&(psi.transpose() * c[p]));
                }
                offsets[row] = *d;
                row += 1;
            }
        }
        let n_eq = constraints.equalities.len() * pdim;
        let mut eq_mat = DMatrix::zeros(n_eq, pdim * r);
        let mut eq_rhs = DVector::zeros(n_eq);
        for (e, pair) in constraints.equalities.iter().enumerate() {
            let psi = self.basis.feature(&pair.point);
            for p in 0..pdim {
                eq_mat.view_mut((e * pdim + p, p * r), (1, r)).copy_from(&psi.transpose());
                eq_rhs[e * pdim + p] = pair.target[p];
            }
        }
        SplitProblem {
            hess: self.hess.clone(),
            lin: self.lin.clone(),
            constant: self.constant,
            coupling,
            offsets,
            blocks: Vec::new(),
            eq_mat,
            eq_rhs,
        }
    }

    fn finish(&self, solution: SplitSolution, bases: Vec<SosBasis>) -> Result<FitResult> {
        let model = self.model_from(&solution.x)?;
        let sos_blocks = bases
            .into_iter()
            .zip(solution.blocks)
            .map(|(basis, b)| SosModel::from_matrix(basis, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(FitResult { model, sos_blocks, report: solution.report })
    }

    fn model_from(&self, x: &DVector<f64>) -> Result<RepresenterModel> {
        let (r, pdim) = (self.basis.rank(), self.spec.output_dim());
        let beta = DMatrix::from_fn(r, pdim, |k, p| x[p * r + k]);
        RepresenterModel::new(self.basis.anchors.clone(), self.spec, self.basis.coefficients(&beta))
    }
}

fn check_lambda_k(lambda_k: f64) -> Result<()> {
    if !(lambda_k.is_finite() && lambda_k > 0.0) {
        return Err(KsosError::InvalidParameter(format!("lambda_K must be > 0, got {lambda_k}")));
    }
    Ok(())
}

fn check_output(data: &Dataset, spec: KernelSpec) -> Result<()> {
    if data.output_dim() != spec.output_dim() {
        return Err(KsosError::DimensionMismatch { expected: spec.output_dim(), found: data.output_dim() });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimum-norm `g` with `c_i(x_m)' g(x_m) >= level` at every sample.
#[derive(Debug, Clone)]
pub struct MarginFunction {
    pub model: RepresenterModel,
    pub norm: f64,
    pub report: SolveReport,
}

pub fn solve_margin_function(constraints: &ConstraintSpec, spec: KernelSpec) -> Result<MarginFunction> {
    solve_margin_function_at_level(constraints, spec, 1.0)
}

pub fn solve_margin_function_at_level(constraints: &ConstraintSpec, spec: KernelSpec, level: f64) -> Result<MarginFunction> {
    let points = constraints.sample_points();
    if points.is_empty() {
        return Err(KsosError::EmptyInput("margin-function samples"));
    }
    constraints.validate(points[0].len(), spec.output_dim())?;
    for block in &constraints.blocks {
        if let Some(m) = block.rows.iter().position(|c| c.iter().all(|v| *v == 0.0)) {
            return Err(KsosError::InfeasibleConstraints(format!("constraint row at {:?} is zero", block.points[m])));
        }
    }
    let basis = FeatureBasis::new(spec, dedup_points(&points));
    let (r, pdim) = (basis.rank(), spec.output_dim());
    let n_rows = constraints.n_rows();
    let mut coupling = DMatrix::zeros(n_rows, pdim * r);
    let mut row = 0;
    for block in &constraints.blocks {
        for (x, c) in block.points.iter().zip(&block.rows) {
            let psi = basis.feature(x);
            for p in 0..pdim {
                coupling.view_mut((row, p * r), (1, r)).copy_from(&(psi.transpose() * c[p]));
            }
            row += 1;
        }
    }
    let problem = SplitProblem {
        hess: DMatrix::identity(pdim * r, pdim * r) * 2.0,
        lin: DVector::zeros(pdim * r),
        constant: 0.0,
        coupling,
        offsets: DVector::from_element(n_rows, -level),
        blocks: (0..n_rows).map(ConeBlock::scalar).collect(),
        eq_mat: DMatrix::zeros(0, pdim * r),
        eq_rhs: DVector::zeros(0),
    };
    let solution = admm::solve(&problem, &AdmmSettings::default());
    if !solution.report.converged {
        return Err(KsosError::InfeasibleConstraints(format!(
            "margin problem did not converge (primal residual {:.3e})",
            solution.report.primal_residual
        )));
    }
    let beta = DMatrix::from_fn(r, pdim, |k, p| solution.x[p * r + k]);
    let model = RepresenterModel::new(basis.anchors.clone(), spec, basis.coefficients(&beta))?;
    Ok(MarginFunction { model, norm: beta.norm(), report: solution.report })
}

/// Generalized cross-validation score `N |(Id - H) Y|_F^2 / tr(Id - H)^2`
/// with `H = G (G + lambda Id)^{-1}`, for every grid value.
pub fn gcv_scores(gram: &DMatrix<f64>, targets: &DMatrix<f64>, grid: &[f64]) -> Result<Vec<f64>> {
    let n = gram.nrows();
    if targets.nrows() != n {
        return Err(KsosError::DimensionMismatch { expected: n, found: targets.nrows() });
    }
    let eig = SymmetricEigen::new(gram.clone());
    let rotated = eig.eigenvectors.transpose() * targets;
    let energy: Vec<f64> = (0..n).map(|k| rotated.row(k).norm_squared()).collect();
    Ok(grid
        .iter()
        .map(|&lambda| {
            let (mut num, mut den) = (0.0, 0.0);
            for k in 0..n {
                let shrink = lambda / (eig.eigenvalues[k].max(0.0) + lambda);
                num += shrink * shrink * energy[k];
                den += shrink;
            }
            n as f64 * num / (den * den)
        })
        .collect())
}

/// Grid minimizer of [`gcv_scores`]; ties go to the largest `lambda`.
pub fn gcv_select(gram: &DMatrix<f64>, targets: &DMatrix<f64>, grid: &[f64]) -> Result<f64> {
    Ok(gcv_best(gram, targets, grid)?.0)
}

fn gcv_best(gram: &DMatrix<f64>, targets: &DMatrix<f64>, grid: &[f64]) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(KsosError::EmptyInput("lambda grid"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] <= 0.0 {
        return Err(KsosError::InvalidParameter("lambda grid must be positive and strictly increasing".into()));
    }
    let scores = gcv_scores(gram, targets, grid)?;
    let mut best = (grid[0], scores[0]);
    for (&lambda, &score) in grid.iter().zip(&scores).skip(1) {
        if score <= best.1 {
            best = (lambda, score);
        }
    }
    Ok(best)
}

/// Log-spaced grid of `count` values between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count).map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid {
    pub sigma_k: Vec<f64>,
    pub lambda_k: Vec<f64>,
    pub lambda_phi: Vec<f64>,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            sigma_k: (1..=20).map(|i| 0.1 * i as f64).collect(),
            lambda_k: log_grid(1e-8, 1e1, 37),
            lambda_phi: log_grid(1e-6, 1e-1, 6),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub sigma_k: f64,
    pub lambda_k: f64,
    pub sigma_phi: f64,
    pub lambda_phi: f64,
}

/// `sigma_K` minimizes the GCV score (with `lambda_K` from [`gcv_select`] at each
/// bandwidth), `sigma_phi = sigma_K / 2`, and `lambda_phi` minimizes the mean
/// leave-one-out squared error of the kSoS fit plus `violation` of the full fit.
pub fn hyperparameter_search(
    data: &Dataset,
    constraints: &ConstraintSpec,
    grid: &SearchGrid,
    violation: &(dyn Fn(&RepresenterModel) -> f64 + Sync),
) -> Result<Hyperparameters> {
    if grid.sigma_k.is_empty() || grid.lambda_phi.is_empty() {
        return Err(KsosError::EmptyInput("hyperparameter grid"));
    }
    let y = data.target_matrix();
    let mut best: Option<(f64, f64, f64)> = None;
    for &sigma in &grid.sigma_k {
        let spec = KernelSpec::new(sigma, data.output_dim())?;
        let (lambda, score) = gcv_best(&spec.gram(&data.inputs), &y, &grid.lambda_k)?;
        if best.is_none_or(|b| score < b.2) {
            best = Some((sigma, lambda, score));
        }
    }
    let (sigma_k, lambda_k, _) = best.expect("nonempty grid");
    let sigma_phi = sigma_k / 2.0;
    let spec = KernelSpec::new(sigma_k, data.output_dim())?;
    let phi_spec = KernelSpec::scalar(sigma_phi)?;

    let lambda_phi = if grid.lambda_phi.len() == 1 || constraints.blocks.is_empty() {
        grid.lambda_phi[0]
    } else {
        use rayon::prelude::*;
        let scores = grid
            .lambda_phi
            .par_iter()
            .map(|&lp| -> Result<f64> {
                let full = fit_ksos(data, spec, lambda_k, lp, phi_spec, constraints)?;
                let mut loo = 0.0;
                if data.len() > 1 {
                    for n in 0..data.len() {
                        let fit = fit_ksos(&data.without(n), spec, lambda_k, lp, phi_spec, constraints)?;
                        let f = fit.model.eval(&data.inputs[n]);
                        loo += f.iter().zip(&data.targets[n]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                    }
                    loo /= data.len() as f64;
                }
                Ok(loo + violation(&full.model))
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut pick = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s < scores[pick] {
                pick = i;
            }
        }
        grid.lambda_phi[pick]
    };
    Ok(Hyperparameters { sigma_k, lambda_k, sigma_phi, lambda_phi })
}
