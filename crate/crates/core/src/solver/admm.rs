//! Operator splitting for
//!
//! ```text
//!   min  1/2 x'Hx + q'x + sum_i w_i tr(B_i)
//!   s.t. a_r'x + d_r = Phi_r' B_{i(r)} Phi_r      for every coupling row r
//!        E x = t
//!        B_i PSD
//! ```
//!
//! Each block `B_i` is duplicated into a PSD copy `Z_i`. The first step solves the
//! equality-constrained quadratic problem in `(x, B)` in closed form through a
//! reduced KKT system (the `B` part eliminates to the Hadamard square of the
//! block Gram matrix), the second step projects onto the PSD cone, the third
//! updates the scaled duals. Sign constraints are the 1x1 case of a block.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, LU};

use crate::sos::psd_project;

use super::SolveReport;

#[derive(Debug, Clone, Copy)]
pub struct AdmmSettings {
    /// Absolute tolerance on coupling and equality residuals.
    pub tol_feas: f64,
    /// Relative tolerance on the dual residual.
    pub tol_stat: f64,
    pub max_iter: usize,
    /// Over-relaxation factor.
    pub relaxation: f64,
    pub rho: f64,
    /// Proximal weight on `x`; keeps the KKT system nonsingular when `H` is.
    pub sigma: f64,
    pub adapt_every: usize,
    /// Attempt active-set polishing (only used when every block is 1x1 with zero weight).
    pub polish: bool,
    pub polish_every: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            tol_feas: 1e-6,
            tol_stat: 1e-5,
            max_iter: 20_000,
            relaxation: 1.6,
            rho: 1.0,
            sigma: 1e-6,
            adapt_every: 25,
            polish: true,
            polish_every: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ConeBlock {
    /// Columns are the feature vectors `Phi` available to this block.
    pub features: DMatrix<f64>,
    /// `(coupling row, feature column)` pairs.
    pub rows: Vec<(usize, usize)>,
    pub trace_weight: f64,
}

impl ConeBlock {
    /// The nonnegative-slack block of a single inequality row.
    pub fn scalar(row: usize) -> Self {
        Self { features: DMatrix::from_element(1, 1, 1.0), rows: vec![(row, 0)], trace_weight: 0.0 }
    }

    fn dim(&self) -> usize {
        self.features.nrows()
    }

    fn is_scalar_slack(&self) -> bool {
        self.dim() == 1 && self.trace_weight == 0.0
    }

    fn quad(&self, m: &DMatrix<f64>, col: usize) -> f64 {
        let phi = self.features.column(col);
        phi.dot(&(m * phi))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SplitProblem {
    pub hess: DMatrix<f64>,
    pub lin: DVector<f64>,
    pub constant: f64,
    pub coupling: DMatrix<f64>,
    pub offsets: DVector<f64>,
    pub blocks: Vec<ConeBlock>,
    pub eq_mat: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct SplitSolution {
    pub x: DVector<f64>,
    /// PSD block matrices.
    pub blocks: Vec<DMatrix<f64>>,
    /// Coupling multipliers (Lagrangian term `mu'(A x + d - quad(B))`).
    #[cfg_attr(not(test), allow(dead_code))]
    pub mu: DVector<f64>,
    pub report: SolveReport,
    #[cfg_attr(not(test), allow(dead_code))]
    pub polished: bool,
}

impl SplitProblem {
    pub fn n_vars(&self) -> usize {
        self.hess.nrows()
    }

    pub fn n_rows(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn objective(&self, x: &DVector<f64>, blocks: &[DMatrix<f64>]) -> f64 {
        let quad = 0.5 * x.dot(&(&self.hess * x)) + self.lin.dot(x) + self.constant;
        quad + self
            .blocks
            .iter()
            .zip(blocks)
            .map(|(b, z)| b.trace_weight * z.trace())
            .sum::<f64>()
    }

    /// `max_r |a_r'x + d_r - Phi_r' Z Phi_r|`.
    pub fn coupling_residual(&self, x: &DVector<f64>, blocks: &[DMatrix<f64>]) -> f64 {
        let ax = &self.coupling * x + &self.offsets;
        let mut worst: f64 = 0.0;
        for (block, z) in self.blocks.iter().zip(blocks) {
            for &(r, col) in &block.rows {
                worst = worst.max((ax[r] - block.quad(z, col)).abs());
            }
        }
        worst
    }

    pub fn equality_residual(&self, x: &DVector<f64>) -> f64 {
        if self.eq_mat.nrows() == 0 {
            return 0.0;
        }
        (&self.eq_mat * x - &self.eq_rhs).amax()
    }

    fn all_scalar_slacks(&self) -> bool {
        !self.blocks.is_empty() && self.blocks.iter().all(ConeBlock::is_scalar_slack)
    }

    /// Row equilibration weights for the coupling rows of the KKT system.
    fn row_weights(&self) -> DVector<f64> {
        let mut w = DVector::from_element(self.n_rows(), 1.0);
        for block in &self.blocks {
            for &(r, col) in &block.rows {
                let phi_sq = block.features.column(col).norm_squared();
                let a_sq = self.coupling.row(r).norm_squared();
                w[r] = 1.0 / (a_sq + phi_sq * phi_sq).sqrt().max(1e-12);
            }
        }
        w
    }
}

/// Reduced KKT system for the `(x, B)` step at a fixed penalty.
struct StepSystem {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    weights: DVector<f64>,
}

impl StepSystem {
    fn new(p: &SplitProblem, rho: f64, sigma: f64, weights: &DVector<f64>) -> Self {
        let (n, r, e) = (p.n_vars(), p.n_rows(), p.eq_mat.nrows());
        let mut k = DMatrix::<f64>::zeros(n + r + e, n + r + e);
        let mut hs = p.hess.clone();
        for i in 0..n {
            hs[(i, i)] += sigma;
        }
        k.view_mut((0, 0), (n, n)).copy_from(&hs);
        let scaled = DMatrix::from_fn(r, n, |i, j| weights[i] * p.coupling[(i, j)]);
        k.view_mut((n, 0), (r, n)).copy_from(&scaled);
        k.view_mut((0, n), (n, r)).copy_from(&scaled.transpose());
        if e > 0 {
            k.view_mut((n + r, 0), (e, n)).copy_from(&p.eq_mat);
            k.view_mut((0, n + r), (n, e)).copy_from(&p.eq_mat.transpose());
        }
        for block in &p.blocks {
            let gram = block.features.transpose() * &block.features;
            for &(r1, c1) in &block.rows {
                for &(r2, c2) in &block.rows {
                    let g = gram[(c1, c2)];
                    k[(n + r1, n + r2)] -= weights[r1] * weights[r2] * g * g / rho;
                }
            }
        }
        Self { lu: k.lu(), weights: weights.clone() }
    }

    /// Returns `(x, mu, nu)` with `mu` in unscaled units.
    fn solve(&self, p: &SplitProblem, rhs: DVector<f64>) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let (n, r, e) = (p.n_vars(), p.n_rows(), p.eq_mat.nrows());
        let sol = self.lu.solve(&rhs)?;
        let x = sol.rows(0, n).into_owned();
        let mu = sol.rows(n, r).component_mul(&self.weights);
        let nu = sol.rows(n + r, e).into_owned();
        Some((x, mu, nu))
    }
}

/// One splitting iterate.
#[derive(Clone)]
struct Iterate {
    x: DVector<f64>,
    z: Vec<DMatrix<f64>>,
    u: Vec<DMatrix<f64>>,
}

impl Iterate {
    fn to_vec(&self) -> DVector<f64> {
        let len = self.x.len() + self.z.iter().map(|m| 2 * m.len()).sum::<usize>();
        let mut out = Vec::with_capacity(len);
        out.extend(self.x.iter());
        for (zi, ui) in self.z.iter().zip(&self.u) {
            out.extend(zi.iter());
            out.extend(ui.iter());
        }
        DVector::from_vec(out)
    }

    fn from_vec(v: &DVector<f64>, like: &Iterate) -> Self {
        let n = like.x.len();
        let x = v.rows(0, n).into_owned();
        let mut offset = n;
        let mut z = Vec::with_capacity(like.z.len());
        let mut u = Vec::with_capacity(like.u.len());
        for zi in &like.z {
            let (d, len) = (zi.nrows(), zi.len());
            z.push(DMatrix::from_column_slice(d, d, v.rows(offset, len).as_slice()));
            u.push(DMatrix::from_column_slice(d, d, v.rows(offset + len, len).as_slice()));
            offset += 2 * len;
        }
        Self { x, z, u }
    }
}

/// Residual information of one application of the splitting map.
struct StepStats {
    mu: DVector<f64>,
    dual: f64,
    primal: f64,
    scale: f64,
    u_norm: f64,
}

/// The splitting map `(x, Z, U) -> (x+, Z+, U+)`.
fn step(p: &SplitProblem, s: &Iterate, system: &StepSystem, rho: f64, settings: &AdmmSettings) -> Option<(Iterate, StepStats)> {
    let (n, r) = (p.n_vars(), p.n_rows());
    let weights = &system.weights;
    let v: Vec<DMatrix<f64>> = s.z.iter().zip(&s.u).map(|(zi, ui)| zi - ui).collect();

    let mut rhs = DVector::<f64>::zeros(n + r + p.eq_mat.nrows());
    rhs.rows_mut(0, n).copy_from(&(-&p.lin + &s.x * settings.sigma));
    for (block, vi) in p.blocks.iter().zip(&v) {
        for &(row, col) in &block.rows {
            let phi_sq = block.features.column(col).norm_squared();
            let target = block.quad(vi, col) - block.trace_weight / rho * phi_sq - p.offsets[row];
            rhs[n + row] = weights[row] * target;
        }
    }
    rhs.rows_mut(n + r, p.eq_mat.nrows()).copy_from(&p.eq_rhs);
    let (x, mu, _) = system.solve(p, rhs)?;

    let mut dual_sq = settings.sigma.powi(2) * (&x - &s.x).norm_squared();
    let (mut primal_sq, mut scale_sq, mut u_sq) = (0.0, 0.0, 0.0);
    let mut z = Vec::with_capacity(p.blocks.len());
    let mut u = Vec::with_capacity(p.blocks.len());
    for (i, block) in p.blocks.iter().enumerate() {
        let dim = block.dim();
        let mut b = &v[i] - DMatrix::<f64>::identity(dim, dim) * (block.trace_weight / rho);
        for &(row, col) in &block.rows {
            let phi = block.features.column(col);
            b.ger(mu[row] / rho, &phi, &phi, 1.0);
        }
        let relaxed = &b * settings.relaxation + &s.z[i] * (1.0 - settings.relaxation);
        let z_new = psd_project(&(&relaxed + &s.u[i]));
        let u_new = &s.u[i] + &relaxed - &z_new;
        dual_sq += (rho * (&z_new - &s.z[i]).norm()).powi(2);
        primal_sq += (&b - &z_new).norm_squared();
        scale_sq += b.norm_squared().max(z_new.norm_squared());
        u_sq += (rho * u_new.norm()).powi(2);
        z.push(z_new);
        u.push(u_new);
    }
    let stats = StepStats { mu, dual: dual_sq.sqrt(), primal: primal_sq.sqrt(), scale: scale_sq.sqrt(), u_norm: u_sq.sqrt() };
    Some((Iterate { x, z, u }, stats))
}

/// Type-II Anderson acceleration over a short history of fixed-point residuals.
struct Anderson {
    memory: usize,
    ds: Vec<DVector<f64>>,
    dg: Vec<DVector<f64>>,
    last: Option<(DVector<f64>, DVector<f64>)>,
}

impl Anderson {
    fn new(memory: usize) -> Self {
        Self { memory, ds: Vec::new(), dg: Vec::new(), last: None }
    }

    fn reset(&mut self) {
        self.ds.clear();
        self.dg.clear();
        self.last = None;
    }

    /// Extrapolated point from iterate `s` and its residual `g = T(s) - s`.
    fn extrapolate(&mut self, s: &DVector<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
        if self.memory == 0 {
            return None;
        }
        if let Some((s_prev, g_prev)) = self.last.take() {
            if self.ds.len() == self.memory {
                self.ds.remove(0);
                self.dg.remove(0);
            }
            self.ds.push(s - s_prev);
            self.dg.push(g - g_prev);
        }
        self.last = Some((s.clone(), g.clone()));
        let k = self.dg.len();
        if k == 0 {
            return None;
        }
        let dg = DMatrix::from_columns(&self.dg);
        let mut normal = dg.transpose() * &dg;
        let reg = 1e-10 * normal.diagonal().amax().max(f64::MIN_POSITIVE);
        for i in 0..k {
            normal[(i, i)] += reg;
        }
        let gamma = normal.cholesky()?.solve(&(dg.transpose() * g));
        let mut out = s + g;
        for i in 0..k {
            out -= (&self.ds[i] + &self.dg[i]) * gamma[i];
        }
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

/// History length of the acceleration.
const ANDERSON_MEMORY: usize = 10;
/// An extrapolated point is kept only if its residual does not grow past this factor.
const ANDERSON_SAFEGUARD: f64 = 1.0;

pub(crate) fn solve(p: &SplitProblem, settings: &AdmmSettings) -> SplitSolution {
    let start = Instant::now();
    let (n, r) = (p.n_vars(), p.n_rows());
    let weights = p.row_weights();
    let mut rho = settings.rho;
    let mut system = StepSystem::new(p, rho, settings.sigma, &weights);

    let zeros: Vec<DMatrix<f64>> = p.blocks.iter().map(|b| DMatrix::zeros(b.dim(), b.dim())).collect();
    let mut state = Iterate { x: DVector::zeros(n), z: zeros.clone(), u: zeros };
    let mut last_x = state.x.clone();
    let mut last_z = state.z.clone();
    let mut last_u = state.u.clone();
    let mut mu = DVector::<f64>::zeros(r);
    let try_polish = settings.polish && p.all_scalar_slacks();
    let mut anderson = Anderson::new(if try_polish { 0 } else { ANDERSON_MEMORY });
    // residual norm at the last accepted base point and the plain step from it
    let mut fallback: Option<(f64, Iterate)> = None;
    let mut extrapolated = false;

    let mut best: Option<(f64, DVector<f64>, Vec<DMatrix<f64>>, DVector<f64>, f64, f64)> = None;
    let mut iterations = 0;

    for iter in 1..=settings.max_iter {
        iterations = iter;
        let Some((next, stats)) = step(p, &state, &system, rho, settings) else {
            break;
        };
        let s_vec = state.to_vec();
        let g_vec = next.to_vec() - &s_vec;
        let g_norm = g_vec.norm();

        if extrapolated {
            if let Some((base_norm, plain)) = fallback.take() {
                if !(g_norm <= ANDERSON_SAFEGUARD * base_norm) {
                    // reject the extrapolation and continue from the plain step
                    anderson.reset();
                    state = plain;
                    extrapolated = false;
                    continue;
                }
            }
        }

        let feas = p.coupling_residual(&next.x, &next.z);
        let eq = p.equality_residual(&next.x);
        let dual_scale = stats.u_norm.max(1.0);
        let merit = (feas / settings.tol_feas)
            .max(eq / settings.tol_feas)
            .max(stats.dual / (settings.tol_stat * dual_scale));
        mu = stats.mu.clone();
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, next.x.clone(), next.z.clone(), mu.clone(), feas.max(eq), stats.dual / dual_scale));
        }
        last_x = next.x.clone();
        last_z = next.z.clone();
        last_u = next.u.clone();
        if merit <= 1.0 {
            let polished = if try_polish { polish(p, &next.x, &next.z, &next.u, rho) } else { None };
            let plain = (next.x, next.z, mu, feas.max(eq), stats.dual / dual_scale, false);
            return finish(p, polished.unwrap_or(plain), iter, true, start);
        }
        if try_polish && iter % settings.polish_every == 0 {
            if let Some(sol) = polish(p, &next.x, &next.z, &next.u, rho) {
                return finish(p, sol, iter, true, start);
            }
        }

        if iter % settings.adapt_every == 0 {
            let primal_rel = stats.primal / stats.scale.max(1e-12);
            let dual_rel = stats.dual / stats.u_norm.max(1e-12);
            if primal_rel > 0.0 && dual_rel > 0.0 {
                let ratio = (primal_rel / dual_rel).sqrt();
                if !(0.2..=5.0).contains(&ratio) {
                    let new_rho = (rho * ratio).clamp(1e-6, 1e6);
                    if new_rho != rho {
                        let mut rescaled = next.clone();
                        for ui in rescaled.u.iter_mut() {
                            *ui *= rho / new_rho;
                        }
                        rho = new_rho;
                        system = StepSystem::new(p, rho, settings.sigma, &weights);
                        anderson.reset();
                        fallback = None;
                        extrapolated = false;
                        state = rescaled;
                        continue;
                    }
                }
            }
        }

        match anderson.extrapolate(&s_vec, &g_vec) {
            Some(v) => {
                fallback = Some((g_norm, next.clone()));
                state = Iterate::from_vec(&v, &next);
                extrapolated = true;
            }
            None => {
                state = next;
                extrapolated = false;
            }
        }
    }

    if try_polish {
        if let Some(sol) = polish(p, &last_x, &last_z, &last_u, rho) {
            return finish(p, sol, iterations, true, start);
        }
    }
    let (_, bx, bz, bmu, feas, stat) = best.unwrap_or((f64::INFINITY, last_x, last_z, mu, f64::INFINITY, f64::INFINITY));
    finish(p, (bx, bz, bmu, feas, stat, false), iterations, false, start)
}

type Candidate = (DVector<f64>, Vec<DMatrix<f64>>, DVector<f64>, f64, f64, bool);

fn finish(p: &SplitProblem, sol: Candidate, iterations: usize, converged: bool, start: Instant) -> SplitSolution {
    let (x, blocks, mu, primal, stat, polished) = sol;
    let report = SolveReport {
        objective: p.objective(&x, &blocks),
        primal_residual: primal,
        stationarity_residual: stat,
        iterations,
        converged,
        wall_time: start.elapsed(),
    };
    SplitSolution { x, blocks, mu, report, polished }
}

/// Guess the active set from the splitting iterate and solve the resulting
/// equality-constrained quadratic program exactly. Accepted only if the
/// candidate is primal feasible and its multipliers have the right sign.
fn polish(p: &SplitProblem, x: &DVector<f64>, z: &[DMatrix<f64>], u: &[DMatrix<f64>], rho: f64) -> Option<Candidate> {
    let n = p.n_vars();
    let mut active = Vec::new();
    for (i, block) in p.blocks.iter().enumerate() {
        let (row, _) = block.rows[0];
        if z[i][(0, 0)] < -rho * u[i][(0, 0)] {
            active.push(row);
        }
    }
    let (a, e) = (active.len(), p.eq_mat.nrows());
    let size = n + a + e;
    let mut k = DMatrix::<f64>::zeros(size, size);
    k.view_mut((0, 0), (n, n)).copy_from(&p.hess);
    for (slot, &row) in active.iter().enumerate() {
        for j in 0..n {
            k[(n + slot, j)] = p.coupling[(row, j)];
            k[(j, n + slot)] = p.coupling[(row, j)];
        }
    }
    for i in 0..e {
        for j in 0..n {
            k[(n + a + i, j)] = p.eq_mat[(i, j)];
            k[(j, n + a + i)] = p.eq_mat[(i, j)];
        }
    }
    let mut rhs = DVector::<f64>::zeros(size);
    rhs.rows_mut(0, n).copy_from(&-&p.lin);
    for (slot, &row) in active.iter().enumerate() {
        rhs[n + slot] = -p.offsets[row];
    }
    rhs.rows_mut(n + a, e).copy_from(&p.eq_rhs);

    // small regularization with iterative refinement against the exact system
    let delta = 1e-11;
    let mut reg = k.clone();
    for i in 0..n {
        reg[(i, i)] += delta;
    }
    for i in n..size {
        reg[(i, i)] -= delta;
    }
    let lu = reg.lu();
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..5 {
        let residual = &rhs - &k * &sol;
        sol += lu.solve(&residual)?;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let x_pol = sol.rows(0, n).into_owned();
    let scale = 1.0 + x.amax().max(p.lin.amax());
    let tol = 1e-9 * scale;
    let slack = &p.coupling * &x_pol + &p.offsets;
    if slack.iter().any(|&s| s < -tol) {
        return None;
    }
    let mut mu = DVector::<f64>::zeros(p.n_rows());
    for (slot, &row) in active.iter().enumerate() {
        let m = sol[n + slot];
        if m > tol {
            return None;
        }
        mu[row] = m;
    }
    let blocks: Vec<DMatrix<f64>> = p
        .blocks
        .iter()
        .map(|b| {
            let (row, _) = b.rows[0];
            let value = if active.contains(&row) { 0.0 } else { slack[row].max(0.0) };
            DMatrix::from_element(1, 1, value)
        })
        .collect();
    let primal = p.coupling_residual(&x_pol, &blocks).max(p.equality_residual(&x_pol));
    let mut grad = &p.hess * &x_pol + &p.lin + p.coupling.transpose() * &mu;
    if e > 0 {
        grad += p.eq_mat.transpose() * sol.rows(n + a, e);
    }
    let stat = grad.amax() / (1.0 + p.lin.amax().max((&p.hess * &x_pol).amax()));
    if primal > 1e-9 * (1.0 + p.offsets.amax()) || stat > 1e-8 {
        return None;
    }
    Some((x_pol, blocks, mu, primal, stat, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_problem(h: f64, q: f64, a: f64, d: f64) -> SplitProblem {
        SplitProblem {
            hess: DMatrix::from_element(1, 1, h),
            lin: DVector::from_element(1, q),
            constant: 0.0,
            coupling: DMatrix::from_element(1, 1, a),
            offsets: DVector::from_element(1, d),
            blocks: vec![ConeBlock::scalar(0)],
            eq_mat: DMatrix::zeros(0, 1),
            eq_rhs: DVector::zeros(0),
        }
    }

    #[test]
    fn inactive_bound_returns_unconstrained_minimum() {
        // min 1/2 x^2 - x  s.t. x + 5 >= 0  -> x = 1
        let sol = solve(&scalar_problem(1.0, -1.0, 1.0, 5.0), &AdmmSettings::default());
        assert!(sol.report.converged);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn active_bound_is_enforced() {
        // min 1/2 x^2 - x  s.t. 0.25 - x >= 0  -> x = 0.25, multiplier 0.75
        let sol = solve(&scalar_problem(1.0, -1.0, -1.0, 0.25), &AdmmSettings::default());
        assert!(sol.report.converged);
        assert_abs_diff_eq!(sol.x[0], 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.mu[0], -0.75, epsilon = 1e-8);
    }

    #[test]
    fn unpolished_splitting_reaches_tolerance() {
        let settings = AdmmSettings { polish: false, ..AdmmSettings::default() };
        let sol = solve(&scalar_problem(1.0, -1.0, -1.0, 0.25), &settings);
        assert!(sol.report.converged);
        assert_abs_diff_eq!(sol.x[0], 0.25, epsilon = 1e-5);
        assert!(!sol.polished);
    }

    #[test]
    fn psd_block_with_trace_penalty() {
        // max c - w tr(B)  s.t. g_m - c = Phi_m' B Phi_m with identity features:
        // the optimum is c = min g, B = diag(g - c).
        let g = [0.5, 0.2, 0.9];
        let p = SplitProblem {
            hess: DMatrix::zeros(1, 1),
            lin: DVector::from_element(1, -1.0),
            constant: 0.0,
            coupling: DMatrix::from_element(3, 1, -1.0),
            offsets: DVector::from_row_slice(&g),
            blocks: vec![ConeBlock { features: DMatrix::identity(3, 3), rows: vec![(0, 0), (1, 1), (2, 2)], trace_weight: 0.01 }],
            eq_mat: DMatrix::zeros(0, 1),
            eq_rhs: DVector::zeros(0),
        };
        let sol = solve(&p, &AdmmSettings::default());
        assert!(sol.report.converged, "{:?}", sol.report);
        assert_abs_diff_eq!(sol.x[0], 0.2, epsilon = 1e-4);
        assert!(p.coupling_residual(&sol.x, &sol.blocks) <= 1e-6 * 2.0);
    }
}
