//! Two small kSoS programs: a certified lower bound on a sampled minimum and a
//! regularized Kantorovich dual for transport cost estimation.

use nalgebra::{DMatrix, DVector};

use crate::error::{KsosError, Result};
use crate::kernels::{dedup_points, distance, KernelSpec, DEDUP_TOL};
use crate::solver::admm::{self, AdmmSettings, ConeBlock, SplitProblem};
use crate::solver::features::FeatureBasis;
use crate::solver::{RepresenterModel, SolveReport};
use crate::sos::{SosBasis, SosModel};

/// The lower bound is read off the constraint residuals, so feasibility is tightened.
fn lower_bound_settings() -> AdmmSettings {
    AdmmSettings { tol_feas: 1e-9, ..AdmmSettings::default() }
}

/// Map each point to the index of its copy in `unique`.
fn index_into(unique: &[Vec<f64>], x: &[f64]) -> usize {
    unique
        .iter()
        .position(|z| distance(z, x) <= DEDUP_TOL)
        .expect("point belongs to its deduplicated set")
}

#[derive(Debug, Clone)]
pub struct GlobalOptResult {
    pub c_hat: f64,
    pub sos: SosModel,
    pub report: SolveReport,
}

/// Maximize `c - lambda_tr tr(A)` subject to `g(x_m) - c = <phi(x_m), A phi(x_m)>`.
///
/// The returned `c_hat` is `min_m (g(x_m) - Phi_m' B Phi_m)` for the PSD iterate
/// `B`, so it never exceeds the sampled minimum.
pub fn global_opt_lower_bound(
    g: &dyn Fn(&[f64]) -> f64,
    samples: &[Vec<f64>],
    phi_spec: KernelSpec,
    lambda_tr: f64,
) -> Result<GlobalOptResult> {
    if samples.is_empty() {
        return Err(KsosError::EmptyInput("samples"));
    }
    if !(lambda_tr.is_finite() && lambda_tr >= 0.0) {
        return Err(KsosError::InvalidParameter(format!("lambda_tr must be >= 0, got {lambda_tr}")));
    }
    let unique = dedup_points(samples);
    let basis = SosBasis::new(phi_spec, unique.clone())?;
    let values: Vec<f64> = unique.iter().map(|x| g(x)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(KsosError::InvalidParameter("objective is not finite at a sample".into()));
    }
    let m = unique.len();
    let problem = SplitProblem {
        hess: DMatrix::zeros(1, 1),
        lin: DVector::from_element(1, -1.0),
        constant: 0.0,
        coupling: DMatrix::from_element(m, 1, -1.0),
        offsets: DVector::from_vec(values.clone()),
        blocks: vec![ConeBlock {
            features: basis.factor().factor().clone(),
            rows: (0..m).map(|i| (i, i)).collect(),
            trace_weight: lambda_tr,
        }],
        eq_mat: DMatrix::zeros(0, 1),
        eq_rhs: DVector::zeros(0),
    };
    let mut solution = admm::solve(&problem, &lower_bound_settings());
    let sos = SosModel::from_matrix(basis, solution.blocks.swap_remove(0))?;
    let c_hat = values
        .iter()
        .enumerate()
        .map(|(i, v)| v - sos.anchor_value(i))
        .fold(f64::INFINITY, f64::min);
    Ok(GlobalOptResult { c_hat, sos, report: solution.report })
}

#[derive(Debug, Clone)]
pub struct OtResult {
    /// `mean_i u(x_i) + mean_i v(y_i)`.
    pub w_hat: f64,
    pub u: RepresenterModel,
    pub v: RepresenterModel,
    pub sos: SosModel,
    pub report: SolveReport,
}

/// Kantorovich dual between two empirical measures:
/// maximize `mean u(x_i) + mean v(y_i) - lambda_K (|u|^2 + |v|^2) - lambda_tr tr(A)`
/// subject to `c(x_m, y_m) - u(x_m) - v(y_m) = <phi(x_m, y_m), A phi(x_m, y_m)>`
/// at the given pairs, with `phi` a Gaussian feature map on the product space.
#[allow(clippy::too_many_arguments)]
pub fn ot_dual_estimate(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    cost: &dyn Fn(&[f64], &[f64]) -> f64,
    pairs: &[(Vec<f64>, Vec<f64>)],
    k_spec: KernelSpec,
    phi_spec: KernelSpec,
    lambda_k: f64,
    lambda_tr: f64,
) -> Result<OtResult> {
    if xs.is_empty() || ys.is_empty() {
        return Err(KsosError::EmptyInput("measure samples"));
    }
    if pairs.is_empty() {
        return Err(KsosError::EmptyInput("constraint pairs"));
    }
    if !(lambda_k.is_finite() && lambda_k > 0.0) {
        return Err(KsosError::InvalidParameter(format!("lambda_K must be > 0, got {lambda_k}")));
    }
    if !(lambda_tr.is_finite() && lambda_tr >= 0.0) {
        return Err(KsosError::InvalidParameter(format!("lambda_tr must be >= 0, got {lambda_tr}")));
    }
    let d = xs[0].len();
    for p in xs.iter().chain(ys).chain(pairs.iter().flat_map(|(a, b)| [a, b])) {
        if p.len() != d {
            return Err(KsosError::DimensionMismatch { expected: d, found: p.len() });
        }
    }
    let k_spec = k_spec.to_scalar();
    let mut u_pts = xs.to_vec();
    u_pts.extend(pairs.iter().map(|(a, _)| a.clone()));
    let mut v_pts = ys.to_vec();
    v_pts.extend(pairs.iter().map(|(_, b)| b.clone()));
    let ub = FeatureBasis::new(k_spec, dedup_points(&u_pts));
    let vb = FeatureBasis::new(k_spec, dedup_points(&v_pts));
    let (ru, rv) = (ub.rank(), vb.rank());
    let n = ru + rv;

    let mean_feature = |basis: &FeatureBasis, pts: &[Vec<f64>]| {
        pts.iter().fold(DVector::zeros(basis.rank()), |acc, p| acc + basis.feature(p)) / pts.len() as f64
    };
    let mut lin = DVector::zeros(n);
    lin.rows_mut(0, ru).copy_from(&-mean_feature(&ub, xs));
    lin.rows_mut(ru, rv).copy_from(&-mean_feature(&vb, ys));

    let joint: Vec<Vec<f64>> = pairs.iter().map(|(a, b)| a.iter().chain(b).copied().collect()).collect();
    let unique = dedup_points(&joint);
    let basis = SosBasis::new(phi_spec, unique.clone())?;
    let mut coupling = DMatrix::zeros(pairs.len(), n);
    let mut offsets = DVector::zeros(pairs.len());
    let mut rows = Vec::with_capacity(pairs.len());
    for (m, (a, b)) in pairs.iter().enumerate() {
        coupling.view_mut((m, 0), (1, ru)).copy_from(&-ub.feature(a).transpose());
        coupling.view_mut((m, ru), (1, rv)).copy_from(&-vb.feature(b).transpose());
        offsets[m] = cost(a, b);
        rows.push((m, index_into(&unique, &joint[m])));
    }
    let problem = SplitProblem {
        hess: DMatrix::identity(n, n) * (2.0 * lambda_k),
        lin,
        constant: 0.0,
        coupling,
        offsets,
        blocks: vec![ConeBlock { features: basis.factor().factor().clone(), rows, trace_weight: lambda_tr }],
        eq_mat: DMatrix::zeros(0, n),
        eq_rhs: DVector::zeros(0),
    };
    let mut solution = admm::solve(&problem, &AdmmSettings::default());
    let beta_u = DMatrix::from_column_slice(ru, 1, solution.x.rows(0, ru).as_slice());
    let beta_v = DMatrix::from_column_slice(rv, 1, solution.x.rows(ru, rv).as_slice());
    let u = RepresenterModel::new(ub.anchors.clone(), k_spec, ub.coefficients(&beta_u))?;
    let v = RepresenterModel::new(vb.anchors.clone(), k_spec, vb.coefficients(&beta_v))?;
    let w_hat = xs.iter().map(|x| u.eval(x)[0]).sum::<f64>() / xs.len() as f64
        + ys.iter().map(|y| v.eval(y)[0]).sum::<f64>() / ys.len() as f64;
    let sos = SosModel::from_matrix(basis, solution.blocks.swap_remove(0))?;
    Ok(OtResult { w_hat, u, v, sos, report: solution.report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(m: usize) -> Vec<Vec<f64>> {
        (0..m).map(|i| vec![i as f64 / (m - 1) as f64]).collect()
    }

    fn sq(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    #[test]
    fn constant_objective_is_echoed() {
        let r = global_opt_lower_bound(&|_| 5.0, &grid(10), KernelSpec::scalar(0.3).unwrap(), 1e-8).unwrap();
        assert_abs_diff_eq!(r.c_hat, 5.0, epsilon = 1e-4);
    }

    #[test]
    fn single_sample_is_tight() {
        let r = global_opt_lower_bound(&|x| x[0].sin(), &[vec![0.7]], KernelSpec::scalar(0.3).unwrap(), 0.0).unwrap();
        assert_abs_diff_eq!(r.c_hat, 0.7f64.sin(), epsilon = 1e-8);
    }

    #[test]
    fn parabola_minimum() {
        let g = |x: &[f64]| (x[0] - 0.3).powi(2);
        let r = global_opt_lower_bound(&g, &grid(50), KernelSpec::scalar(0.3).unwrap(), 1e-6).unwrap();
        assert!(r.c_hat.abs() <= 1e-2, "{}", r.c_hat);
        assert!(r.c_hat <= grid(50).iter().map(|x| g(x)).fold(f64::INFINITY, f64::min) + 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = KernelSpec::scalar(0.3).unwrap();
        assert!(global_opt_lower_bound(&|_| 1.0, &[], spec, 0.0).is_err());
        assert!(global_opt_lower_bound(&|_| 1.0, &grid(3), spec, -1.0).is_err());
        assert!(ot_dual_estimate(&[], &[vec![0.0]], &sq, &[(vec![0.0], vec![0.0])], spec, spec, 1e-6, 0.0).is_err());
    }

    #[test]
    fn singleton_transport() {
        let (x, y) = (vec![0.2], vec![0.9]);
        let spec = KernelSpec::scalar(0.5).unwrap();
        let r = ot_dual_estimate(
            std::slice::from_ref(&x),
            std::slice::from_ref(&y),
            &sq,
            &[(x.clone(), y.clone())],
            spec,
            KernelSpec::scalar(0.3).unwrap(),
            1e-8,
            1e-8,
        )
        .unwrap();
        assert_abs_diff_eq!(r.w_hat, sq(&x, &y), epsilon = 1e-4);
    }

    #[test]
    fn identical_samples_cost_nothing() {
        let xs = grid(6);
        let pairs: Vec<_> = xs.iter().flat_map(|a| xs.iter().map(move |b| (a.clone(), b.clone()))).collect();
        let spec = KernelSpec::scalar(0.5).unwrap();
        let r = ot_dual_estimate(&xs, &xs, &sq, &pairs, spec, KernelSpec::scalar(0.3).unwrap(), 1e-6, 1e-6).unwrap();
        assert!(r.w_hat <= 0.05, "{} {:?}", r.w_hat, r.report);
    }
}
