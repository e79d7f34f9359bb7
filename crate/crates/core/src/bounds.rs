//! Quantities in the sampled-to-global constraint guarantees.
//!
//! Suprema over continuous sets are replaced by maxima over finite grids, so
//! every reported supremum is a lower approximation of the true one.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{KsosError, Result};
use crate::kernels::{central_difference, distance, GramFactor, KernelSpec, MAX_ANALYTIC_ORDER};

/// Default points per dimension for bound computations.
pub const BOUNDS_RESOLUTION: usize = 200;

/// Highest order accepted by the finite-difference [`seminorm`].
pub const MAX_FD_ORDER: usize = 4;

/// Finite proxy for a compact set: a tensor grid on a box or an explicit point list.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainGrid {
    Box { lower: Vec<f64>, upper: Vec<f64>, resolution: usize },
    Points(Vec<Vec<f64>>),
}

impl DomainGrid {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>, resolution: usize) -> Result<Self> {
        if lower.is_empty() {
            return Err(KsosError::EmptyInput("box bounds"));
        }
        if lower.len() != upper.len() {
            return Err(KsosError::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        if resolution < 2 {
            return Err(KsosError::InvalidParameter(format!("grid resolution must be >= 2, got {resolution}")));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(KsosError::InvalidParameter("box lower bounds must be below upper bounds".into()));
        }
        Ok(Self::Box { lower, upper, resolution })
    }

    pub fn unit_cube(d: usize, resolution: usize) -> Result<Self> {
        Self::new_box(vec![0.0; d], vec![1.0; d], resolution)
    }

    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(KsosError::EmptyInput("domain points"));
        }
        let d = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(KsosError::DimensionMismatch { expected: d, found: p.len() });
        }
        Ok(Self::Points(points))
    }

    /// Perimeter of `[0,1]^2` with `per_side` equispaced points per side, corners shared.
    pub fn unit_square_boundary(per_side: usize) -> Result<Self> {
        if per_side < 2 {
            return Err(KsosError::InvalidParameter(format!("need >= 2 points per side, got {per_side}")));
        }
        let t = |k: usize| k as f64 / (per_side - 1) as f64;
        let mut pts = Vec::with_capacity(4 * (per_side - 1));
        for k in 0..per_side - 1 {
            pts.push(vec![t(k), 0.0]);
            pts.push(vec![1.0, t(k)]);
            pts.push(vec![1.0 - t(k), 1.0]);
            pts.push(vec![0.0, 1.0 - t(k)]);
        }
        Self::from_points(pts)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Box { lower, .. } => lower.len(),
            Self::Points(p) => p[0].len(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Box { lower, resolution, .. } => resolution.pow(lower.len() as u32),
            Self::Points(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid point with linear index `i`, first coordinate fastest.
    pub fn point(&self, i: usize) -> Vec<f64> {
        match self {
            Self::Box { lower, upper, resolution } => {
                let mut rest = i;
                lower
                    .iter()
                    .zip(upper)
                    .map(|(a, b)| {
                        let k = rest % resolution;
                        rest /= resolution;
                        a + (b - a) * k as f64 / (*resolution - 1) as f64
                    })
                    .collect()
            }
            Self::Points(p) => p[i].clone(),
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Every difference `x - y` of two grid points. For a box this is the exact
    /// `(2 res - 1)^d` displacement grid, for a point list all ordered pairs.
    pub fn displacements(&self) -> Vec<Vec<f64>> {
        match self {
            Self::Box { lower, upper, resolution } => {
                let side = 2 * resolution - 1;
                let n = side.pow(lower.len() as u32);
                (0..n)
                    .map(|i| {
                        let mut rest = i;
                        lower
                            .iter()
                            .zip(upper)
                            .map(|(a, b)| {
                                let k = (rest % side) as f64 - (*resolution - 1) as f64;
                                rest /= side;
                                (b - a) * k / (*resolution - 1) as f64
                            })
                            .collect()
                    })
                    .collect()
            }
            Self::Points(p) => p
                .iter()
                .flat_map(|x| p.iter().map(move |y| x.iter().zip(y).map(|(a, b)| a - b).collect()))
                .collect(),
        }
    }
}

/// All multi-indices in `d` variables with `|alpha| = s`.
pub fn multi_indices(d: usize, s: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return if s == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=s).rev() {
        for mut tail in multi_indices(d - 1, s - first) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// `max_{x in domain} min_j |x - x_j|`.
pub fn fill_distance(samples: &[Vec<f64>], domain: &DomainGrid) -> Result<f64> {
    if samples.is_empty() {
        return Err(KsosError::EmptyInput("samples"));
    }
    Ok((0..domain.len())
        .into_par_iter()
        .map(|i| {
            let x = domain.point(i);
            samples.iter().map(|s| distance(&x, s)).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max))
}

/// `|g|_s = max_{x, |alpha| = s} |d^alpha g(x)|` by central differences.
pub fn seminorm(g: &(dyn Fn(&[f64]) -> f64 + Sync), domain: &DomainGrid, s: usize) -> Result<f64> {
    if s > MAX_FD_ORDER {
        return Err(KsosError::UnsupportedOrder { order: s, max: MAX_FD_ORDER });
    }
    let alphas = multi_indices(domain.dim(), s);
    let step = f64::EPSILON.powf(1.0 / (s as f64 + 2.0));
    Ok((0..domain.len())
        .into_par_iter()
        .map(|i| {
            let x = domain.point(i);
            alphas
                .iter()
                .map(|a| if s == 0 { g(&x).abs() } else { central_difference(g, a, &x, step).abs() })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max))
}

/// Seminorm from a derivative oracle `(alpha, x) -> d^alpha g(x)`.
pub fn seminorm_with(deriv: &(dyn Fn(&[usize], &[f64]) -> f64 + Sync), domain: &DomainGrid, s: usize) -> f64 {
    let alphas = multi_indices(domain.dim(), s);
    (0..domain.len())
        .into_par_iter()
        .map(|i| {
            let x = domain.point(i);
            alphas.iter().map(|a| deriv(a, &x).abs()).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// `D^2_s = max_{x,y in domain, |alpha| <= s} |d_x^alpha d_y^alpha k(x, y)|`.
pub fn kernel_deriv_sup(phi_spec: KernelSpec, domain: &DomainGrid, s: usize) -> Result<f64> {
    if s > MAX_ANALYTIC_ORDER {
        return Err(KsosError::UnsupportedOrder { order: s, max: MAX_ANALYTIC_ORDER });
    }
    let d = domain.dim();
    let alphas: Vec<Vec<usize>> = (0..=s).flat_map(|o| multi_indices(d, o)).collect();
    let origin = vec![0.0; d];
    let spec = phi_spec.to_scalar();
    Ok(domain
        .displacements()
        .par_iter()
        .map(|delta| {
            alphas
                .iter()
                .map(|a| spec.partial_unchecked(a, a, delta, &origin).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `C_0 = 3 max(sqrt d, 3 sqrt(2d) (s-1))^{2s} / s!`.
pub fn c0_constant(d: usize, s: usize) -> f64 {
    let df = d as f64;
    let base = df.sqrt().max(3.0 * (2.0 * df).sqrt() * (s as f64 - 1.0));
    3.0 * base.powi(2 * s as i32) / factorial(s)
}

/// Same constant written as `3 d^s max(1, 18 (s-1)^2)^s / s!`.
pub fn c0_constant_alt(d: usize, s: usize) -> f64 {
    let sm1 = s as f64 - 1.0;
    3.0 * (d as f64).powi(s as i32) * (18.0 * sm1 * sm1).max(1.0).powi(s as i32) / factorial(s)
}

/// `C_K` for constraint rows constant on pieces of the set:
/// `max_m |c_m| sqrt(max_{|alpha| = s} d_x^alpha d_y^alpha k(x, x))`.
pub fn ck_constant(spec: KernelSpec, rows: &[Vec<f64>], d: usize, s: usize) -> Result<f64> {
    if s > MAX_ANALYTIC_ORDER {
        return Err(KsosError::UnsupportedOrder { order: s, max: MAX_ANALYTIC_ORDER });
    }
    let origin = vec![0.0; d];
    let scalar = spec.to_scalar();
    let kd = multi_indices(d, s)
        .iter()
        .map(|a| scalar.partial_unchecked(a, a, &origin, &origin))
        .fold(0.0, f64::max);
    let cmax = rows.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
    Ok(cmax * kd.max(0.0).sqrt())
}

/// `C_K` for a smooth row field `c(x)`, via the Leibniz rule
/// `|d^alpha [k(., x) c(x)]|^2 = sum_{b, g <= alpha} C(alpha,b) C(alpha,g)
///  d_x^{alpha-b} d_y^{alpha-g} k(x, x) <d^b c(x), d^g c(x)>`,
/// with derivatives of `c` by central differences.
pub fn ck_constant_smooth(
    spec: KernelSpec,
    rows: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    points: &DomainGrid,
    s: usize,
) -> Result<f64> {
    if s > MAX_ANALYTIC_ORDER {
        return Err(KsosError::UnsupportedOrder { order: s, max: MAX_ANALYTIC_ORDER });
    }
    let d = points.dim();
    let scalar = spec.to_scalar();
    let alphas = multi_indices(d, s);
    let p = rows(&points.point(0)).len();
    let step = f64::EPSILON.powf(0.25);
    let value = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let x = points.point(i);
            let mut best: f64 = 0.0;
            for alpha in &alphas {
                let subs = sub_indices(alpha);
                let dc: Vec<Vec<f64>> = subs
                    .iter()
                    .map(|b| {
                        (0..p)
                            .map(|q| {
                                let comp = |y: &[f64]| rows(y)[q];
                                if b.iter().all(|&v| v == 0) {
                                    comp(&x)
                                } else {
                                    central_difference(&comp, b, &x, step)
                                }
                            })
                            .collect()
                    })
                    .collect();
                let mut total = 0.0;
                for (bi, b) in subs.iter().enumerate() {
                    for (gi, g) in subs.iter().enumerate() {
                        let ab: Vec<usize> = alpha.iter().zip(b).map(|(a, b)| a - b).collect();
                        let ag: Vec<usize> = alpha.iter().zip(g).map(|(a, g)| a - g).collect();
                        let coef = multi_binomial(alpha, b) * multi_binomial(alpha, g);
                        let inner: f64 = dc[bi].iter().zip(&dc[gi]).map(|(u, v)| u * v).sum();
                        total += coef * scalar.partial_unchecked(&ab, &ag, &x, &x) * inner;
                    }
                }
                best = best.max(total.max(0.0).sqrt());
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(value)
}

fn sub_indices(alpha: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &a in alpha {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<usize>| {
                (0..=a).map(move |b| {
                    let mut v = prefix.clone();
                    v.push(b);
                    v
                })
            })
            .collect();
    }
    out
}

fn multi_binomial(alpha: &[usize], beta: &[usize]) -> f64 {
    alpha
        .iter()
        .zip(beta)
        .map(|(&a, &b)| factorial(a) / (factorial(b) * factorial(a - b)))
        .product()
}

/// `M_A = tr(G^{-1}) max_{m,i} |y_{m,i}|`.
pub fn ma_bound(factor: &GramFactor, sample_values: &DMatrix<f64>) -> f64 {
    let ymax = sample_values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    factor.inverse_trace() * ymax
}

/// `(C_K1 M_f + |d|_1) h`.
pub fn sigma_slow(ck1: f64, m_f: f64, d_semi1: f64, h: f64) -> f64 {
    (ck1 * m_f + d_semi1) * h
}

/// `C_0 (C_Ks M_f + |d|_s + 2^s D^2 M_A) h^s`, only for `s >= 2`.
#[allow(clippy::too_many_arguments)]
pub fn sigma_fast(c0: f64, cks: f64, m_f: f64, d_semis: f64, d2: f64, m_a: f64, h: f64, s: usize) -> Result<f64> {
    if s < 2 {
        return Err(KsosError::InvalidParameter(format!("the fast rate needs s >= 2, got {s}")));
    }
    let two_s = 2f64.powi(s as i32);
    Ok(c0 * (cks * m_f + d_semis + two_s * d2 * m_a) * h.powi(s as i32))
}

/// `beta |g_1|_K sigma`.
pub fn gap_bound(beta: f64, g1_norm: f64, sigma: f64) -> f64 {
    beta * g1_norm * sigma
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringCheck {
    pub epsilon: f64,
    pub holds: bool,
    pub min_g: f64,
}

/// Checks `min g >= -(eps + 2 tau)` with `eps = C_0 (|g|_s + 2^s D^2 tr A) h^s`.
#[allow(clippy::too_many_arguments)]
pub fn scattering_check(
    values: &[f64],
    tau: f64,
    trace_a: f64,
    h: f64,
    s: usize,
    g_seminorm: f64,
    d2: f64,
    d: usize,
) -> ScatteringCheck {
    let epsilon = c0_constant(d, s) * (g_seminorm + 2f64.powi(s as i32) * d2 * trace_a) * h.powi(s as i32);
    let min_g = values.iter().copied().fold(f64::INFINITY, f64::min);
    ScatteringCheck { epsilon, holds: min_g >= -(epsilon + 2.0 * tau), min_g }
}

/// Terms entering [`BoundsReport::assemble`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsTerms {
    pub h: f64,
    pub s: usize,
    pub d: usize,
    pub d_seminorm1: f64,
    pub d_seminorm: f64,
    pub ck1: f64,
    pub cks: f64,
    pub d2: f64,
    pub m_f: f64,
    pub m_a: f64,
    /// Lipschitz constant and `|g_1|_K` for the gap bound, when known.
    pub gap_inputs: Option<(f64, f64)>,
    /// Radius of the ball-union covering of the constraint set, when one is claimed.
    pub ball_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub h: f64,
    pub s: usize,
    pub d_seminorm: f64,
    pub ck1: f64,
    pub cks: f64,
    pub d2: f64,
    pub c0: f64,
    pub m_f: f64,
    pub m_a: f64,
    pub sigma_slow: f64,
    /// `None` when `s < 2`.
    pub sigma_fast: Option<f64>,
    pub sigma: f64,
    pub gap: Option<f64>,
    /// True unless a ball radius was given and `h <= r min(1, 1/(18 (s-1)^2))`.
    pub fast_rate_conditional: bool,
}

impl BoundsReport {
    pub fn assemble(t: &BoundsTerms) -> Result<Self> {
        let c0 = c0_constant(t.d, t.s.max(1));
        let slow = sigma_slow(t.ck1, t.m_f, t.d_seminorm1, t.h);
        let fast = if t.s >= 2 {
            Some(sigma_fast(c0, t.cks, t.m_f, t.d_seminorm, t.d2, t.m_a, t.h, t.s)?)
        } else {
            None
        };
        let sigma = fast.map_or(slow, |f| slow.min(f));
        let fast_rate_conditional = match t.ball_radius {
            Some(r) if t.s >= 2 => {
                let sm1 = t.s as f64 - 1.0;
                t.h > r * (1.0 / (18.0 * sm1 * sm1)).min(1.0)
            }
            _ => true,
        };
        let report = Self {
            h: t.h,
            s: t.s,
            d_seminorm: t.d_seminorm,
            ck1: t.ck1,
            cks: t.cks,
            d2: t.d2,
            c0,
            m_f: t.m_f,
            m_a: t.m_a,
            sigma_slow: slow,
            sigma_fast: fast,
            sigma,
            gap: t.gap_inputs.map(|(beta, g1)| gap_bound(beta, g1, sigma)),
            fast_rate_conditional,
        };
        let mut values = vec![report.h, report.d_seminorm, report.ck1, report.cks, report.d2, report.c0, report.m_f, report.m_a, slow, sigma];
        values.extend(fast);
        values.extend(report.gap);
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(KsosError::InvalidParameter("bound terms must be finite and nonnegative".into()));
        }
        Ok(report)
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.6e}"));
        let mut out = String::new();
        out.push_str("suprema are grid maxima (lower approximations)\n");
        out.push_str(&format!("fill distance h      {:.6e}\n", self.h));
        out.push_str(&format!("order s              {}\n", self.s));
        out.push_str(&format!("|d|_s                {:.6e}\n", self.d_seminorm));
        out.push_str(&format!("C_K,1                {:.6e}\n", self.ck1));
        out.push_str(&format!("C_K,s                {:.6e}\n", self.cks));
        out.push_str(&format!("D^2                  {:.6e}\n", self.d2));
        out.push_str(&format!("C_0                  {:.6e}\n", self.c0));
        out.push_str(&format!("M_f                  {:.6e}\n", self.m_f));
        out.push_str(&format!("M_A                  {:.6e}\n", self.m_a));
        out.push_str(&format!("sigma_slow           {:.6e}\n", self.sigma_slow));
        out.push_str(&format!("sigma_fast           {}{}\n", opt(self.sigma_fast), if self.fast_rate_conditional { " (hypothesis-conditional)" } else { "" }));
        out.push_str(&format!("sigma                {:.6e}\n", self.sigma));
        out.push_str(&format!("gap                  {}\n", opt(self.gap)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::cholesky_factor;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fill_distance_examples() {
        let dom = DomainGrid::unit_cube(1, 1001).unwrap();
        let h = fill_distance(&[vec![0.0], vec![0.5], vec![1.0]], &dom).unwrap();
        assert_abs_diff_eq!(h, 0.25, epsilon = 1e-3);
        let grid = DomainGrid::unit_cube(2, 11).unwrap();
        assert_eq!(fill_distance(&grid.points(), &grid).unwrap(), 0.0);
        let sq = DomainGrid::unit_cube(2, 101).unwrap();
        let h = fill_distance(&[vec![0.5, 0.5]], &sq).unwrap();
        assert_abs_diff_eq!(h, 0.5f64.sqrt(), epsilon = 1e-12);
        assert!(fill_distance(&[], &sq).is_err());
    }

    #[test]
    fn domain_validation() {
        assert!(DomainGrid::unit_cube(2, 1).is_err());
        assert!(DomainGrid::new_box(vec![0.0], vec![0.0], 5).is_err());
        assert!(DomainGrid::from_points(vec![]).is_err());
        let b = DomainGrid::unit_square_boundary(5).unwrap();
        assert_eq!(b.len(), 16);
        assert!(b.points().iter().all(|p| p.iter().any(|&c| c == 0.0 || c == 1.0)));
    }

    #[test]
    fn box_displacements_are_exact_differences() {
        let dom = DomainGrid::unit_cube(2, 3).unwrap();
        let disp = dom.displacements();
        assert_eq!(disp.len(), 25);
        let pts = dom.points();
        for x in &pts {
            for y in &pts {
                let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                assert!(disp.iter().any(|d| distance(d, &diff) < 1e-14));
            }
        }
    }

    #[test]
    fn seminorm_examples() {
        let dom = DomainGrid::unit_cube(1, 1001).unwrap();
        assert!(seminorm(&|_| 3.0, &dom, 1).unwrap() < 1e-8);
        assert_abs_diff_eq!(seminorm(&|x| x[0], &dom, 1).unwrap(), 1.0, epsilon = 1e-8);
        let tau = std::f64::consts::TAU;
        assert_abs_diff_eq!(seminorm(&|x| (tau * x[0]).sin(), &dom, 1).unwrap(), tau, epsilon = 1e-2);
        assert_abs_diff_eq!(seminorm(&|x| (tau * x[0]).sin(), &dom, 2).unwrap(), tau * tau, epsilon = 1e-2 * tau * tau);
        assert!(matches!(seminorm(&|x| x[0], &dom, 5), Err(KsosError::UnsupportedOrder { .. })));
    }

    #[test]
    fn kernel_deriv_sup_examples() {
        let dom = DomainGrid::unit_cube(1, 51).unwrap();
        let spec = KernelSpec::scalar(1.0).unwrap();
        assert_abs_diff_eq!(kernel_deriv_sup(spec, &dom, 0).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(kernel_deriv_sup(spec, &dom, 1).unwrap(), 1.0, epsilon = 1e-3);
        let dom2 = DomainGrid::unit_cube(2, 21).unwrap();
        let narrow = KernelSpec::scalar(0.3).unwrap();
        let vals: Vec<f64> = (0..=2).map(|s| kernel_deriv_sup(narrow, &dom2, s).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]));
        // d^2_x d^2_y k at x = y is 3 / sigma^4
        assert_abs_diff_eq!(vals[2], 3.0 / 0.3f64.powi(4), epsilon = 1e-9 * vals[2]);
        assert!(kernel_deriv_sup(spec, &dom, 3).is_err());
    }

    #[test]
    fn c0_values_and_identity() {
        assert_abs_diff_eq!(c0_constant(1, 1), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c0_constant(2, 2), 1944.0, epsilon = 1e-9);
        for d in 1..=4 {
            for s in 1..=4 {
                let (a, b) = (c0_constant(d, s), c0_constant_alt(d, s));
                assert!((a - b).abs() <= 1e-12 * a, "d={d} s={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn ck_examples() {
        let spec = KernelSpec::new(1.0, 2).unwrap();
        let normals = vec![vec![0.0, -1.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]];
        assert_abs_diff_eq!(ck_constant(spec, &normals, 2, 0).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ck_constant(spec, &normals, 2, 1).unwrap(), 1.0, epsilon = 1e-3);
        let doubled: Vec<Vec<f64>> = normals.iter().map(|c| c.iter().map(|v| 2.0 * v).collect()).collect();
        let narrow = KernelSpec::new(0.4, 2).unwrap();
        assert_eq!(ck_constant(narrow, &doubled, 2, 2).unwrap(), 2.0 * ck_constant(narrow, &normals, 2, 2).unwrap());
        // |alpha| = 2 max is d_1^2 d_1^2 k(x,x) = 3 / sigma^4
        assert_abs_diff_eq!(ck_constant(narrow, &normals, 2, 2).unwrap(), 3f64.sqrt() / 0.16, epsilon = 1e-9);
    }

    #[test]
    fn ck_smooth_matches_constant_rows() {
        let spec = KernelSpec::new(0.5, 2).unwrap();
        let dom = DomainGrid::unit_cube(2, 5).unwrap();
        for s in 0..=2 {
            let smooth = ck_constant_smooth(spec, &|_| vec![0.6, 0.8], &dom, s).unwrap();
            let konst = ck_constant(spec, &[vec![0.6, 0.8]], 2, s).unwrap();
            assert_abs_diff_eq!(smooth, konst, epsilon = 1e-9 * konst.max(1.0));
        }
        // c(x) = x in 1d, s = 1: |d[k(.,x) x]|^2 = k_xy x^2 + 2 k_x x + k = x^2/sigma^2 + 1
        let s1 = KernelSpec::scalar(0.5).unwrap();
        let line = DomainGrid::unit_cube(1, 11).unwrap();
        let v = ck_constant_smooth(s1, &|x| vec![x[0]], &line, 1).unwrap();
        assert_abs_diff_eq!(v, (1.0f64 / 0.25 + 1.0).sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn ma_examples() {
        let f = cholesky_factor(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(ma_bound(&f, &DMatrix::zeros(3, 2)), 0.0);
        let y = DMatrix::from_row_slice(3, 1, &[1.0, -2.0, 0.5]);
        assert_abs_diff_eq!(ma_bound(&f, &y), 6.0, epsilon = 1e-12);
        assert_eq!(ma_bound(&f, &y), ma_bound(&f, &(-y)));
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_slow(1.0, 2.0, 0.5, 0.0), 0.0);
        assert_abs_diff_eq!(sigma_slow(1.0, 2.0, 0.5, 0.1), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(sigma_slow(1.0, 2.0, 0.5, 0.2), 2.0 * sigma_slow(1.0, 2.0, 0.5, 0.1), epsilon = 1e-15);
        assert_eq!(sigma_fast(1944.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 2).unwrap(), 0.0);
        // bracket 1 + 1 + 4 = 6
        assert_abs_diff_eq!(sigma_fast(1944.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.01, 2).unwrap(), 1.1664, epsilon = 1e-12);
        let a = sigma_fast(5.0, 1.0, 2.0, 0.0, 1.0, 3.0, 0.1, 3).unwrap() / 0.1f64.powi(3);
        let b = sigma_fast(5.0, 1.0, 2.0, 0.0, 1.0, 3.0, 0.02, 3).unwrap() / 0.02f64.powi(3);
        assert_abs_diff_eq!(a, b, epsilon = 1e-9 * a);
        assert!(sigma_fast(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.1, 1).is_err());
    }

    #[test]
    fn gap_examples() {
        assert_eq!(gap_bound(2.0, 3.0, 0.0), 0.0);
        assert_abs_diff_eq!(gap_bound(2.0, 3.0, 0.1), 0.6, epsilon = 1e-15);
        assert!(gap_bound(2.5, 3.0, 0.1) > gap_bound(2.0, 3.0, 0.1));
    }

    #[test]
    fn scattering_examples() {
        let ok = scattering_check(&[0.0, 0.3, 2.0], 0.0, 1.0, 0.1, 2, 1.0, 1.0, 2);
        assert!(ok.holds);
        assert_eq!(ok.min_g, 0.0);
        let bad = scattering_check(&[1.0, -10.0], 0.0, 1e-6, 1e-3, 2, 1e-3, 1.0, 2);
        assert!(!bad.holds);
        assert_eq!(bad.min_g, -10.0);
    }

    #[test]
    fn report_takes_the_smaller_rate() {
        let terms = BoundsTerms {
            h: 0.01,
            s: 2,
            d: 2,
            d_seminorm1: 0.0,
            d_seminorm: 0.0,
            ck1: 1.0,
            cks: 1.0,
            d2: 1.0,
            m_f: 1.0,
            m_a: 1.0,
            gap_inputs: Some((2.0, 3.0)),
            ball_radius: None,
        };
        let r = BoundsReport::assemble(&terms).unwrap();
        assert_eq!(r.sigma, r.sigma_slow.min(r.sigma_fast.unwrap()));
        assert_eq!(r.gap, Some(6.0 * r.sigma));
        assert!(r.fast_rate_conditional);
        let slow_only = BoundsReport::assemble(&BoundsTerms { s: 1, ..terms }).unwrap();
        assert_eq!(slow_only.sigma_fast, None);
        assert_eq!(slow_only.sigma, slow_only.sigma_slow);
        let covered = BoundsReport::assemble(&BoundsTerms { h: 1e-3, ball_radius: Some(0.1), ..terms }).unwrap();
        assert!(!covered.fast_rate_conditional);
        assert!(BoundsReport::assemble(&BoundsTerms { m_f: f64::NAN, ..terms }).is_err());
        assert!(r.to_text().contains("sigma_fast"));
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(multi_indices(3, 0), vec![vec![0, 0, 0]]);
        assert_eq!(multi_indices(3, 2).len(), 6);
    }
}
