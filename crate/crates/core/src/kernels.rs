//! Gaussian kernels, Gram matrices and their Cholesky factors.
//!
//! The scalar kernel is `k(x, y) = exp(-|x - y|^2 / (2 sigma^2))`. A matrix-valued
//! kernel of output dimension `P` is the diagonal lift `K(x, y) = k(x, y) Id_P`, so
//! every Gram-level computation only needs the scalar kernel.

use nalgebra::{DMatrix, DVector};

use crate::error::{KsosError, Result};

/// Largest per-variable derivative order served by the closed-form derivatives.
pub const MAX_ANALYTIC_ORDER: usize = 2;

/// Step used by [`KernelSpec::partial_fd`] when no step is given.
pub const FD_STEP: f64 = 1e-4;

/// Diagonal shift applied once when a Gram matrix fails to factorize.
pub const CHOLESKY_JITTER: f64 = 1e-10;

/// Points closer than this (Euclidean) are treated as coincident.
pub const DEDUP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    bandwidth: f64,
    output_dim: usize,
}

impl KernelSpec {
    pub fn new(bandwidth: f64, output_dim: usize) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(KsosError::InvalidParameter(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        if output_dim == 0 {
            return Err(KsosError::InvalidParameter("output dimension must be >= 1".into()));
        }
        Ok(Self { bandwidth, output_dim })
    }

    pub fn scalar(bandwidth: f64) -> Result<Self> {
        Self::new(bandwidth, 1)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Same bandwidth, scalar output.
    pub fn to_scalar(&self) -> Self {
        Self { bandwidth: self.bandwidth, output_dim: 1 }
    }

    /// Scalar kernel value `k(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x.len(), y.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        (-sq / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }

    /// Symmetric Gram matrix `[k(x_i, x_j)]` with an exact unit diagonal.
    pub fn gram(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let n = points.len();
        let mut g = DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.eval_unchecked(&points[i], &points[j]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// Rectangular matrix `[k(x_i, z_j)]`.
    pub fn cross_gram(&self, xs: &[Vec<f64>], zs: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), zs.len(), |i, j| self.eval_unchecked(&xs[i], &zs[j]))
    }

    /// Column vector `(k(z_1, x), ..., k(z_J, x))`.
    pub fn kernel_vector(&self, anchors: &[Vec<f64>], x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(anchors.len(), anchors.iter().map(|z| self.eval_unchecked(z, x)))
    }

    /// Closed-form `d^alpha_x d^beta_y k(x, y)` for `|alpha|, |beta| <= 2`.
    ///
    /// The Gaussian factorizes over coordinates; in each coordinate, with
    /// `u = (x - y) / sigma`, the derivative is `(-1)^a sigma^-(a+b) He_{a+b}(u) e^{-u^2/2}`
    /// where `He_n` is the probabilists' Hermite polynomial.
    pub fn partial(&self, alpha: &[usize], beta: &[usize], x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x.len(), y.len())?;
        check_dims(x.len(), alpha.len())?;
        check_dims(x.len(), beta.len())?;
        for order in [alpha.iter().sum::<usize>(), beta.iter().sum::<usize>()] {
            if order > MAX_ANALYTIC_ORDER {
                return Err(KsosError::UnsupportedOrder { order, max: MAX_ANALYTIC_ORDER });
            }
        }
        Ok(self.partial_unchecked(alpha, beta, x, y))
    }

    pub(crate) fn partial_unchecked(&self, alpha: &[usize], beta: &[usize], x: &[f64], y: &[f64]) -> f64 {
        let s = self.bandwidth;
        let mut value = self.eval_unchecked(x, y);
        for k in 0..x.len() {
            let (a, b) = (alpha[k], beta[k]);
            if a + b == 0 {
                continue;
            }
            let u = (x[k] - y[k]) / s;
            let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
            value *= sign * hermite(a + b, u) / s.powi((a + b) as i32);
        }
        value
    }

    /// Central finite-difference derivative of any order, for orders beyond
    /// [`MAX_ANALYTIC_ORDER`]. Accuracy degrades as `eps / step^order`.
    pub fn partial_fd(&self, alpha: &[usize], beta: &[usize], x: &[f64], y: &[f64], step: f64) -> Result<f64> {
        check_dims(x.len(), y.len())?;
        check_dims(x.len(), alpha.len())?;
        check_dims(x.len(), beta.len())?;
        let d = x.len();
        let mut joint = x.to_vec();
        joint.extend_from_slice(y);
        let mut orders = alpha.to_vec();
        orders.extend_from_slice(beta);
        Ok(central_difference(
            &|p: &[f64]| self.eval_unchecked(&p[..d], &p[d..]),
            &orders,
            &joint,
            step,
        ))
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(KsosError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Probabilists' Hermite polynomial `He_n(u)`.
pub(crate) fn hermite(n: usize, u: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, u);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = u * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Tensor-product central difference of `f` at `x` with per-coordinate orders.
/// Order `k` uses offsets `(k/2 - j) h`, `j = 0..=k`, weights `(-1)^j C(k, j) / h^k`.
pub fn central_difference(f: &dyn Fn(&[f64]) -> f64, orders: &[usize], x: &[f64], h: f64) -> f64 {
    let active: Vec<usize> = (0..x.len()).filter(|&k| orders[k] > 0).collect();
    let mut counters = vec![0usize; active.len()];
    let mut point = x.to_vec();
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        for (slot, &k) in active.iter().enumerate() {
            let ord = orders[k];
            let j = counters[slot];
            point[k] = x[k] + (ord as f64 / 2.0 - j as f64) * h;
            let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
            weight *= sign * binomial(ord, j);
        }
        total += weight * f(&point);
        // odometer over the stencil
        let mut slot = 0;
        loop {
            if slot == active.len() {
                let order: usize = orders.iter().sum();
                return total / h.powi(order as i32);
            }
            counters[slot] += 1;
            if counters[slot] <= orders[active[slot]] {
                break;
            }
            counters[slot] = 0;
            slot += 1;
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Remove points within [`DEDUP_TOL`] of an earlier point, keeping first occurrences.
pub fn dedup_points(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for p in points {
        if !out.iter().any(|q| distance(p, q) <= DEDUP_TOL) {
            out.push(p.clone());
        }
    }
    out
}

pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Cholesky factor `G + jitter Id = R^T R` with `R` upper triangular.
/// The columns `Phi_m = R e_m` are the finite feature vectors of the sample points.
#[derive(Debug, Clone)]
pub struct GramFactor {
    gram: DMatrix<f64>,
    factor: DMatrix<f64>,
    jitter: f64,
}

/// Factorize a symmetric PSD Gram matrix, retrying once with [`CHOLESKY_JITTER`].
pub fn cholesky_factor(gram: &DMatrix<f64>) -> Result<GramFactor> {
    if !gram.is_square() {
        return Err(KsosError::DimensionMismatch { expected: gram.nrows(), found: gram.ncols() });
    }
    if gram.nrows() == 0 {
        return Err(KsosError::EmptyInput("Gram matrix"));
    }
    let scale = gram.diagonal().amax().max(1.0);
    // pivots below the rounding floor mean the factor carries no information
    let floor = f64::EPSILON * scale * gram.nrows() as f64;
    let mut last_pivot = f64::NAN;
    for jitter in [0.0, CHOLESKY_JITTER] {
        let shifted = gram + DMatrix::<f64>::identity(gram.nrows(), gram.ncols()) * jitter;
        if let Some(chol) = shifted.cholesky() {
            let lower = chol.unpack();
            let min_pivot = lower.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
            last_pivot = min_pivot;
            if min_pivot.is_finite() && min_pivot > floor {
                return Ok(GramFactor { gram: gram.clone(), factor: lower.transpose(), jitter });
            }
        }
    }
    Err(KsosError::SingularGram { min_pivot: last_pivot, jitter: CHOLESKY_JITTER })
}

impl GramFactor {
    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// The matrix as passed in, without jitter.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `G + jitter Id`, the matrix actually factorized.
    pub fn factored_gram(&self) -> DMatrix<f64> {
        &self.gram + DMatrix::<f64>::identity(self.dim(), self.dim()) * self.jitter
    }

    /// Upper-triangular `R`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn feature(&self, m: usize) -> DVector<f64> {
        self.factor.column(m).into_owned()
    }

    /// Solves `R^T v = k`; for `k = k_X(x)` this is the feature vector of `x`.
    pub fn solve_transposed(&self, k: &DVector<f64>) -> DVector<f64> {
        self.factor
            .tr_solve_upper_triangular(k)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `R^{-1}`.
    pub fn factor_inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        self.factor
            .solve_upper_triangular(&DMatrix::identity(n, n))
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `(G + jitter Id)^{-1} = R^{-1} R^{-T}`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let w = self.factor_inverse();
        &w * w.transpose()
    }

    pub fn inverse_trace(&self) -> f64 {
        self.factor_inverse().norm_squared()
    }

    /// `max |R^T R - (G + jitter Id)|`.
    pub fn reconstruction_error(&self) -> f64 {
        (self.factor.transpose() * &self.factor - self.factored_gram()).amax()
    }
}
