//! Finite-dimensional kernel sum-of-squares models.
//!
//! A PSD operator `A` on the feature space of `k_phi` is never formed. With
//! `G = R^T R` the Gram matrix of the anchors, the operator is carried by an
//! `M x M` PSD matrix `B` acting on the Cholesky features, and
//! `<phi(x), A phi(x)> = v(x)^T B v(x)` with `v(x) = R^{-T} k_X(x)`.
//! At an anchor `v(x_m) = Phi_m = R e_m`, and `tr(A) = tr(B)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{KsosError, Result};
use crate::kernels::{cholesky_factor, distance, GramFactor, KernelSpec, DEDUP_TOL};

/// Targets in `[-CLAMP_TOL, 0)` are treated as zero by [`interpolate_nonneg`].
pub const CLAMP_TOL: f64 = 1e-12;

/// Anchors, scalar feature kernel and the factor of their Gram matrix.
#[derive(Debug, Clone)]
pub struct SosBasis {
    anchors: Vec<Vec<f64>>,
    phi_spec: KernelSpec,
    factor: GramFactor,
}

impl SosBasis {
    pub fn new(phi_spec: KernelSpec, anchors: Vec<Vec<f64>>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(KsosError::EmptyInput("SoS anchors"));
        }
        let phi_spec = phi_spec.to_scalar();
        let factor = cholesky_factor(&phi_spec.gram(&anchors))?;
        Ok(Self { anchors, phi_spec, factor })
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn phi_spec(&self) -> KernelSpec {
        self.phi_spec
    }

    pub fn factor(&self) -> &GramFactor {
        &self.factor
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// `v(x) = R^{-T} k_X(x)`. At an anchor the exact column `Phi_m` is returned:
    /// the triangular solve loses accuracy on ill-conditioned Gram matrices, and
    /// with a Cholesky jitter this reads the kernel as `k + j delta`.
    pub fn features_at(&self, x: &[f64]) -> DVector<f64> {
        if let Some(m) = self.anchors.iter().position(|a| distance(a, x) <= DEDUP_TOL) {
            return self.factor.feature(m);
        }
        self.factor.solve_transposed(&self.phi_spec.kernel_vector(&self.anchors, x))
    }
}

#[derive(Debug, Clone)]
pub struct SosModel {
    basis: SosBasis,
    b: DMatrix<f64>,
    clamped: usize,
}

impl SosModel {
    /// Wrap an existing coefficient matrix; it is symmetrized but not projected.
    pub fn from_matrix(basis: SosBasis, b: DMatrix<f64>) -> Result<Self> {
        let m = basis.len();
        if b.nrows() != m || b.ncols() != m {
            return Err(KsosError::DimensionMismatch { expected: m, found: b.nrows() });
        }
        let b = (&b + b.transpose()) * 0.5;
        Ok(Self { basis, b, clamped: 0 })
    }

    pub fn zero(basis: SosBasis) -> Self {
        let m = basis.len();
        Self { basis, b: DMatrix::zeros(m, m), clamped: 0 }
    }

    pub fn basis(&self) -> &SosBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Number of slightly negative targets clamped to zero at construction.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// `<phi(x), A phi(x)>`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let v = self.basis.features_at(x);
        v.dot(&(&self.b * &v))
    }

    /// `Phi_m^T B Phi_m`, exact at the anchor without a triangular solve.
    pub fn anchor_value(&self, m: usize) -> f64 {
        let phi = self.basis.factor.feature(m);
        phi.dot(&(&self.b * &phi))
    }

    pub fn trace(&self) -> f64 {
        self.b.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.b.clone().symmetric_eigenvalues().min()
    }
}

/// PSD model taking the value `y_m` at anchor `m`, built as
/// `B = R^{-T} diag(y) R^{-1}` (trace `tr(diag(y) G^{-1})`).
pub fn interpolate_nonneg(basis: &SosBasis, y: &[f64]) -> Result<SosModel> {
    let m = basis.len();
    if y.len() != m {
        return Err(KsosError::DimensionMismatch { expected: m, found: y.len() });
    }
    let mut clamped = 0;
    let mut targets = Vec::with_capacity(m);
    for (index, &value) in y.iter().enumerate() {
        if !value.is_finite() || value < -CLAMP_TOL {
            return Err(KsosError::NegativeTarget { index, value });
        }
        if value < 0.0 {
            clamped += 1;
            targets.push(0.0);
        } else {
            targets.push(value);
        }
    }
    let w = basis.factor.factor_inverse();
    let scaled = DMatrix::from_fn(m, m, |i, j| targets[i] * w[(i, j)]);
    let b = w.transpose() * scaled;
    let b = (&b + b.transpose()) * 0.5;
    Ok(SosModel { basis: basis.clone(), b, clamped })
}

/// Frobenius projection onto the PSD cone by clipping eigenvalues at zero.
pub fn psd_project(s: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (s + s.transpose()) * 0.5;
    let n = sym.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, sym[(0, 0)].max(0.0));
    }
    let eig = SymmetricEigen::new(sym);
    let mut out = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 0.0 {
            let v = eig.eigenvectors.column(k);
            out.ger(lambda, &v, &v, 1.0);
        }
    }
    out
}
