use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::kernels::KernelSpec;

/// Spectral directions of the anchor Gram matrix below this fraction of the
/// largest eigenvalue are dropped.
pub(crate) const RANK_TOL: f64 = 1e-10;

/// Orthonormal coordinates for `span{k(., z_j)}`.
///
/// With `G = U diag(l) U'` restricted to the retained spectrum, a function
/// `f = sum_j alpha_j k(., z_j)` is written `f = sum_k beta_k psi_k` with
/// `alpha = U diag(l^-1/2) beta`, so that `|f|_K = |beta|` and
/// `f(z_j) = (U diag(l^1/2))_j . beta`.
#[derive(Debug, Clone)]
pub(crate) struct FeatureBasis {
    pub anchors: Vec<Vec<f64>>,
    pub spec: KernelSpec,
    to_coeffs: DMatrix<f64>,
    anchor_features: DMatrix<f64>,
}

impl FeatureBasis {
    pub fn new(spec: KernelSpec, anchors: Vec<Vec<f64>>) -> Self {
        let gram = spec.gram(&anchors);
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.max().max(f64::MIN_POSITIVE);
        let mut keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&k| eig.eigenvalues[k] > RANK_TOL * top).collect();
        // deterministic order: descending eigenvalue
        keep.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let j = anchors.len();
        let r = keep.len();
        let mut to_coeffs = DMatrix::zeros(j, r);
        let mut anchor_features = DMatrix::zeros(j, r);
        for (slot, &k) in keep.iter().enumerate() {
            let l = eig.eigenvalues[k];
            let mut v = eig.eigenvectors.column(k).into_owned();
            // fix the sign so the basis does not depend on the eigensolver's choice
            let pivot = v.iamax();
            if v[pivot] < 0.0 {
                v = -v;
            }
            to_coeffs.set_column(slot, &(&v / l.sqrt()));
            anchor_features.set_column(slot, &(&v * l.sqrt()));
        }
        Self { anchors, spec: spec.to_scalar(), to_coeffs, anchor_features }
    }

    pub fn rank(&self) -> usize {
        self.to_coeffs.ncols()
    }

    pub fn anchor_feature(&self, j: usize) -> DVector<f64> {
        self.anchor_features.row(j).transpose()
    }

    /// Index of the anchor coinciding with `x`.
    pub fn anchor_index(&self, x: &[f64]) -> Option<usize> {
        self.anchors
            .iter()
            .position(|z| crate::kernels::distance(z, x) <= crate::kernels::DEDUP_TOL)
    }

    /// Feature vector of any point (anchor lookup first, projection otherwise).
    pub fn feature(&self, x: &[f64]) -> DVector<f64> {
        match self.anchor_index(x) {
            Some(j) => self.anchor_feature(j),
            None => self.to_coeffs.transpose() * self.spec.kernel_vector(&self.anchors, x),
        }
    }

    /// Representer coefficients `alpha = U diag(l^-1/2) beta`.
    pub fn coefficients(&self, beta: &DMatrix<f64>) -> DMatrix<f64> {
        &self.to_coeffs * beta
    }
}
