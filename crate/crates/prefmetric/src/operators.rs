//! Linear operators derived from an item embedding and a comparison set:
//! the per-comparison row difference matrix R, row sum matrix S, and the
//! residual projector I - R R^+ that annihilates the column space of R.

use nalgebra::{DMatrix, DVector};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::{
    all_distances, delta_gamma, ComparisonSet, IdealPoint, ItemEmbedding, MetricMatrix,
};

/// Default relative singular-value cutoff for pseudoinverses.
pub const DEFAULT_PINV_TOL: f64 = 1e-10;

/// Comparison operators R (row differences x_i - x_j), S (row sums
/// x_i + x_j), and the lazily computed residual projector I - R R^+.
#[derive(Debug)]
pub struct ComparisonOperators {
    r: DMatrix<f64>,
    s: DMatrix<f64>,
    pinv_tol: f64,
    // Orthonormal basis of the column space of R (singular vectors above
    // the cutoff), shared by the projector and pseudoinverse application.
    range_basis: OnceLock<DMatrix<f64>>,
    proj_residual: OnceLock<DMatrix<f64>>,
    svd: OnceLock<nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl ComparisonOperators {
    pub fn n_comparisons(&self) -> usize {
        self.r.nrows()
    }

    pub fn dim(&self) -> usize {
        self.r.ncols()
    }

    pub fn pinv_tol(&self) -> f64 {
        self.pinv_tol
    }

    /// Row difference matrix, one row (x_i - x_j)^T per comparison.
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Row sum matrix, one row (x_i + x_j)^T per comparison.
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    fn svd(&self) -> &nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
        self.svd
            .get_or_init(|| self.r.clone().svd(true, true))
    }

    /// Orthonormal basis for the column space of R, singular values below
    /// `pinv_tol * sigma_max` treated as zero.
    pub(crate) fn range_basis(&self) -> &DMatrix<f64> {
        self.range_basis.get_or_init(|| {
            let svd = self.svd();
            let u = svd.u.as_ref().expect("svd computed with u");
            let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
            let cutoff = self.pinv_tol * sigma_max;
            let keep: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&k| svd.singular_values[k] > cutoff)
                .collect();
            let mut basis = DMatrix::zeros(self.r.nrows(), keep.len());
            for (col, &k) in keep.iter().enumerate() {
                basis.set_column(col, &u.column(k));
            }
            basis
        })
    }

    /// The P x P orthogonal projector I - R R^+, materialized on first use.
    pub fn proj_residual(&self) -> &DMatrix<f64> {
        self.proj_residual.get_or_init(|| {
            let p = self.r.nrows();
            let basis = self.range_basis();
            DMatrix::identity(p, p) - basis * basis.transpose()
        })
    }

    /// Applies I - R R^+ without materializing the P x P matrix.
    pub fn apply_proj_residual(&self, v: &DVector<f64>) -> DVector<f64> {
        let basis = self.range_basis();
        v - basis * (basis.transpose() * v)
    }

    /// Least-squares solve R w = v via the tolerance-based pseudoinverse.
    pub fn r_pinv_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let svd = self.svd();
        let u = svd.u.as_ref().expect("svd computed with u");
        let vt = svd.v_t.as_ref().expect("svd computed with v_t");
        let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let cutoff = self.pinv_tol * sigma_max;
        let mut w = DVector::zeros(self.r.ncols());
        for k in 0..svd.singular_values.len() {
            let sv = svd.singular_values[k];
            if sv > cutoff {
                let coeff = u.column(k).dot(v) / sv;
                w.axpy(coeff, &vt.row(k).transpose(), 1.0);
            }
        }
        w
    }
}

/// Builds R, S and the residual projector for a comparison set.
pub fn build_operators(
    x: &ItemEmbedding,
    omega: &ComparisonSet,
    pinv_tol: f64,
) -> Result<ComparisonOperators> {
    if omega.n_items() != x.n_items() {
        return Err(Error::DimensionMismatch {
            context: "comparison set vs item embedding",
            expected: x.n_items(),
            got: omega.n_items(),
        });
    }
    if !(pinv_tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "pinv_tol must be positive, got {pinv_tol}"
        )));
    }
    let p = omega.len();
    let d = x.dim();
    let mut r = DMatrix::zeros(p, d);
    let mut s = DMatrix::zeros(p, d);
    for (k, &(i, j)) in omega.pairs().iter().enumerate() {
        let xi = x.matrix().row(i);
        let xj = x.matrix().row(j);
        r.set_row(k, &(xi - xj));
        s.set_row(k, &(xi + xj));
    }
    Ok(ComparisonOperators {
        r,
        s,
        pinv_tol,
        range_basis: OnceLock::new(),
        proj_residual: OnceLock::new(),
        svd: OnceLock::new(),
    })
}

/// The u-independent part of the distance differences:
/// a_M[k] = (x_i + x_j)^T M (x_i - x_j), computed row by row.
pub fn a_of_m(ops: &ComparisonOperators, m: &MetricMatrix) -> Result<DVector<f64>> {
    if ops.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            context: "operators vs metric",
            expected: ops.dim(),
            got: m.dim(),
        });
    }
    let p = ops.n_comparisons();
    let mut a = DVector::zeros(p);
    for k in 0..p {
        let rk = ops.r.row(k).transpose();
        let sk = ops.s.row(k).transpose();
        a[k] = sk.dot(&(m.matrix() * rk));
    }
    Ok(a)
}

/// Max-norm residual between a given distance-difference vector and the
/// linear form a_M - 2 R M u. Vanishes when `delta` was generated by the
/// same (M, u); strictly positive once u departs from the generating point.
pub fn delta_linear_residual(
    ops: &ComparisonOperators,
    m: &MetricMatrix,
    u: &IdealPoint,
    delta: &DVector<f64>,
) -> Result<f64> {
    if delta.len() != ops.n_comparisons() {
        return Err(Error::DimensionMismatch {
            context: "distance differences vs operators",
            expected: ops.n_comparisons(),
            got: delta.len(),
        });
    }
    let a = a_of_m(ops, m)?;
    let rmu = &ops.r * (m.matrix() * u.as_vector());
    let resid = delta - (a - 2.0 * rmu);
    Ok(resid.abs().max())
}

/// Max-norm residual of the identity delta_Gamma = a_M - 2 R M u on a
/// noiseless instance; a self-test hook that vanishes for every (X, u, M).
pub fn delta_identity_residual(
    ops: &ComparisonOperators,
    m: &MetricMatrix,
    u: &IdealPoint,
    x: &ItemEmbedding,
    omega: &ComparisonSet,
) -> Result<f64> {
    let d = all_distances(x, u, m)?;
    let delta = delta_gamma(&d, omega)?;
    delta_linear_residual(ops, m, u, &delta)
}
