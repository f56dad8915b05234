//! Small dense linear-algebra helpers shared across the crate: symmetric
//! vectorization, sorted symmetric eigendecomposition, and tolerance-based
//! pseudoinverse application.

use nalgebra::{DMatrix, DVector};

pub(crate) const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Length of the symmetric vectorization of a `d x d` matrix.
pub(crate) fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Symmetric vectorization with sqrt(2)-scaled off-diagonals, so that
/// `svec(A) . svec(B) = <A, B>_F` and `|svec(A)| = |A|_F` for symmetric
/// inputs. Entries are ordered column by column over the upper triangle.
pub(crate) fn svec(a: &DMatrix<f64>) -> DVector<f64> {
    let d = a.nrows();
    let mut out = DVector::zeros(svec_len(d));
    let mut idx = 0;
    for col in 0..d {
        for row in 0..=col {
            out[idx] = if row == col {
                a[(row, col)]
            } else {
                SQRT_2 * 0.5 * (a[(row, col)] + a[(col, row)])
            };
            idx += 1;
        }
    }
    out
}

/// Inverse of [`svec`].
pub(crate) fn smat(v: &DVector<f64>, d: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), svec_len(d));
    let mut out = DMatrix::zeros(d, d);
    let mut idx = 0;
    for col in 0..d {
        for row in 0..=col {
            if row == col {
                out[(row, col)] = v[idx];
            } else {
                let x = v[idx] / SQRT_2;
                out[(row, col)] = x;
                out[(col, row)] = x;
            }
            idx += 1;
        }
    }
    out
}

/// Maximum absolute difference between `a` and its transpose.
pub(crate) fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and eigenvector columns permuted to match.
pub(crate) fn sym_eigen_desc(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let d = a.nrows();
    let sym = 0.5 * (a + a.transpose());
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(d, d);
    let mut vals = DVector::zeros(d);
    for (k, &src) in order.iter().enumerate() {
        vals[k] = eig.eigenvalues[src];
        vecs.set_column(k, &eig.eigenvectors.column(src));
    }
    (vecs, vals)
}

/// Applies the Moore-Penrose pseudoinverse of a symmetric matrix given its
/// eigendecomposition, zeroing eigenvalues below `tol * max|lambda|`.
pub(crate) fn eigen_pinv_apply(
    vecs: &DMatrix<f64>,
    vals: &DVector<f64>,
    tol: f64,
    rhs: &DVector<f64>,
) -> DVector<f64> {
    let max_abs = vals.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let cutoff = tol * max_abs;
    let mut out = DVector::zeros(vecs.nrows());
    for k in 0..vals.len() {
        let lam = vals[k];
        if lam.abs() > cutoff {
            let coeff = vecs.column(k).dot(rhs) / lam;
            out.axpy(coeff, &vecs.column(k).into_owned(), 1.0);
        }
    }
    out
}
