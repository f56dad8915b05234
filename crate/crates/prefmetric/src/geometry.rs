//! Data model for preference observation: item embeddings, ideal points,
//! metric matrices, comparison sets, and the squared-distance observation
//! model built on them.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative tolerance for the symmetry check on metric matrices.
pub const METRIC_SYMMETRY_TOL: f64 = 1e-10;
/// Relative tolerance (against the max eigenvalue) below which a negative
/// eigenvalue still counts as positive semidefinite.
pub const METRIC_PSD_TOL: f64 = 1e-8;
/// Relative tolerance used to declare a comparison a tie.
pub const TIE_TOL: f64 = 1e-12;

/// Fixed, known embedding of N items in D-dimensional feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemEmbedding {
    items: DMatrix<f64>,
}

impl ItemEmbedding {
    /// Wraps an N x D matrix whose rows are item feature vectors.
    /// Requires N >= 2, D >= 1 and finite entries.
    pub fn new(items: DMatrix<f64>) -> Result<Self> {
        if items.nrows() < 2 {
            return Err(Error::InvalidInput(format!(
                "item embedding needs at least 2 items, got {}",
                items.nrows()
            )));
        }
        if items.ncols() < 1 {
            return Err(Error::InvalidInput("item embedding needs D >= 1".into()));
        }
        if items.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "item embedding contains non-finite entries".into(),
            ));
        }
        Ok(Self { items })
    }

    pub fn n_items(&self) -> usize {
        self.items.nrows()
    }

    pub fn dim(&self) -> usize {
        self.items.ncols()
    }

    /// Feature vector of item `i` as an owned column vector.
    pub fn item(&self, i: usize) -> DVector<f64> {
        self.items.row(i).transpose()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.items
    }
}

/// The latent most-preferred feature combination of a user.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealPoint {
    u: DVector<f64>,
}

impl IdealPoint {
    pub fn new(u: DVector<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::EmptyInput("ideal point"));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "ideal point contains non-finite entries".into(),
            ));
        }
        Ok(Self { u })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            u: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.u
    }
}

/// Symmetric positive semidefinite metric matrix with cached
/// eigendecomposition (eigenvalues sorted descending).
#[derive(Debug, Clone)]
pub struct MetricMatrix {
    m: DMatrix<f64>,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
}

impl MetricMatrix {
    /// Validates symmetry and positive semidefiniteness, then caches the
    /// eigendecomposition.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "metric must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "metric contains non-finite entries".into(),
            ));
        }
        let tol = METRIC_SYMMETRY_TOL * f64::max(1.0, m.norm());
        let asym = linalg::asymmetry(&m);
        if asym > tol {
            return Err(Error::NotSymmetric {
                asymmetry: asym,
                tol,
            });
        }
        let (eigvecs, eigvals) = linalg::sym_eigen_desc(&m);
        let max_eig = eigvals[0].max(0.0);
        let min_eig = eigvals[eigvals.len() - 1];
        if min_eig < -METRIC_PSD_TOL * max_eig.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd { min_eig });
        }
        Ok(Self {
            m,
            eigvecs,
            eigvals,
        })
    }

    /// Builds directly from an eigendecomposition known to be valid
    /// (orthonormal columns, nonnegative eigenvalues sorted descending).
    pub(crate) fn from_eigen(eigvecs: DMatrix<f64>, eigvals: DVector<f64>) -> Self {
        let m = &eigvecs * DMatrix::from_diagonal(&eigvals) * eigvecs.transpose();
        // Scrub rounding asymmetry from the triple product.
        let m = 0.5 * (&m + m.transpose());
        Self {
            m,
            eigvecs,
            eigvals,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
            eigvecs: DMatrix::identity(dim, dim),
            eigvals: DVector::from_element(dim, 1.0),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
            eigvecs: DMatrix::identity(dim, dim),
            eigvals: DVector::zeros(dim),
        }
    }

    /// The same metric scaled by `c > 0`; eigenvectors are unchanged.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidInput(format!(
                "scale factor must be positive and finite, got {c}"
            )));
        }
        Ok(Self {
            m: c * &self.m,
            eigvecs: self.eigvecs.clone(),
            eigvals: c * &self.eigvals,
        })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Eigenvector columns, ordered to match [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    /// Eigenvalues sorted in descending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigvals[0]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigvals[self.eigvals.len() - 1]
    }
}

/// Ordered comparison index pairs (i, j), 0-based, each ordered pair
/// appearing at most once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonSet {
    pairs: Vec<(usize, usize)>,
    n_items: usize,
}

impl ComparisonSet {
    pub fn new(pairs: Vec<(usize, usize)>, n_items: usize) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(pairs.len());
        for &(i, j) in &pairs {
            if i >= n_items || j >= n_items || i == j {
                return Err(Error::InvalidPair { i, j, n: n_items });
            }
            if !seen.insert((i, j)) {
                return Err(Error::DuplicatePair { i, j });
            }
        }
        Ok(Self { pairs, n_items })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// One-bit comparison outcomes, one of -1 or +1 per compared pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    y: Vec<f64>,
}

impl Observations {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidInput(
                "observations must be exactly +1 or -1".into(),
            ));
        }
        Ok(Self { y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }
}

/// Squared distances from every item to an ideal point. Entries are
/// nonnegative when produced from a PSD metric; when holding a solver's
/// free distance variable they may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceVector {
    d: DVector<f64>,
}

impl DistanceVector {
    pub fn new(d: DVector<f64>) -> Result<Self> {
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "distance vector contains non-finite entries".into(),
            ));
        }
        Ok(Self { d })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn value(&self, i: usize) -> f64 {
        self.d[i]
    }
}

/// Squared Mahalanobis distance (x - u)^T M (x - u). Nonnegative for PSD M;
/// rounding noise below zero is clamped.
pub fn mahalanobis_distance_sq(
    x: &DVector<f64>,
    u: &IdealPoint,
    m: &MetricMatrix,
) -> Result<f64> {
    if x.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            context: "item vector vs metric",
            expected: m.dim(),
            got: x.len(),
        });
    }
    if u.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            context: "ideal point vs metric",
            expected: m.dim(),
            got: u.dim(),
        });
    }
    let v = x - u.as_vector();
    let q = v.dot(&(m.matrix() * &v));
    Ok(q.max(0.0))
}

/// Squared Mahalanobis distances from every item to the ideal point.
pub fn all_distances(
    x: &ItemEmbedding,
    u: &IdealPoint,
    m: &MetricMatrix,
) -> Result<DistanceVector> {
    if x.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            context: "item embedding vs metric",
            expected: m.dim(),
            got: x.dim(),
        });
    }
    if u.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            context: "ideal point vs metric",
            expected: m.dim(),
            got: u.dim(),
        });
    }
    let mut d = DVector::zeros(x.n_items());
    for i in 0..x.n_items() {
        let v = x.item(i) - u.as_vector();
        d[i] = v.dot(&(m.matrix() * &v)).max(0.0);
    }
    DistanceVector::new(d)
}

/// Result of [`observe_detailed`]: the sign observations plus the number of
/// comparisons that were exact ties (resolved to +1 by convention).
#[derive(Debug, Clone)]
pub struct ObservationOutcome {
    pub y: Observations,
    pub tie_count: usize,
}

/// Observation model y_k = sign(d_i - d_j), reporting tie occurrences.
/// Ties (|d_i - d_j| <= TIE_TOL * max(1, d_i + d_j)) resolve to +1.
pub fn observe_detailed(d: &DistanceVector, omega: &ComparisonSet) -> Result<ObservationOutcome> {
    if omega.n_items() != d.len() {
        return Err(Error::DimensionMismatch {
            context: "distances vs comparison set",
            expected: omega.n_items(),
            got: d.len(),
        });
    }
    let mut y = Vec::with_capacity(omega.len());
    let mut tie_count = 0;
    for &(i, j) in omega.pairs() {
        let di = d.value(i);
        let dj = d.value(j);
        let gap = di - dj;
        if gap.abs() <= TIE_TOL * f64::max(1.0, di + dj) {
            tie_count += 1;
            y.push(1.0);
        } else {
            y.push(gap.signum());
        }
    }
    Ok(ObservationOutcome {
        y: Observations::new(y)?,
        tie_count,
    })
}

/// Observation model y_k = sign(d_i - d_j) with ties mapping to +1.
pub fn observe(d: &DistanceVector, omega: &ComparisonSet) -> Result<Observations> {
    observe_detailed(d, omega).map(|o| o.y)
}

/// Vector of squared-distance differences d_i - d_j over the compared
/// pairs, computed entrywise (the dense N x N difference matrix and its
/// row-selected Kronecker operator are never materialized).
pub fn delta_gamma(d: &DistanceVector, omega: &ComparisonSet) -> Result<DVector<f64>> {
    if omega.n_items() != d.len() {
        return Err(Error::DimensionMismatch {
            context: "distances vs comparison set",
            expected: omega.n_items(),
            got: d.len(),
        });
    }
    let mut out = DVector::zeros(omega.len());
    for (k, &(i, j)) in omega.pairs().iter().enumerate() {
        out[k] = d.value(i) - d.value(j);
    }
    Ok(out)
}
