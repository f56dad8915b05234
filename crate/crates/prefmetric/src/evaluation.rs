//! Error metrics and statistical aggregation for estimation experiments:
//! ideal-point reconstruction error, weighted eigenstructure error,
//! ranking distances, and the interpolated median / quantile conventions
//! used when aggregating trials.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{IdealPoint, MetricMatrix};
use crate::solver::SolverStatus;

/// Per-trial metric row assembled by experiment harnesses.
#[derive(Debug, Clone)]
pub struct TrialMetrics {
    pub ur_error: f64,
    pub wer_error: f64,
    pub kendall_norm: f64,
    pub topk_fractions: BTreeMap<usize, f64>,
    pub solver_status: SolverStatus,
}

/// Ideal-point reconstruction error |u_hat - u|^2_M / |u|^2_M, measured in
/// the true metric norm. Rejects ideal points with zero metric norm.
pub fn ur_error(u_hat: &IdealPoint, u_true: &IdealPoint, m_true: &MetricMatrix) -> Result<f64> {
    if u_hat.dim() != m_true.dim() || u_true.dim() != m_true.dim() {
        return Err(Error::DimensionMismatch {
            context: "ideal points vs metric",
            expected: m_true.dim(),
            got: u_hat.dim().max(u_true.dim()),
        });
    }
    let m = m_true.matrix();
    let denom = u_true.as_vector().dot(&(m * u_true.as_vector()));
    if denom <= 0.0 {
        return Err(Error::InvalidInput(
            "true ideal point has zero metric norm".into(),
        ));
    }
    let diff = u_hat.as_vector() - u_true.as_vector();
    let num = diff.dot(&(m * &diff)).max(0.0);
    Ok(num / denom)
}

/// Weighted eigenstructure reconstruction error
/// |Lambda o |V^T V_hat| - Lambda|^2_F / |Lambda|^2_F,
/// with both eigendecompositions sorted descending and columns matched by
/// index. Insensitive to eigenvector sign and to the estimated eigenvalues.
pub fn wer_error(m_true: &MetricMatrix, m_hat: &MetricMatrix) -> Result<f64> {
    if m_true.dim() != m_hat.dim() {
        return Err(Error::DimensionMismatch {
            context: "true vs estimated metric",
            expected: m_true.dim(),
            got: m_hat.dim(),
        });
    }
    let d = m_true.dim();
    let lambda = m_true.eigenvalues();
    let denom: f64 = lambda.iter().map(|l| l * l).sum();
    if denom <= 0.0 {
        return Err(Error::InvalidInput("true metric has zero eigenvalues".into()));
    }
    let overlap = m_true.eigenvectors().transpose() * m_hat.eigenvectors();
    // Lambda is diagonal, so only diagonal entries of the product survive.
    let mut num = 0.0;
    for i in 0..d {
        let r = lambda[i] * (overlap[(i, i)].abs() - 1.0);
        num += r * r;
    }
    Ok(num / denom)
}

/// Normalized Kendall tau distance between two rankings: the fraction of
/// discordant item pairs. Both inputs must be permutations of 0..n-1.
pub fn kendall_tau_norm(rank_a: &[usize], rank_b: &[usize]) -> Result<f64> {
    let n = rank_a.len();
    if rank_b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "ranking lengths",
            expected: n,
            got: rank_b.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidInput(
            "rankings need at least two items".into(),
        ));
    }
    let pos_a = positions(rank_a)?;
    let pos_b = positions(rank_b)?;
    let mut discordant = 0usize;
    for x in 0..n {
        for y in (x + 1)..n {
            let da = pos_a[x] as isize - pos_a[y] as isize;
            let db = pos_b[x] as isize - pos_b[y] as isize;
            if da.signum() != db.signum() {
                discordant += 1;
            }
        }
    }
    Ok(discordant as f64 / (n * (n - 1) / 2) as f64)
}

fn positions(rank: &[usize]) -> Result<Vec<usize>> {
    let n = rank.len();
    let mut pos = vec![usize::MAX; n];
    for (p, &item) in rank.iter().enumerate() {
        if item >= n || pos[item] != usize::MAX {
            return Err(Error::InvalidInput(format!(
                "ranking is not a permutation of 0..{n}"
            )));
        }
        pos[item] = p;
    }
    Ok(pos)
}

/// Fraction of the true top-K items recovered in the estimated top K,
/// compared as sets.
pub fn topk_fraction(rank_est: &[usize], rank_true: &[usize], k: usize) -> Result<f64> {
    let n = rank_est.len();
    if rank_true.len() != n {
        return Err(Error::DimensionMismatch {
            context: "ranking lengths",
            expected: n,
            got: rank_true.len(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "top-K size {k} out of range for {n} items"
        )));
    }
    let est: std::collections::HashSet<usize> = rank_est[..k].iter().copied().collect();
    let hits = rank_true[..k].iter().filter(|i| est.contains(i)).count();
    Ok(hits as f64 / k as f64)
}

/// Interpolated median for samples on a grid with spacing `w`: the ordinary
/// median interpolated within its tied class,
/// (m - w/2) + w (n/2 - c_below) / n_m.
/// Falls back to the ordinary median when no sample ties with it (an even
/// count with two distinct middle values).
pub fn interpolated_median(samples: &[f64], w: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    if !(w > 0.0) {
        return Err(Error::InvalidInput(format!(
            "grid spacing must be positive, got {w}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let m = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let c_below = sorted.iter().filter(|&&v| v < m).count();
    let n_m = sorted.iter().filter(|&&v| v == m).count();
    if n_m == 0 {
        return Ok(m);
    }
    Ok((m - 0.5 * w) + w * (n as f64 / 2.0 - c_below as f64) / n_m as f64)
}

/// Linear-interpolation quantiles at rank h = (n - 1) q (0-based) on the
/// sorted samples.
pub fn quantiles(samples: &[f64], qs: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    if qs.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
        return Err(Error::InvalidInput("quantiles must lie in [0, 1]".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(qs
        .iter()
        .map(|&q| {
            let h = (n as f64 - 1.0) * q;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            let frac = h - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector, DMatrix, DVector};

    #[test]
    fn ur_error_trivial_values() {
        let m = MetricMatrix::new(dmatrix![2.0, 0.5; 0.5, 1.0]).unwrap();
        let u = IdealPoint::new(dvector![1.0, -0.5]).unwrap();
        assert!(ur_error(&u, &u, &m).unwrap() < 1e-15);
        let zero = IdealPoint::zeros(2);
        assert!((ur_error(&zero, &u, &m).unwrap() - 1.0).abs() < 1e-12);
        let twice = IdealPoint::new(2.0 * u.as_vector()).unwrap();
        assert!((ur_error(&twice, &u, &m).unwrap() - 1.0).abs() < 1e-12);
        assert!(ur_error(&u, &zero, &m).is_err());
    }

    #[test]
    fn ur_error_scale_invariant_in_metric() {
        let m = MetricMatrix::new(dmatrix![2.0, 0.5; 0.5, 1.0]).unwrap();
        let u = IdealPoint::new(dvector![1.0, -0.5]).unwrap();
        let u_hat = IdealPoint::new(dvector![0.8, -0.1]).unwrap();
        let base = ur_error(&u_hat, &u, &m).unwrap();
        let scaled = ur_error(&u_hat, &u, &m.scaled(7.3).unwrap()).unwrap();
        assert!((base - scaled).abs() < 1e-12);
    }

    #[test]
    fn wer_error_scaled_metric_is_zero() {
        let m = MetricMatrix::new(dmatrix![2.0, 0.7; 0.7, 1.0]).unwrap();
        for c in [1e-3, 1.0, 7.3, 1e3] {
            let w = wer_error(&m, &m.scaled(c).unwrap()).unwrap();
            assert!(w < 1e-18, "scale {c}: wer {w}");
        }
    }

    #[test]
    fn wer_error_swapped_eigenvectors_is_one() {
        // True metric diag(3, 1): V = I. Estimate with swapped eigenvectors:
        // diag(1, 3) has descending-order eigenvectors e2, e1.
        let m_true = MetricMatrix::new(dmatrix![3.0, 0.0; 0.0, 1.0]).unwrap();
        let m_hat = MetricMatrix::new(dmatrix![1.0, 0.0; 0.0, 3.0]).unwrap();
        let w = wer_error(&m_true, &m_hat).unwrap();
        assert!((w - 1.0).abs() < 1e-12, "wer {w}");
    }

    #[test]
    fn wer_error_ignores_estimated_eigenvalues() {
        let v = DMatrix::from_columns(&[
            DVector::from_vec(vec![3.0 / 5.0, 4.0 / 5.0]),
            DVector::from_vec(vec![-4.0 / 5.0, 3.0 / 5.0]),
        ]);
        let lam_true = DVector::from_vec(vec![5.0, 2.0]);
        let lam_hat = DVector::from_vec(vec![11.0, 0.25]);
        let m_true =
            MetricMatrix::new(&v * DMatrix::from_diagonal(&lam_true) * v.transpose()).unwrap();
        let m_hat =
            MetricMatrix::new(&v * DMatrix::from_diagonal(&lam_hat) * v.transpose()).unwrap();
        assert!(wer_error(&m_true, &m_hat).unwrap() < 1e-12);
    }

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall_tau_norm(&[0, 1, 2], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(kendall_tau_norm(&[0, 1, 2, 3], &[3, 2, 1, 0]).unwrap(), 1.0);
        let d = kendall_tau_norm(&[0, 1, 2], &[0, 2, 1]).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
        assert!(kendall_tau_norm(&[0, 1], &[0, 1, 2]).is_err());
        assert!(kendall_tau_norm(&[0, 0, 1], &[0, 1, 2]).is_err());
    }

    #[test]
    fn kendall_metric_axioms_spot_check() {
        use rand::prelude::*;
        use rand::seq::SliceRandom;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..25 {
            let n = rng.random_range(3..8);
            let mut a: Vec<usize> = (0..n).collect();
            let mut b: Vec<usize> = (0..n).collect();
            let mut c: Vec<usize> = (0..n).collect();
            a.shuffle(&mut rng);
            b.shuffle(&mut rng);
            c.shuffle(&mut rng);
            let ab = kendall_tau_norm(&a, &b).unwrap();
            let ba = kendall_tau_norm(&b, &a).unwrap();
            assert_eq!(ab, ba);
            let ac = kendall_tau_norm(&a, &c).unwrap();
            let cb = kendall_tau_norm(&c, &b).unwrap();
            assert!(ab <= ac + cb + 1e-15);
            assert_eq!(kendall_tau_norm(&a, &a).unwrap(), 0.0);
        }
    }

    #[test]
    fn topk_examples() {
        let a = [0, 1, 2, 3, 4];
        assert_eq!(topk_fraction(&a, &a, 3).unwrap(), 1.0);
        let b = [3, 4, 0, 1, 2];
        assert_eq!(topk_fraction(&a, &b, 2).unwrap(), 0.0);
        // est top-2 {0, 2}, true top-2 {0, 1}: overlap 1 of 2.
        let est = [0, 2, 1, 3, 4];
        let truth = [0, 1, 2, 3, 4];
        assert_eq!(topk_fraction(&est, &truth, 2).unwrap(), 0.5);
        // symmetric in its arguments
        assert_eq!(
            topk_fraction(&est, &truth, 2).unwrap(),
            topk_fraction(&truth, &est, 2).unwrap()
        );
        assert!(topk_fraction(&a, &b, 6).is_err());
    }

    #[test]
    fn interpolated_median_examples() {
        assert_eq!(interpolated_median(&[0.3], 0.1).unwrap(), 0.3);
        let v = interpolated_median(&[0.0, 1.0, 1.0, 1.0], 1.0).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-15);
        for w in [0.05, 0.2, 1.0] {
            let v = interpolated_median(&[0.4, 0.4, 0.4], w).unwrap();
            assert!((v - 0.4).abs() < 1e-15);
        }
        // No tie at the median: equals the ordinary median.
        let v = interpolated_median(&[1.0, 2.0, 3.0], 0.5).unwrap();
        assert_eq!(v, 2.0);
        let v = interpolated_median(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap();
        assert_eq!(v, 2.5);
        assert!(interpolated_median(&[], 1.0).is_err());
    }

    #[test]
    fn interpolated_median_stays_within_range() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.random_range(1..12);
            let samples: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..=10) as f64) / 10.0)
                .collect();
            let v = interpolated_median(&samples, 0.1).unwrap();
            let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(v >= lo - 0.05 - 1e-12 && v <= hi + 0.05 + 1e-12);
        }
    }

    #[test]
    fn quantile_examples() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantiles(&s, &[0.5]).unwrap()[0], 2.5);
        assert_eq!(quantiles(&s, &[0.0]).unwrap()[0], 1.0);
        assert_eq!(quantiles(&s, &[1.0]).unwrap()[0], 4.0);
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantiles(&s, &[0.25]).unwrap()[0], 2.0);
        assert!(quantiles(&[], &[0.5]).is_err());
        assert!(quantiles(&s, &[1.5]).is_err());
    }
}
