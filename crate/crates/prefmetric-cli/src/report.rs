//! Human-readable eigenstructure reports: eigenvalues in descending order,
//! each eigenvector rendered from its strongest feature loadings.

use anyhow::{bail, Result};
use prefmetric::geometry::MetricMatrix;

pub const DEFAULT_MIN_LOADING: f64 = 0.25;

/// Renders (eigenvalue, loading string) pairs in descending eigenvalue
/// order. Loadings are canonicalized so the largest-magnitude entry is
/// positive; terms below `min_loading` in absolute value are omitted (the
/// dominant term always appears). Example: `+0.909 gre_writing − 0.392 gpa`.
pub fn eigen_report(
    m_hat: &MetricMatrix,
    feature_names: &[String],
    min_loading: f64,
) -> Result<Vec<(f64, String)>> {
    if feature_names.len() != m_hat.dim() {
        bail!(
            "expected {} feature names, got {}",
            m_hat.dim(),
            feature_names.len()
        );
    }
    let d = m_hat.dim();
    let vecs = m_hat.eigenvectors();
    let vals = m_hat.eigenvalues();
    let mut out = Vec::with_capacity(d);
    for col in 0..d {
        let v = vecs.column(col);
        // Canonical sign: flip so the dominant loading is positive.
        let mut dominant = 0;
        for i in 1..d {
            if v[i].abs() > v[dominant].abs() {
                dominant = i;
            }
        }
        let flip = if v[dominant] < 0.0 { -1.0 } else { 1.0 };

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));

        let mut terms = String::new();
        for (rank, &i) in order.iter().enumerate() {
            let loading = flip * v[i];
            if rank > 0 && loading.abs() < min_loading {
                break;
            }
            if rank == 0 {
                terms.push_str(&format!("{:+.3} {}", loading, feature_names[i]));
            } else if loading >= 0.0 {
                terms.push_str(&format!(" + {:.3} {}", loading, feature_names[i]));
            } else {
                terms.push_str(&format!(" \u{2212} {:.3} {}", -loading, feature_names[i]));
            }
        }
        out.push((vals[col], terms));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn diagonal_metric_reports_unit_loadings() {
        let m = MetricMatrix::new(dmatrix![3.0, 0.0; 0.0, 1.0]).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let report = eigen_report(&m, &names, DEFAULT_MIN_LOADING).unwrap();
        assert_eq!(report.len(), 2);
        assert!((report[0].0 - 3.0).abs() < 1e-12);
        assert_eq!(report[0].1, "+1.000 a");
        assert!((report[1].0 - 1.0).abs() < 1e-12);
        assert_eq!(report[1].1, "+1.000 b");
    }

    fn metric_from_directions(v: [f64; 2], lam: [f64; 2]) -> MetricMatrix {
        use nalgebra::{DMatrix, DVector};
        let v = DVector::from_column_slice(&v);
        let v = &v / v.norm();
        let w = DVector::from_column_slice(&[-v[1], v[0]]);
        let m: DMatrix<f64> = lam[0] * &v * v.transpose() + lam[1] * &w * w.transpose();
        let m: DMatrix<f64> = 0.5 * (&m + m.transpose());
        MetricMatrix::new(m).unwrap()
    }

    #[test]
    fn two_term_rendering_and_sign_canonicalization() {
        // Metric whose top eigenvector has loadings (0.909, -0.417); the
        // dominant loading must come out positive regardless of the
        // eigensolver's sign choice.
        let m = metric_from_directions([0.909, -0.416_815_657_710_080_6], [5.0, 1.0]);
        let names = vec!["x".to_string(), "y".to_string()];
        let report = eigen_report(&m, &names, DEFAULT_MIN_LOADING).unwrap();
        assert!(report[0].1.starts_with("+0.909 x"), "{}", report[0].1);
        assert!(report[0].1.contains("\u{2212} 0.417 y"), "{}", report[0].1);
        // Second eigenvector: dominant term positive as well.
        assert!(report[1].1.starts_with('+'));
    }

    #[test]
    fn small_loadings_are_omitted() {
        // Eigenvector heavily dominated by one feature.
        let m = metric_from_directions([0.995, 0.0998743710662547], [4.0, 0.5]);
        let names = vec!["a".to_string(), "b".to_string()];
        let report = eigen_report(&m, &names, DEFAULT_MIN_LOADING).unwrap();
        assert_eq!(report[0].1, "+0.995 a");
    }

    #[test]
    fn name_count_must_match() {
        let m = MetricMatrix::identity(3);
        assert!(eigen_report(&m, &["a".to_string()], 0.25).is_err());
    }
}
