//! Assembly of the estimation programs into consensus form.
//!
//! The decision variable is `z = [svec(M); d]` (or just `d`, or just `u`
//! for the Euclidean baselines). Slack variables are eliminated before
//! solving: for fixed (M, d) the optimal slack is exactly the absolute
//! constraint value, so the two-sided slack constraint plus the weighted
//! slack l1 norm collapse to a weighted l1 penalty on the constraint
//! expression. Solutions report the recovered slack |A(M, d)|, which is
//! feasible by construction.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{ComparisonSet, IdealPoint, Observations};
use crate::linalg;
use crate::operators::ComparisonOperators;
use crate::solver::admm::{Block, ConsensusProblem, ProxKind};
use crate::solver::RegularizationParams;

/// A consensus problem plus the layout metadata needed to interpret and
/// feasibilize its iterates.
pub(crate) struct Assembled {
    pub problem: ConsensusProblem,
    /// Location of the svec(M) coordinates as (offset, matrix dim).
    pub psd_span: Option<(usize, usize)>,
}

/// Dense P x N difference-selection operator: row k has +1 at i_k and -1 at j_k.
pub(crate) fn q_matrix(omega: &ComparisonSet) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(omega.len(), omega.n_items());
    for (k, &(i, j)) in omega.pairs().iter().enumerate() {
        q[(k, i)] = 1.0;
        q[(k, j)] = -1.0;
    }
    q
}

/// Rows map svec(M) to diag(S M R^T): row k = svec(sym(s_k r_k^T)).
fn k_matrix(ops: &ComparisonOperators) -> DMatrix<f64> {
    let p = ops.n_comparisons();
    let d = ops.dim();
    let q = linalg::svec_len(d);
    let mut k_mat = DMatrix::zeros(p, q);
    for k in 0..p {
        let r = ops.r().row(k);
        let s = ops.s().row(k);
        let mut idx = 0;
        for col in 0..d {
            for row in 0..=col {
                k_mat[(k, idx)] = if row == col {
                    s[row] * r[row]
                } else {
                    (s[row] * r[col] + s[col] * r[row]) / linalg::SQRT_2
                };
                idx += 1;
            }
        }
    }
    k_mat
}

/// Rows map svec(M) to 2 R M u for a fixed u: row k = svec(r_k u^T + u r_k^T).
fn fixed_u_matrix(ops: &ComparisonOperators, u: &IdealPoint) -> DMatrix<f64> {
    let p = ops.n_comparisons();
    let d = ops.dim();
    let q = linalg::svec_len(d);
    let uv = u.as_vector();
    let mut t_mat = DMatrix::zeros(p, q);
    for k in 0..p {
        let r = ops.r().row(k);
        let mut idx = 0;
        for col in 0..d {
            for row in 0..=col {
                t_mat[(k, idx)] = if row == col {
                    2.0 * r[row] * uv[row]
                } else {
                    linalg::SQRT_2 * (r[row] * uv[col] + r[col] * uv[row])
                };
                idx += 1;
            }
        }
    }
    t_mat
}

fn hstack(left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.view_mut((0, 0), left.shape()).copy_from(left);
    out.view_mut((0, left.ncols()), right.shape()).copy_from(right);
    out
}

/// Which constraint couples M and d.
pub(crate) enum MetricConstraint<'a> {
    /// (I - R R^+)(diag(S M R^T) - Q d), the single-step form.
    Projected,
    /// diag(S M R^T) - Q d - 2 R M u_prev, the alternating form.
    FixedU(&'a IdealPoint),
}

/// Assembles the joint (M, d) program with hinge data term, weighted slack
/// penalty on the chosen constraint, and PSD cone block.
pub(crate) fn metric_problem(
    ops: &ComparisonOperators,
    omega: &ComparisonSet,
    y: &Observations,
    params: &RegularizationParams,
    constraint: MetricConstraint<'_>,
) -> Assembled {
    let d = ops.dim();
    let n = omega.n_items();
    let q_len = linalg::svec_len(d);
    let n_vars = q_len + n;

    let q_mat = q_matrix(omega);
    let k_mat = k_matrix(ops);

    let mut quad_diag = DVector::zeros(n_vars);
    for i in 0..q_len {
        quad_diag[i] = params.gamma2;
    }
    for i in 0..n {
        quad_diag[q_len + i] = params.gamma3;
    }

    // Hinge on Q d.
    let hinge_g = hstack(&DMatrix::zeros(omega.len(), q_len), &q_mat);

    // Weighted l1 on the constraint expression.
    let slack_g = match constraint {
        MetricConstraint::Projected => {
            let basis = ops.range_basis();
            let proj = |m: &DMatrix<f64>| m - basis * (basis.transpose() * m);
            hstack(&proj(&k_mat), &(-proj(&q_mat)))
        }
        MetricConstraint::FixedU(u_prev) => {
            let t_mat = fixed_u_matrix(ops, u_prev);
            hstack(&(&k_mat - &t_mat), &(-&q_mat))
        }
    };

    // PSD cone on svec(M).
    let psd_g = hstack(
        &DMatrix::identity(q_len, q_len),
        &DMatrix::zeros(q_len, n),
    );

    Assembled {
        problem: ConsensusProblem {
            quad_diag,
            blocks: vec![
                Block {
                    gmat: hinge_g,
                    offset: DVector::zeros(omega.len()),
                    kind: ProxKind::Hinge {
                        labels: y.values().to_vec(),
                    },
                },
                Block {
                    gmat: slack_g,
                    offset: DVector::zeros(omega.len()),
                    kind: ProxKind::ScaledL1 {
                        weight: params.gamma1,
                    },
                },
                Block {
                    gmat: psd_g,
                    offset: DVector::zeros(q_len),
                    kind: ProxKind::PsdCone { dim: d },
                },
            ],
        },
        psd_span: Some((0, d)),
    }
}

/// Assembles the Euclidean distance-only program: hinge on Q d plus the
/// weighted slack penalty on (I - R R^+)(diag(S R^T) - Q d), with a ridge
/// on d. The metric is pinned to the identity so diag(S R^T) is constant.
pub(crate) fn euclidean_distance_problem(
    ops: &ComparisonOperators,
    omega: &ComparisonSet,
    y: &Observations,
    gamma1: f64,
    ridge: f64,
) -> Assembled {
    let n = omega.n_items();
    let p = omega.len();
    let q_mat = q_matrix(omega);

    // diag(S R^T): row-wise dot products, the identity-metric a_M.
    let mut a_eye = DVector::zeros(p);
    for k in 0..p {
        a_eye[k] = ops.s().row(k).dot(&ops.r().row(k));
    }

    let basis = ops.range_basis();
    let proj_v = &a_eye - basis * (basis.transpose() * &a_eye);
    let proj_q = &q_mat - basis * (basis.transpose() * &q_mat);

    Assembled {
        problem: ConsensusProblem {
            quad_diag: DVector::from_element(n, ridge),
            blocks: vec![
                Block {
                    gmat: q_mat,
                    offset: DVector::zeros(p),
                    kind: ProxKind::Hinge {
                        labels: y.values().to_vec(),
                    },
                },
                Block {
                    gmat: -proj_q,
                    offset: proj_v,
                    kind: ProxKind::ScaledL1 { weight: gamma1 },
                },
            ],
        },
        psd_span: None,
    }
}

/// Assembles the direct ideal-point program: hinge on the halfspace
/// expansion |x_i|^2 - |x_j|^2 - 2 (x_i - x_j)^T u with a ridge on u.
pub(crate) fn euclidean_point_problem(
    ops: &ComparisonOperators,
    y: &Observations,
    ridge: f64,
) -> Assembled {
    let p = ops.n_comparisons();
    let mut a_eye = DVector::zeros(p);
    for k in 0..p {
        a_eye[k] = ops.s().row(k).dot(&ops.r().row(k));
    }
    Assembled {
        problem: ConsensusProblem {
            quad_diag: DVector::from_element(ops.dim(), ridge),
            blocks: vec![Block {
                gmat: -2.0 * ops.r(),
                offset: a_eye,
                kind: ProxKind::Hinge {
                    labels: y.values().to_vec(),
                },
            }],
        },
        psd_span: None,
    }
}

/// Replaces the svec(M) span of `z` with its PSD-cone projection; other
/// coordinates pass through.
pub(crate) fn feasible_point(assembled: &Assembled, z: &DVector<f64>) -> DVector<f64> {
    let mut zf = z.clone();
    if let Some((start, dim)) = assembled.psd_span {
        let q_len = linalg::svec_len(dim);
        let mvec = DVector::from_iterator(q_len, (0..q_len).map(|i| z[start + i]));
        let mat = linalg::smat(&mvec, dim);
        let (vecs, mut vals) = linalg::sym_eigen_desc(&mat);
        for v in vals.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let clipped = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        let clipped_vec = linalg::svec(&(0.5 * (&clipped + clipped.transpose())));
        for i in 0..q_len {
            zf[start + i] = clipped_vec[i];
        }
    }
    zf
}

/// Objective of the original program at a feasible point, plus the slack
/// vector recovered from the l1 block (if the problem has one).
pub(crate) fn feasible_objective(
    assembled: &Assembled,
    zf: &DVector<f64>,
) -> (f64, Option<DVector<f64>>) {
    let mut obj = 0.0;
    for i in 0..zf.len() {
        obj += assembled.problem.quad_diag[i] * zf[i] * zf[i];
    }
    let mut zeta = None;
    for block in &assembled.problem.blocks {
        let v = &block.gmat * zf + &block.offset;
        match &block.kind {
            ProxKind::Hinge { labels } => {
                for k in 0..v.len() {
                    obj += (1.0 - labels[k] * v[k]).max(0.0);
                }
            }
            ProxKind::ScaledL1 { weight } => {
                obj += weight * v.abs().sum();
                zeta = Some(v.abs());
            }
            ProxKind::PsdCone { .. } => {}
        }
    }
    (obj, zeta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ItemEmbedding, MetricMatrix};
    use crate::operators::{a_of_m, build_operators, DEFAULT_PINV_TOL};
    use nalgebra::dmatrix;
    use rand::prelude::*;

    #[test]
    fn k_matrix_reproduces_a_of_m() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let x = ItemEmbedding::new(DMatrix::from_fn(5, 3, |_, _| rng.random_range(-2.0..2.0)))
            .unwrap();
        let omega =
            ComparisonSet::new(vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], 5).unwrap();
        let ops = build_operators(&x, &omega, DEFAULT_PINV_TOL).unwrap();
        let l = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let g = l.transpose() * &l;
        let m = MetricMatrix::new(0.5 * (&g + g.transpose())).unwrap();
        let k = k_matrix(&ops);
        let via_svec = &k * linalg::svec(m.matrix());
        let direct = a_of_m(&ops, &m).unwrap();
        assert!((via_svec - direct).abs().max() < 1e-12);
    }

    #[test]
    fn fixed_u_matrix_reproduces_two_r_m_u() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let x = ItemEmbedding::new(DMatrix::from_fn(4, 2, |_, _| rng.random_range(-2.0..2.0)))
            .unwrap();
        let omega = ComparisonSet::new(vec![(0, 1), (1, 2), (2, 3)], 4).unwrap();
        let ops = build_operators(&x, &omega, DEFAULT_PINV_TOL).unwrap();
        let m_raw = dmatrix![1.5, 0.3; 0.3, 0.8];
        let m = MetricMatrix::new(m_raw).unwrap();
        let u = IdealPoint::new(nalgebra::dvector![0.4, -0.7]).unwrap();
        let t = fixed_u_matrix(&ops, &u);
        let via_svec = &t * linalg::svec(m.matrix());
        let direct = 2.0 * ops.r() * (m.matrix() * u.as_vector());
        assert!((via_svec - direct).abs().max() < 1e-12);
    }
}
