//! Consensus splitting engine for the solver's convex programs.
//!
//! Problems are expressed as
//!
//! ```text
//! minimize  sum_i q_i z_i^2  +  sum_b h_b(G_b z + c_b)
//! ```
//!
//! where each `h_b` is a hinge sum, a weighted l1 norm, or the indicator of
//! the PSD cone in svec coordinates. Each block gets a consensus copy
//! `s_b = G_b z + c_b` with scaled dual `u_b`; the z-update is a cached
//! symmetric (Cholesky) solve, and every block prox has closed form.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg;

/// Nonsmooth term attached to one consensus block.
#[derive(Debug, Clone)]
pub(crate) enum ProxKind {
    /// sum_k max(0, 1 - y_k v_k)
    Hinge { labels: Vec<f64> },
    /// weight * |v|_1
    ScaledL1 { weight: f64 },
    /// indicator of {v = svec(M) : M >= 0}
    PsdCone { dim: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub gmat: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub kind: ProxKind,
}

#[derive(Debug, Clone)]
pub(crate) struct ConsensusProblem {
    /// Diagonal quadratic objective coefficients (the term q_i z_i^2).
    pub quad_diag: DVector<f64>,
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone)]
pub(crate) struct AdmmOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub rho: f64,
    pub adaptive_rho: bool,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub(crate) struct AdmmResult {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

// Tiny proximal regularizer keeping the z-system positive definite when the
// quadratic terms vanish and the stacked operator is rank deficient.
const SIGMA: f64 = 1e-9;
const CHECK_EVERY: usize = 5;
const ADAPT_EVERY: usize = 25;
const RHO_SCALE: f64 = 2.0;
const RHO_RATIO: f64 = 10.0;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;

fn prox(kind: &ProxKind, w: &DVector<f64>, rho: f64) -> DVector<f64> {
    match kind {
        ProxKind::Hinge { labels } => {
            let mut out = w.clone();
            for k in 0..w.len() {
                let y = labels[k];
                let margin = y * w[k];
                if margin < 1.0 - 1.0 / rho {
                    out[k] = w[k] + y / rho;
                } else if margin <= 1.0 {
                    out[k] = y;
                }
            }
            out
        }
        ProxKind::ScaledL1 { weight } => {
            let thresh = weight / rho;
            w.map(|v| v.signum() * (v.abs() - thresh).max(0.0))
        }
        ProxKind::PsdCone { dim } => {
            let mat = linalg::smat(w, *dim);
            let (vecs, mut vals) = linalg::sym_eigen_desc(&mat);
            for v in vals.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            let clipped = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
            linalg::svec(&(0.5 * (&clipped + clipped.transpose())))
        }
    }
}

fn factor(
    quad_diag: &DVector<f64>,
    gram: &DMatrix<f64>,
    rho: f64,
) -> nalgebra::Cholesky<f64, nalgebra::Dyn> {
    let n = quad_diag.len();
    let mut h = rho * gram;
    for i in 0..n {
        h[(i, i)] += 2.0 * quad_diag[i] + SIGMA;
    }
    nalgebra::Cholesky::new(h).expect("z-update system must be positive definite")
}

/// Runs the splitting iteration. `on_iterate` observes every primal iterate
/// (including the initial point as iteration 0) so callers can track a merit
/// sequence and retain the best feasible point.
pub(crate) fn solve<F>(
    problem: &ConsensusProblem,
    opts: &AdmmOptions,
    mut on_iterate: F,
) -> AdmmResult
where
    F: FnMut(usize, &DVector<f64>),
{
    let n = problem.quad_diag.len();
    let blocks = &problem.blocks;

    let gram = {
        let mut gram = DMatrix::zeros(n, n);
        for b in blocks {
            gram += b.gmat.transpose() * &b.gmat;
        }
        gram
    };

    let mut rho = opts.rho;
    let mut chol = factor(&problem.quad_diag, &gram, rho);

    let mut z = match opts.seed {
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
        }
        None => DVector::zeros(n),
    };

    let mut s: Vec<DVector<f64>> = blocks
        .iter()
        .map(|b| &b.gmat * &z + &b.offset)
        .collect();
    let mut u: Vec<DVector<f64>> = blocks
        .iter()
        .map(|b| DVector::zeros(b.gmat.nrows()))
        .collect();
    let mut s_snapshot = s.clone();

    on_iterate(0, &z);

    let mut primal_residual = f64::INFINITY;
    let mut dual_residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    for t in 1..=opts.max_iters {
        iterations = t;

        // z-update: ridge least squares against the consensus targets.
        let mut rhs = DVector::zeros(n);
        for (b, (sb, ub)) in blocks.iter().zip(s.iter().zip(u.iter())) {
            rhs += b.gmat.transpose() * (sb - ub - &b.offset);
        }
        rhs *= rho;
        z = chol.solve(&rhs);

        // Snapshot one iteration ahead of each residual check so the dual
        // residual measures a single-step change.
        if (t + 1) % CHECK_EVERY == 0 {
            s_snapshot.clone_from(&s);
        }

        // Block prox + dual updates.
        for (idx, b) in blocks.iter().enumerate() {
            let v = &b.gmat * &z + &b.offset;
            let w = &v + &u[idx];
            let s_new = prox(&b.kind, &w, rho);
            u[idx] += &v - &s_new;
            s[idx] = s_new;
        }

        on_iterate(t, &z);

        let at_check = t % CHECK_EVERY == 0 || t == opts.max_iters;
        if at_check {
            let mut pri_sq = 0.0;
            let mut v_norm_sq = 0.0;
            let mut s_norm_sq = 0.0;
            let mut dual_vec = DVector::zeros(n);
            let mut dual_ref = DVector::zeros(n);
            for (idx, b) in blocks.iter().enumerate() {
                let v = &b.gmat * &z + &b.offset;
                pri_sq += (&v - &s[idx]).norm_squared();
                v_norm_sq += v.norm_squared();
                s_norm_sq += s[idx].norm_squared();
                dual_vec += b.gmat.transpose() * (&s[idx] - &s_snapshot[idx]);
                dual_ref += b.gmat.transpose() * &u[idx];
            }
            let pri_scale = f64::max(1.0, f64::max(v_norm_sq.sqrt(), s_norm_sq.sqrt()));
            primal_residual = pri_sq.sqrt() / pri_scale;
            let dual_scale = f64::max(1.0, (rho * dual_ref).norm());
            dual_residual = rho * dual_vec.norm() / dual_scale;

            if primal_residual <= opts.tol && dual_residual <= opts.tol {
                converged = true;
                break;
            }

            if opts.adaptive_rho && t % ADAPT_EVERY == 0 && t < opts.max_iters {
                let mut new_rho = rho;
                if primal_residual > RHO_RATIO * dual_residual {
                    new_rho = (rho * RHO_SCALE).min(RHO_MAX);
                } else if dual_residual > RHO_RATIO * primal_residual {
                    new_rho = (rho / RHO_SCALE).max(RHO_MIN);
                }
                if new_rho != rho {
                    let scale = rho / new_rho;
                    for ub in u.iter_mut() {
                        *ub *= scale;
                    }
                    rho = new_rho;
                    chol = factor(&problem.quad_diag, &gram, rho);
                }
            }
        }
    }

    AdmmResult {
        primal_residual,
        dual_residual,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    // min z^2 + |v|_1 with v = z - 3: optimum where 2z = sign threshold:
    // subgradient: 2z + sign(z-3) = 0 around z in (0,3) gives 2z = 1, z = 0.5.
    #[test]
    fn scalar_l1_shrinkage() {
        let problem = ConsensusProblem {
            quad_diag: dvector![1.0],
            blocks: vec![Block {
                gmat: dmatrix![1.0],
                offset: dvector![-3.0],
                kind: ProxKind::ScaledL1 { weight: 1.0 },
            }],
        };
        let opts = AdmmOptions {
            max_iters: 2000,
            tol: 1e-10,
            rho: 1.0,
            adaptive_rho: true,
            seed: None,
        };
        let mut last = 0.0;
        let res = solve(&problem, &opts, |_, z| last = z[0]);
        assert!(res.converged);
        assert!((last - 0.5).abs() < 1e-6, "z = {last}");
    }

    // min 0.5 z^2 + max(0, 1 - z): hinge active until z = 1; balance at
    // z where z = 1 (kink) since derivative of quadratic there (1.0) equals
    // the hinge slope budget [0, 1]. Optimum z* = 1.
    #[test]
    fn scalar_hinge_quadratic() {
        let problem = ConsensusProblem {
            quad_diag: dvector![0.5],
            blocks: vec![Block {
                gmat: dmatrix![1.0],
                offset: dvector![0.0],
                kind: ProxKind::Hinge { labels: vec![1.0] },
            }],
        };
        let opts = AdmmOptions {
            max_iters: 5000,
            tol: 1e-10,
            rho: 1.0,
            adaptive_rho: true,
            seed: None,
        };
        let mut last = 0.0;
        let res = solve(&problem, &opts, |_, z| last = z[0]);
        assert!(res.converged);
        assert!((last - 1.0).abs() < 1e-5, "z = {last}");
    }

    #[test]
    fn psd_prox_clips_negative_eigenvalue() {
        let a = dmatrix![0.0, 1.0; 1.0, 0.0];
        let w = linalg::svec(&a);
        let out = prox(&ProxKind::PsdCone { dim: 2 }, &w, 1.0);
        let mat = linalg::smat(&out, 2);
        let expected = dmatrix![0.5, 0.5; 0.5, 0.5];
        assert!((&mat - &expected).abs().max() < 1e-12);
    }
}
