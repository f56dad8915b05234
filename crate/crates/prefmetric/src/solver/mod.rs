//! First-order solver for the convex semidefinite programs that estimate a
//! metric and a consistent set of squared distances from one-bit
//! comparisons, plus the closed-form ideal-point recovery.
//!
//! The programs are solved by consensus splitting (see [`admm`]): slack
//! variables are eliminated into a weighted l1 penalty, every nonsmooth
//! piece gets a closed-form prox, and the metric iterate is projected onto
//! the PSD cone. The merit sequence monitored for monotonicity is the
//! best-so-far objective of the original program evaluated at feasibilized
//! iterates (PSD-projected metric, slack set to the exact constraint
//! violation); it is recorded in [`SolverSolution::objective_trace`].

mod admm;
mod problems;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{
    ComparisonSet, DistanceVector, IdealPoint, ItemEmbedding, MetricMatrix, Observations,
};
use crate::linalg;
use crate::operators::{build_operators, ComparisonOperators, DEFAULT_PINV_TOL};

/// Weights of the regularization terms in the estimation programs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationParams {
    /// Weight of the slack l1 norm. Must be positive.
    pub gamma1: f64,
    /// Weight of the squared Frobenius norm of the metric.
    pub gamma2: f64,
    /// Weight of the squared l2 norm of the distance vector.
    pub gamma3: f64,
    /// Ridge weight in the closed-form ideal-point recovery.
    pub alpha: f64,
}

impl RegularizationParams {
    pub fn new(gamma1: f64, gamma2: f64, gamma3: f64, alpha: f64) -> Result<Self> {
        let p = Self {
            gamma1,
            gamma2,
            gamma3,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    /// Defaults for single-step estimation on synthetic sweeps.
    pub fn single_step_defaults() -> Self {
        Self {
            gamma1: 2.0,
            gamma2: 0.002,
            gamma3: 0.001,
            alpha: 1.0,
        }
    }

    /// Defaults for the initialization stage of alternating estimation.
    pub fn alternating_init_defaults() -> Self {
        Self {
            gamma1: 2.0,
            gamma2: 0.002,
            gamma3: 0.0001,
            alpha: 1.0,
        }
    }

    /// Defaults for the refinement stages of alternating estimation.
    pub fn alternating_iter_defaults() -> Self {
        Self {
            gamma1: 2.0 / 3.0,
            gamma2: 1.0 / 15.0,
            gamma3: 7.0 / 1500.0,
            alpha: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.gamma1, self.gamma2, self.gamma3, self.alpha]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidInput(
                "regularization parameters must be finite".into(),
            ));
        }
        if !(self.gamma1 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "gamma1 must be positive, got {}",
                self.gamma1
            )));
        }
        if self.gamma2 < 0.0 || self.gamma3 < 0.0 || self.alpha < 0.0 {
            return Err(Error::InvalidInput(
                "gamma2, gamma3 and alpha must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Penalty step policy of the splitting method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// Keep the penalty fixed at its configured value.
    Fixed,
    /// Rebalance the penalty when primal and dual residuals drift apart.
    #[default]
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub kkt_tol: f64,
    pub step_rule: StepRule,
    pub penalty_rho: f64,
    /// Seed for a randomized starting point; `None` starts from zero.
    pub seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            kkt_tol: 1e-6,
            step_rule: StepRule::Adaptive,
            penalty_rho: 1.0,
            seed: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidInput("max_iters must be >= 1".into()));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(Error::InvalidInput("kkt_tol must be positive".into()));
        }
        if !(self.penalty_rho > 0.0) {
            return Err(Error::InvalidInput("penalty_rho must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxIters,
    Infeasible,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverStatus::Converged => write!(f, "converged"),
            SolverStatus::MaxIters => write!(f, "max_iters"),
            SolverStatus::Infeasible => write!(f, "infeasible"),
        }
    }
}

/// Best feasible point found by a solve, with the terminal consensus
/// residuals of the splitting iteration.
#[derive(Debug, Clone)]
pub struct SolverSolution {
    pub m_hat: MetricMatrix,
    pub d_hat: DistanceVector,
    /// Recovered slack |A(M, d)|; nonnegative and exactly feasible.
    pub zeta_hat: DVector<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    /// Best-so-far feasible objective recorded at every iterate; the
    /// monitored merit sequence (non-increasing by construction).
    pub objective_trace: Vec<f64>,
}

/// Hinge loss sum_k max(0, 1 - y_k (d_i - d_j)).
pub fn hinge_loss(d: &DistanceVector, omega: &ComparisonSet, y: &Observations) -> Result<f64> {
    if y.len() != omega.len() {
        return Err(Error::DimensionMismatch {
            context: "observations vs comparison set",
            expected: omega.len(),
            got: y.len(),
        });
    }
    if omega.n_items() != d.len() {
        return Err(Error::DimensionMismatch {
            context: "distances vs comparison set",
            expected: omega.n_items(),
            got: d.len(),
        });
    }
    let mut loss = 0.0;
    for (k, &(i, j)) in omega.pairs().iter().enumerate() {
        let margin = y.values()[k] * (d.value(i) - d.value(j));
        loss += (1.0 - margin).max(0.0);
    }
    Ok(loss)
}

/// Frobenius-nearest PSD matrix: eigendecompose, clip negative eigenvalues
/// to zero, reconstruct. Rejects inputs that are not symmetric within
/// 1e-8 relative tolerance.
pub fn psd_project(a: &DMatrix<f64>) -> Result<MetricMatrix> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::InvalidInput(format!(
            "psd projection needs a square nonempty matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let tol = 1e-8 * f64::max(1.0, a.norm());
    let asym = linalg::asymmetry(a);
    if asym > tol {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tol,
        });
    }
    let (vecs, mut vals) = linalg::sym_eigen_desc(a);
    for v in vals.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(MetricMatrix::from_eigen(vecs, vals))
}

fn admm_options(cfg: &SolverConfig) -> admm::AdmmOptions {
    admm::AdmmOptions {
        max_iters: cfg.max_iters,
        tol: cfg.kkt_tol,
        rho: cfg.penalty_rho,
        adaptive_rho: cfg.step_rule == StepRule::Adaptive,
        seed: cfg.seed,
    }
}

struct RunOutcome {
    z_best: DVector<f64>,
    objective: f64,
    zeta: Option<DVector<f64>>,
    trace: Vec<f64>,
    admm: admm::AdmmResult,
}

fn run(assembled: &problems::Assembled, cfg: &SolverConfig) -> RunOutcome {
    let mut best: Option<(f64, DVector<f64>, Option<DVector<f64>>)> = None;
    let mut trace: Vec<f64> = Vec::new();
    let admm_res = admm::solve(&assembled.problem, &admm_options(cfg), |_t, z| {
        let zf = problems::feasible_point(assembled, z);
        let (obj, zeta) = problems::feasible_objective(assembled, &zf);
        if obj.is_finite() && best.as_ref().map_or(true, |(b, _, _)| obj < *b) {
            best = Some((obj, zf, zeta));
        }
        trace.push(best.as_ref().map_or(f64::INFINITY, |(b, _, _)| *b));
    });
    let (objective, z_best, zeta) = best.expect("at least one iterate observed");
    RunOutcome {
        z_best,
        objective,
        zeta,
        trace,
        admm: admm_res,
    }
}

fn validate_solve_inputs(
    x: &ItemEmbedding,
    omega: &ComparisonSet,
    y: &Observations,
    params: &RegularizationParams,
    cfg: &SolverConfig,
) -> Result<()> {
    params.validate()?;
    cfg.validate()?;
    if omega.is_empty() {
        return Err(Error::EmptyInput("comparison set"));
    }
    if omega.n_items() != x.n_items() {
        return Err(Error::DimensionMismatch {
            context: "comparison set vs item embedding",
            expected: x.n_items(),
            got: omega.n_items(),
        });
    }
    if y.len() != omega.len() {
        return Err(Error::DimensionMismatch {
            context: "observations vs comparison set",
            expected: omega.len(),
            got: y.len(),
        });
    }
    Ok(())
}

fn metric_solution(
    outcome: RunOutcome,
    dim: usize,
    n_items: usize,
    cfg: &SolverConfig,
) -> Result<SolverSolution> {
    let q_len = linalg::svec_len(dim);
    let m_vec = DVector::from_iterator(q_len, (0..q_len).map(|i| outcome.z_best[i]));
    let d_vec = DVector::from_iterator(n_items, (0..n_items).map(|i| outcome.z_best[q_len + i]));
    let m_hat = MetricMatrix::new(linalg::smat(&m_vec, dim))?;
    let status = if outcome.admm.converged {
        SolverStatus::Converged
    } else {
        SolverStatus::MaxIters
    };
    let _ = cfg;
    Ok(SolverSolution {
        m_hat,
        d_hat: DistanceVector::new(d_vec)?,
        zeta_hat: outcome.zeta.expect("metric programs have a slack block"),
        objective: outcome.objective,
        primal_residual: outcome.admm.primal_residual,
        dual_residual: outcome.admm.dual_residual,
        status,
        iterations: outcome.admm.iterations,
        objective_trace: outcome.trace,
    })
}

/// Single-step estimation: jointly fit a PSD metric, distances and slacks
/// so the projected constraint holds and the distance differences agree in
/// sign with the observations.
pub fn solve_single_step(
    x: &ItemEmbedding,
    omega: &ComparisonSet,
    y: &Observations,
    params: &RegularizationParams,
    cfg: &SolverConfig,
) -> Result<SolverSolution> {
    validate_solve_inputs(x, omega, y, params, cfg)?;
    let ops = build_operators(x, omega, DEFAULT_PINV_TOL)?;
    let assembled =
        problems::metric_problem(&ops, omega, y, params, problems::MetricConstraint::Projected);
    metric_solution(run(&assembled, cfg), x.dim(), x.n_items(), cfg)
}

/// Alternating refinement step: same objective, with the constraint
/// rewritten around a fixed previous ideal-point estimate.
pub fn solve_alternating_step(
    x: &ItemEmbedding,
    omega: &ComparisonSet,
    y: &Observations,
    u_prev: &IdealPoint,
    params: &RegularizationParams,
    cfg: &SolverConfig,
) -> Result<SolverSolution> {
    validate_solve_inputs(x, omega, y, params, cfg)?;
    if u_prev.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            context: "previous ideal point vs item embedding",
            expected: x.dim(),
            got: u_prev.dim(),
        });
    }
    let ops = build_operators(x, omega, DEFAULT_PINV_TOL)?;
    let assembled = problems::metric_problem(
        &ops,
        omega,
        y,
        params,
        problems::MetricConstraint::FixedU(u_prev),
    );
    metric_solution(run(&assembled, cfg), x.dim(), x.n_items(), cfg)
}

/// Euclidean baseline solve over distances only (metric pinned to the
/// identity). Returns the solution with `m_hat` set to the identity.
pub(crate) fn solve_euclidean_distances(
    x: &ItemEmbedding,
    omega: &ComparisonSet,
    y: &Observations,
    params: &RegularizationParams,
    cfg: &SolverConfig,
) -> Result<SolverSolution> {
    validate_solve_inputs(x, omega, y, params, cfg)?;
    let ops = build_operators(x, omega, DEFAULT_PINV_TOL)?;
    let assembled =
        problems::euclidean_distance_problem(&ops, omega, y, params.gamma1, params.gamma2);
    let outcome = run(&assembled, cfg);
    let status = if outcome.admm.converged {
        SolverStatus::Converged
    } else {
        SolverStatus::MaxIters
    };
    Ok(SolverSolution {
        m_hat: MetricMatrix::identity(x.dim()),
        d_hat: DistanceVector::new(outcome.z_best)?,
        zeta_hat: outcome.zeta.expect("distance program has a slack block"),
        objective: outcome.objective,
        primal_residual: outcome.admm.primal_residual,
        dual_residual: outcome.admm.dual_residual,
        status,
        iterations: outcome.admm.iterations,
        objective_trace: outcome.trace,
    })
}

/// Euclidean baseline solve directly for the ideal point via the halfspace
/// expansion of the distance differences.
pub(crate) fn solve_euclidean_point(
    x: &ItemEmbedding,
    omega: &ComparisonSet,
    y: &Observations,
    ridge: f64,
    cfg: &SolverConfig,
) -> Result<(IdealPoint, SolverStatus, f64)> {
    cfg.validate()?;
    if omega.is_empty() {
        return Err(Error::EmptyInput("comparison set"));
    }
    if y.len() != omega.len() {
        return Err(Error::DimensionMismatch {
            context: "observations vs comparison set",
            expected: omega.len(),
            got: y.len(),
        });
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::InvalidInput(format!(
            "ridge weight must be nonnegative and finite, got {ridge}"
        )));
    }
    let ops = build_operators(x, omega, DEFAULT_PINV_TOL)?;
    let assembled = problems::euclidean_point_problem(&ops, y, ridge);
    let outcome = run(&assembled, cfg);
    let status = if outcome.admm.converged {
        SolverStatus::Converged
    } else {
        SolverStatus::MaxIters
    };
    Ok((IdealPoint::new(outcome.z_best)?, status, outcome.objective))
}

/// Regularized closed-form ideal-point recovery:
/// u = 1/2 (M R^T R M + alpha I)^{-1} M R^T (a_M - Q d),
/// solved through a symmetric factorization.
pub fn estimate_u(
    m_hat: &MetricMatrix,
    ops: &ComparisonOperators,
    d_hat: &DistanceVector,
    omega: &ComparisonSet,
    alpha: f64,
) -> Result<IdealPoint> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!(
            "alpha must be nonnegative and finite, got {alpha}"
        )));
    }
    if ops.dim() != m_hat.dim() {
        return Err(Error::DimensionMismatch {
            context: "operators vs metric",
            expected: m_hat.dim(),
            got: ops.dim(),
        });
    }
    let a = crate::operators::a_of_m(ops, m_hat)?;
    let qd = crate::geometry::delta_gamma(d_hat, omega)?;
    let rhs_vec = a - qd;
    let m = m_hat.matrix();
    let rt_r = ops.r().transpose() * ops.r();
    let mut system = m * rt_r * m;
    for i in 0..system.nrows() {
        system[(i, i)] += alpha;
    }
    let rhs = 0.5 * (m * (ops.r().transpose() * rhs_vec));
    let chol = nalgebra::Cholesky::new(system).ok_or_else(|| {
        Error::SingularSystem("ideal-point system is not positive definite".into())
    })?;
    IdealPoint::new(chol.solve(&rhs))
}

/// Unregularized least-squares recovery
/// u = 1/2 M^+ R^+ (a_M - delta_Gamma) with tolerance-based pseudoinverses.
/// Invariant under joint positive scaling of M and delta_Gamma.
pub fn estimate_u_unregularized(
    m: &MetricMatrix,
    ops: &ComparisonOperators,
    delta_gamma_vec: &DVector<f64>,
) -> Result<IdealPoint> {
    if ops.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            context: "operators vs metric",
            expected: m.dim(),
            got: ops.dim(),
        });
    }
    if delta_gamma_vec.len() != ops.n_comparisons() {
        return Err(Error::DimensionMismatch {
            context: "distance differences vs operators",
            expected: ops.n_comparisons(),
            got: delta_gamma_vec.len(),
        });
    }
    let a = crate::operators::a_of_m(ops, m)?;
    let w = ops.r_pinv_apply(&(a - delta_gamma_vec));
    let u = 0.5
        * linalg::eigen_pinv_apply(m.eigenvectors(), m.eigenvalues(), ops.pinv_tol(), &w);
    IdealPoint::new(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn simple_omega(p: &[(usize, usize)], n: usize) -> ComparisonSet {
        ComparisonSet::new(p.to_vec(), n).unwrap()
    }

    #[test]
    fn hinge_loss_examples() {
        let omega = simple_omega(&[(0, 1)], 2);
        let y = Observations::new(vec![-1.0]).unwrap();
        let d = DistanceVector::new(dvector![0.0, 3.0]).unwrap();
        assert_eq!(hinge_loss(&d, &omega, &y).unwrap(), 0.0);
        let d = DistanceVector::new(dvector![3.0, 0.0]).unwrap();
        assert_eq!(hinge_loss(&d, &omega, &y).unwrap(), 4.0);
        let d = DistanceVector::new(dvector![1.0, 1.0]).unwrap();
        for label in [-1.0, 1.0] {
            let y = Observations::new(vec![label]).unwrap();
            assert_eq!(hinge_loss(&d, &omega, &y).unwrap(), 1.0);
        }
    }

    #[test]
    fn psd_project_examples() {
        let p = psd_project(&dmatrix![2.0, 0.0; 0.0, -1.0]).unwrap();
        assert!((p.matrix() - dmatrix![2.0, 0.0; 0.0, 0.0]).abs().max() < 1e-12);

        let already = dmatrix![2.0, 0.5; 0.5, 1.0];
        let p = psd_project(&already).unwrap();
        assert!((p.matrix() - &already).abs().max() < 1e-10);

        let p = psd_project(&dmatrix![0.0, 1.0; 1.0, 0.0]).unwrap();
        assert!((p.matrix() - dmatrix![0.5, 0.5; 0.5, 0.5]).abs().max() < 1e-12);

        assert!(psd_project(&dmatrix![0.0, 1.0; -1.0, 0.0]).is_err());
    }

    #[test]
    fn psd_project_idempotent_and_nonexpansive() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let raw = nalgebra::DMatrix::from_fn(4, 4, |_, _| rng.random_range(-2.0..2.0));
            let sym = 0.5 * (&raw + raw.transpose());
            let p1 = psd_project(&sym).unwrap();
            let p2 = psd_project(p1.matrix()).unwrap();
            assert!((p1.matrix() - p2.matrix()).abs().max() < 1e-10);

            let raw_b = nalgebra::DMatrix::from_fn(4, 4, |_, _| rng.random_range(-2.0..2.0));
            let sym_b = 0.5 * (&raw_b + raw_b.transpose());
            let q1 = psd_project(&sym_b).unwrap();
            let lhs = (p1.matrix() - q1.matrix()).norm();
            let rhs = (&sym - &sym_b).norm();
            assert!(lhs <= rhs + 1e-10);
        }
    }

    #[test]
    fn params_validation() {
        assert!(RegularizationParams::new(2.0, 0.002, 0.001, 1.0).is_ok());
        assert!(RegularizationParams::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(RegularizationParams::new(1.0, -0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn empty_comparisons_rejected() {
        let x = ItemEmbedding::new(dmatrix![1.0, 0.0; 0.0, 1.0]).unwrap();
        let omega = ComparisonSet::new(vec![], 2).unwrap();
        let y = Observations::new(vec![]).unwrap();
        let err = solve_single_step(
            &x,
            &omega,
            &y,
            &RegularizationParams::single_step_defaults(),
            &SolverConfig::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn estimate_u_zero_metric_gives_zero() {
        let x = ItemEmbedding::new(dmatrix![1.0, 0.0; 0.0, 1.0; 1.0, 1.0]).unwrap();
        let omega = simple_omega(&[(0, 1), (1, 2)], 3);
        let ops = build_operators(&x, &omega, DEFAULT_PINV_TOL).unwrap();
        let m = MetricMatrix::zeros(2);
        let d = DistanceVector::new(dvector![1.0, 2.0, 0.5]).unwrap();
        let u = estimate_u(&m, &ops, &d, &omega, 1.0).unwrap();
        assert!(u.as_vector().abs().max() < 1e-14);
    }

    #[test]
    fn estimate_u_unregularized_zero_rhs() {
        let x = ItemEmbedding::new(dmatrix![1.0, 0.0; 0.0, 1.0; 1.0, 1.0]).unwrap();
        let omega = simple_omega(&[(0, 1), (1, 2)], 3);
        let ops = build_operators(&x, &omega, DEFAULT_PINV_TOL).unwrap();
        let m = MetricMatrix::new(dmatrix![2.0, 0.3; 0.3, 1.0]).unwrap();
        let a = crate::operators::a_of_m(&ops, &m).unwrap();
        let u = estimate_u_unregularized(&m, &ops, &a).unwrap();
        assert!(u.as_vector().abs().max() < 1e-14);
    }
}
