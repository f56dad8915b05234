//! End-to-end estimation pipelines: single-step estimation, alternating
//! refinement, the two Euclidean baselines, and the identifiability
//! predicate on the metric.

use crate::error::{Error, Result};
use crate::evaluation::ur_error;
use crate::geometry::{
    all_distances, ComparisonSet, DistanceVector, IdealPoint, ItemEmbedding, MetricMatrix,
    Observations,
};
use crate::operators::{build_operators, DEFAULT_PINV_TOL};
use crate::solver::{
    estimate_u, solve_alternating_step, solve_euclidean_distances, solve_euclidean_point,
    solve_single_step, RegularizationParams, SolverConfig, SolverSolution, SolverStatus,
};

/// Default ridge weight for the direct Euclidean ideal-point baseline.
pub const DEFAULT_EUCLID2_RIDGE: f64 = 1e-3;

/// A fitted model: metric, ideal point, the solver's distance variable, and
/// the induced ranking of items by ascending distance to the ideal point
/// under the fitted metric (ties broken by item index).
#[derive(Debug, Clone)]
pub struct Estimate {
    pub m_hat: MetricMatrix,
    pub u_hat: IdealPoint,
    pub d_hat: DistanceVector,
    pub ranking: Vec<usize>,
    pub solver_status: SolverStatus,
    /// Number of estimation stages run (1 for single-step).
    pub iters: usize,
}

/// Ranks items by ascending squared distance to `u` under `m`, breaking
/// ties by ascending item index.
pub fn rank_items(x: &ItemEmbedding, u: &IdealPoint, m: &MetricMatrix) -> Result<Vec<usize>> {
    let d = all_distances(x, u, m)?;
    let mut order: Vec<usize> = (0..x.n_items()).collect();
    order.sort_by(|&a, &b| d.value(a).total_cmp(&d.value(b)).then(a.cmp(&b)));
    Ok(order)
}

fn estimate_from_solution(
    x: &ItemEmbedding,
    omega: &ComparisonSet,
    solution: SolverSolution,
    alpha: f64,
    iters: usize,
) -> Result<Estimate> {
    let ops = build_operators(x, omega, DEFAULT_PINV_TOL)?;
    let u_hat = estimate_u(&solution.m_hat, &ops, &solution.d_hat, omega, alpha)?;
    let ranking = rank_items(x, &u_hat, &solution.m_hat)?;
    Ok(Estimate {
        m_hat: solution.m_hat,
        u_hat,
        d_hat: solution.d_hat,
        ranking,
        solver_status: solution.status,
        iters,
    })
}

/// Single-step pipeline: one joint (M, d) solve followed by the closed-form
/// ideal-point recovery.
pub fn fit_single_step(
    x: &ItemEmbedding,
    omega: &ComparisonSet,
    y: &Observations,
    params: &RegularizationParams,
    cfg: &SolverConfig,
) -> Result<Estimate> {
    let solution = solve_single_step(x, omega, y, params, cfg)?;
    estimate_from_solution(x, omega, solution, params.alpha, 1)
}

/// Stopping rule of the alternating refinement.
#[derive(Debug, Clone)]
pub enum StopMode {
    /// Stop when the change in ideal-point reconstruction error against the
    /// supplied ground truth falls below `tol`. Experiment-only.
    GroundTruthUrDelta {
        u_true: IdealPoint,
        m_true: MetricMatrix,
        tol: f64,
    },
    /// Stop when the l2 change between successive ideal-point estimates
    /// falls below `tol`. Usable without ground truth.
    EstimateDelta { tol: f64 },
}

impl StopMode {
    fn tol(&self) -> f64 {
        match self {
            StopMode::GroundTruthUrDelta { tol, .. } => *tol,
            StopMode::EstimateDelta { tol } => *tol,
        }
    }
}

/// Parameters of the alternating pipeline: one set of regularization
/// weights for the initialization stage, another for the refinement stages.
#[derive(Debug, Clone)]
pub struct AlternatingParams {
    pub init_params: RegularizationParams,
    pub iter_params: RegularizationParams,
    pub max_outer: usize,
    pub stop_mode: StopMode,
}

impl AlternatingParams {
    /// Default staged weights with the given stopping rule.
    pub fn with_stop_mode(stop_mode: StopMode) -> Self {
        Self {
            init_params: RegularizationParams::alternating_init_defaults(),
            iter_params: RegularizationParams::alternating_iter_defaults(),
            max_outer: 100,
            stop_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.init_params.validate()?;
        self.iter_params.validate()?;
        if self.max_outer < 1 {
            return Err(Error::InvalidInput("max_outer must be >= 1".into()));
        }
        if !(self.stop_mode.tol() > 0.0) {
            return Err(Error::InvalidInput("stop tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Per-stage progress record of the alternating pipeline.
#[derive(Debug, Clone)]
pub struct AlternatingStage {
    pub stage: usize,
    pub objective: f64,
    /// Reconstruction error against ground truth, when the stop mode
    /// carries one.
    pub ur_error: Option<f64>,
    /// l2 change from the previous ideal-point estimate (stages >= 1).
    pub u_change: Option<f64>,
    pub solver_status: SolverStatus,
}

/// Result of the alternating pipeline: the final estimate, the untouched
/// initialization-stage estimate, and the per-stage trace.
#[derive(Debug, Clone)]
pub struct AlternatingRun {
    pub estimate: Estimate,
    pub stage0: Estimate,
    pub trace: Vec<AlternatingStage>,
}

/// Alternating pipeline: a single-step initialization, then repeated
/// re-estimation of the metric around the previous ideal point followed by
/// the ideal-point update, until the stopping rule fires or `max_outer`
/// refinement stages have run.
pub fn fit_alternating(
    x: &ItemEmbedding,
    omega: &ComparisonSet,
    y: &Observations,
    alt: &AlternatingParams,
    cfg: &SolverConfig,
) -> Result<AlternatingRun> {
    alt.validate()?;

    let stage0_solution = solve_single_step(x, omega, y, &alt.init_params, cfg)?;
    let stage0_objective = stage0_solution.objective;
    let stage0 = estimate_from_solution(x, omega, stage0_solution, alt.init_params.alpha, 1)?;

    let ur_of = |u_hat: &IdealPoint| -> Result<Option<f64>> {
        match &alt.stop_mode {
            StopMode::GroundTruthUrDelta { u_true, m_true, .. } => {
                Ok(Some(ur_error(u_hat, u_true, m_true)?))
            }
            StopMode::EstimateDelta { .. } => Ok(None),
        }
    };

    let mut trace = vec![AlternatingStage {
        stage: 0,
        objective: stage0_objective,
        ur_error: ur_of(&stage0.u_hat)?,
        u_change: None,
        solver_status: stage0.solver_status,
    }];

    let mut current = stage0.clone();
    let ops = build_operators(x, omega, DEFAULT_PINV_TOL)?;

    for stage in 1..=alt.max_outer {
        let solution =
            solve_alternating_step(x, omega, y, &current.u_hat, &alt.iter_params, cfg)?;
        let u_hat = estimate_u(
            &solution.m_hat,
            &ops,
            &solution.d_hat,
            omega,
            alt.iter_params.alpha,
        )?;
        let u_change = (u_hat.as_vector() - current.u_hat.as_vector()).norm();
        let ur = ur_of(&u_hat)?;
        let prev_ur = trace.last().and_then(|s| s.ur_error);

        let ranking = rank_items(x, &u_hat, &solution.m_hat)?;
        current = Estimate {
            m_hat: solution.m_hat,
            u_hat,
            d_hat: solution.d_hat,
            ranking,
            solver_status: solution.status,
            iters: stage + 1,
        };
        trace.push(AlternatingStage {
            stage,
            objective: solution.objective,
            ur_error: ur,
            u_change: Some(u_change),
            solver_status: solution.status,
        });

        let stop = match &alt.stop_mode {
            StopMode::GroundTruthUrDelta { tol, .. } => match (prev_ur, ur) {
                (Some(a), Some(b)) => (a - b).abs() < *tol,
                _ => false,
            },
            StopMode::EstimateDelta { tol } => u_change < *tol,
        };
        if stop {
            break;
        }
    }

    Ok(AlternatingRun {
        estimate: current,
        stage0,
        trace,
    })
}

/// Euclidean baseline: the single-step program reduced to distances only
/// (metric pinned to the identity), then the ideal-point recovery with the
/// identity metric.
pub fn fit_euclidean_alg1(
    x: &ItemEmbedding,
    omega: &ComparisonSet,
    y: &Observations,
    params: &RegularizationParams,
    cfg: &SolverConfig,
) -> Result<Estimate> {
    let solution = solve_euclidean_distances(x, omega, y, params, cfg)?;
    estimate_from_solution(x, omega, solution, params.alpha, 1)
}

/// Euclidean baseline: directly fit the ideal point by hinge loss on the
/// halfspace expansion |x_i|^2 - |x_j|^2 - 2 (x_i - x_j)^T u plus a ridge.
///
/// This reimplements the usual direct convex program for an ideal point
/// under a Euclidean metric; the margin constant 1 and the ridge default
/// [`DEFAULT_EUCLID2_RIDGE`] are implementation choices.
pub fn fit_euclidean_alg2(
    x: &ItemEmbedding,
    omega: &ComparisonSet,
    y: &Observations,
    lambda_ridge: f64,
    cfg: &SolverConfig,
) -> Result<IdealPoint> {
    let (u, _status, _obj) = solve_euclidean_point(x, omega, y, lambda_ridge, cfg)?;
    Ok(u)
}

/// Outcome of the identifiability predicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifiabilityReport {
    pub identifiable: bool,
    pub min_eig: f64,
}

/// The ideal point is identifiable under `m` exactly when the metric is
/// strictly positive definite; numerically, when the smallest eigenvalue
/// clears `tol` relative to the largest.
pub fn identifiability_check(m: &MetricMatrix, tol: f64) -> IdentifiabilityReport {
    let min_eig = m.min_eigenvalue();
    let max_eig = m.max_eigenvalue();
    IdentifiabilityReport {
        identifiable: min_eig > tol * max_eig.max(0.0),
        min_eig,
    }
}
