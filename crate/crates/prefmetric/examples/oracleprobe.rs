// Temporary development probe (deleted before release).
use prefmetric::geometry::{all_distances, observe};
use prefmetric::solver::{
    solve_alternating_step, RegularizationParams, SolverConfig, StepRule,
};
use prefmetric::synthdata::{gen_instance, sample_comparisons, GenConfig};
use prefmetric::test_oracle::{reference_best_objective, ReferenceForm};

fn main() {
    if std::env::args().nth(1).as_deref() == Some("sweep") {
        sweep();
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("seed18") {
        probe_seed18();
        return;
    }
    let seed = 8u64;
    let inst = gen_instance(&GenConfig::new(2, 6, seed)).unwrap();
    let omega = sample_comparisons(6, 8, seed).unwrap();
    let d_true = all_distances(&inst.x, &inst.u_true, &inst.m_true).unwrap();
    let y = observe(&d_true, &omega).unwrap();
    let params = RegularizationParams::alternating_iter_defaults();

    for s in [None, Some(1u64), Some(2), Some(3)] {
        let cfg = SolverConfig {
            max_iters: 200_000,
            kkt_tol: 1e-10,
            step_rule: StepRule::Adaptive,
            penalty_rho: 1.0,
            seed: s,
        };
        let sol = solve_alternating_step(&inst.x, &omega, &y, &inst.u_true, &params, &cfg).unwrap();
        println!(
            "admm seed {s:?}: obj {:.9} status {:?} iters {} pri {:.1e} dual {:.1e}",
            sol.objective, sol.status, sol.iterations, sol.primal_residual, sol.dual_residual
        );
    }

    {
        let cfg = SolverConfig {
            max_iters: 200_000,
            kkt_tol: 1e-10,
            step_rule: StepRule::Adaptive,
            penalty_rho: 1.0,
            seed: None,
        };
        let sol =
            solve_alternating_step(&inst.x, &omega, &y, &inst.u_true, &params, &cfg).unwrap();
        let cross = prefmetric::test_oracle::reference_objective_at(
            &inst.x,
            &omega,
            &y,
            &params,
            ReferenceForm::FixedU(&inst.u_true),
            sol.m_hat.matrix(),
            sol.d_hat.as_vector(),
        );
        println!(
            "admm obj {:.9} | oracle-evaluated at admm point: {cross:.9}",
            sol.objective
        );
    }

    for (restarts, iters) in [(20usize, 50_000usize), (10, 100_000), (5, 200_000)] {
        let r = reference_best_objective(
            &inst.x,
            &omega,
            &y,
            &params,
            ReferenceForm::FixedU(&inst.u_true),
            restarts,
            iters,
            seed,
        );
        println!("oracle {restarts}x{iters}: {r:.9}");
    }
}

fn probe_seed18() {
    let seed = 18u64;
    let d = 2 + (seed % 2) as usize;
    let n = 5 + (seed % 4) as usize;
    let p = (n * (n - 1) / 2).min(n + 4);
    let inst = gen_instance(&GenConfig::new(d, n, 1000 + seed)).unwrap();
    let omega = sample_comparisons(n, p, 1000 + seed).unwrap();
    let d_true = all_distances(&inst.x, &inst.u_true, &inst.m_true).unwrap();
    let y = observe(&d_true, &omega).unwrap();
    let params = RegularizationParams::single_step_defaults();
    let cfg = SolverConfig {
        max_iters: 100_000,
        kkt_tol: 1e-10,
        step_rule: StepRule::Adaptive,
        penalty_rho: 1.0,
        seed: None,
    };
    for s in [None, Some(4u64), Some(9)] {
        let cfg = SolverConfig { seed: s, ..cfg };
        let sol = prefmetric::solver::solve_single_step(&inst.x, &omega, &y, &params, &cfg)
            .unwrap();
        let cross = prefmetric::test_oracle::reference_objective_at(
            &inst.x,
            &omega,
            &y,
            &params,
            ReferenceForm::SingleStep,
            sol.m_hat.matrix(),
            sol.d_hat.as_vector(),
        );
        println!(
            "admm seed {s:?}: obj {:.9} cross-eval {cross:.9} status {:?} pri {:.1e} dual {:.1e}",
            sol.objective, sol.status, sol.primal_residual, sol.dual_residual
        );
    }
    let r_svd = {
        let mut r = nalgebra::DMatrix::zeros(p, d);
        for (k, &(i, j)) in omega.pairs().iter().enumerate() {
            r.set_row(k, &(inst.x.matrix().row(i) - inst.x.matrix().row(j)));
        }
        r.svd(false, false).singular_values
    };
    println!("singular values of R: {:?}", r_svd.as_slice());
}

// Worst-case agreement sweep over the acceptance-style instance family.
fn sweep() {
    let cfg = SolverConfig {
        max_iters: 60_000,
        kkt_tol: 1e-9,
        step_rule: StepRule::Adaptive,
        penalty_rho: 1.0,
        seed: None,
    };
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let d = 2 + (seed % 2) as usize;
        let n = 5 + (seed % 4) as usize;
        let p = (n * (n - 1) / 2).min(n + 4);
        let inst = gen_instance(&GenConfig::new(d, n, 1000 + seed)).unwrap();
        let omega = sample_comparisons(n, p, 1000 + seed).unwrap();
        let d_true = all_distances(&inst.x, &inst.u_true, &inst.m_true).unwrap();
        let y = observe(&d_true, &omega).unwrap();

        let params_ss = RegularizationParams::single_step_defaults();
        let sol = prefmetric::solver::solve_single_step(&inst.x, &omega, &y, &params_ss, &cfg)
            .unwrap();
        let oracle = reference_best_objective(
            &inst.x, &omega, &y, &params_ss, ReferenceForm::SingleStep, 20, 50_000, seed,
        );
        let gap = (sol.objective - oracle).abs() / oracle.abs().max(1e-6);
        println!(
            "seed {seed} D{d} N{n} P{p} single: admm {:.7} oracle {oracle:.7} relgap {gap:.2e}",
            sol.objective
        );
        worst = worst.max(gap);

        let params_alt = RegularizationParams::alternating_iter_defaults();
        let sol =
            solve_alternating_step(&inst.x, &omega, &y, &inst.u_true, &params_alt, &cfg).unwrap();
        let oracle = reference_best_objective(
            &inst.x,
            &omega,
            &y,
            &params_alt,
            ReferenceForm::FixedU(&inst.u_true),
            20,
            50_000,
            seed,
        );
        let gap = (sol.objective - oracle).abs() / oracle.abs().max(1e-6);
        println!(
            "seed {seed} D{d} N{n} P{p} altern: admm {:.7} oracle {oracle:.7} relgap {gap:.2e}",
            sol.objective
        );
        worst = worst.max(gap);
    }
    println!("worst relative gap: {worst:.3e}");
}
