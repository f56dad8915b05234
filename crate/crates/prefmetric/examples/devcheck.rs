// Temporary development probe (deleted before release).
use prefmetric::estimators::{
    fit_alternating, fit_euclidean_alg1, fit_euclidean_alg2, fit_single_step, rank_items,
    AlternatingParams, StopMode,
};
use prefmetric::evaluation::{topk_fraction, ur_error, wer_error};
use prefmetric::geometry::{all_distances, observe};
use prefmetric::solver::{RegularizationParams, SolverConfig};
use prefmetric::synthdata::{gen_instance, sample_comparisons, GenConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.get(1).map(|s| s.as_str()) == Some("alt") {
        alt_probe(&args[2..]);
        return;
    }
    let d: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100);
    let p: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(500);
    let seeds: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(5);

    let params = RegularizationParams::single_step_defaults();
    let cfg = SolverConfig::default();

    for seed in 0..seeds {
        let t0 = std::time::Instant::now();
        let inst = gen_instance(&GenConfig::new(d, n, seed)).unwrap();
        let omega = sample_comparisons(n, p, seed).unwrap();
        let d_true = all_distances(&inst.x, &inst.u_true, &inst.m_true).unwrap();
        let y = observe(&d_true, &omega).unwrap();

        let est = fit_single_step(&inst.x, &omega, &y, &params, &cfg).unwrap();
        let ur = ur_error(&est.u_hat, &inst.u_true, &inst.m_true).unwrap();
        let wer = wer_error(&inst.m_true, &est.m_hat).unwrap();
        let rank_true = rank_items(&inst.x, &inst.u_true, &inst.m_true).unwrap();
        let top10 = topk_fraction(&est.ranking, &rank_true, 10.min(n)).unwrap();

        let e1 = fit_euclidean_alg1(&inst.x, &omega, &y, &params, &cfg).unwrap();
        let ur_e1 = ur_error(&e1.u_hat, &inst.u_true, &inst.m_true).unwrap();
        let u2 = fit_euclidean_alg2(&inst.x, &omega, &y, 1e-3, &cfg).unwrap();
        let ur_e2 = ur_error(&u2, &inst.u_true, &inst.m_true).unwrap();

        println!(
            "seed {seed}: ur {ur:.4} wer {wer:.4} top10 {top10:.2} | e1 {ur_e1:.4} e2 {ur_e2:.4} | status {:?} iters {} in {:.1?}",
            est.solver_status, est.iters, t0.elapsed()
        );
    }
}

fn alt_probe(args: &[String]) {
    let d: usize = args.get(0).and_then(|s| s.parse().ok()).unwrap_or(5);
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let p: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100);
    let trials: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(5);
    let inst_seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0);

    let cfg = SolverConfig::default();
    let inst = gen_instance(&GenConfig::new(d, n, inst_seed)).unwrap();
    let d_true = all_distances(&inst.x, &inst.u_true, &inst.m_true).unwrap();

    for trial in 0..trials {
        let t0 = std::time::Instant::now();
        let omega = sample_comparisons(n, p, 1000 + trial).unwrap();
        let y = observe(&d_true, &omega).unwrap();
        let alt = AlternatingParams::with_stop_mode(StopMode::GroundTruthUrDelta {
            u_true: inst.u_true.clone(),
            m_true: inst.m_true.clone(),
            tol: 1e-3,
        });
        let run = fit_alternating(&inst.x, &omega, &y, &alt, &cfg).unwrap();
        let ur0 = run.trace[0].ur_error.unwrap();
        let urf = run.trace.last().unwrap().ur_error.unwrap();
        println!(
            "trial {trial}: stages {} ur0 {ur0:.4} -> {urf:.4} (impr {:.1}%) in {:.1?}",
            run.trace.len(),
            100.0 * (ur0 - urf) / ur0.max(1e-12),
            t0.elapsed()
        );
    }
}
