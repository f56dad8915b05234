//! End-to-end harness tests: ingestion fixtures, experiment determinism and
//! aggregate recomputation, and the CLI round trip.

use std::path::{Path, PathBuf};

use prefmetric_cli::config::{parse_config, ExperimentKind};
use prefmetric_cli::experiment::{aggregate_rows, derive_seed, run_experiment};
use prefmetric_cli::ingest::{
    ingest_ranked, ingest_unranked, lor_score, verify_observations, Feature,
};
use prefmetric_cli::io::read_comparisons;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn unranked_fixture_exact_comparison_count() {
    let out = ingest_unranked(&fixture("unranked.csv"), (33, 33, 34), 7, &Feature::ALL).unwrap();
    assert_eq!(out.x.n_items(), 100);
    assert_eq!(out.omega.len(), 33 * (33 + 34) + 33 * 34);
    assert_eq!(out.omega.len(), 3333);
    assert!(out.y.values().iter().all(|&v| v == -1.0));
    verify_observations(&out.ordinals, &out.omega, &out.y).unwrap();
    // The three defective rows are dropped with reasons.
    assert_eq!(out.log.dropped.len(), 3);
    assert!(out
        .log
        .dropped
        .iter()
        .any(|(_, reason)| reason.contains("gpa 4.7")));
}

#[test]
fn unranked_subsampling_is_seeded() {
    let a = ingest_unranked(&fixture("unranked.csv"), (33, 33, 34), 7, &Feature::ALL).unwrap();
    let b = ingest_unranked(&fixture("unranked.csv"), (33, 33, 34), 7, &Feature::ALL).unwrap();
    let c = ingest_unranked(&fixture("unranked.csv"), (33, 33, 34), 8, &Feature::ALL).unwrap();
    assert_eq!(a.x.matrix(), b.x.matrix());
    assert_ne!(a.x.matrix(), c.x.matrix());
}

#[test]
fn unranked_feature_subset_selects_columns() {
    let out = ingest_unranked(
        &fixture("unranked.csv"),
        (33, 33, 34),
        7,
        &[Feature::GreVerbal, Feature::GreQuant],
    )
    .unwrap();
    assert_eq!(out.x.dim(), 2);
    assert_eq!(out.feature_names, vec!["gre_verbal", "gre_quant"]);
    // GRE columns are integers in range.
    for v in out.x.matrix().iter() {
        assert!(v.fract() == 0.0 && (130.0..=170.0).contains(v));
    }
}

#[test]
fn unranked_insufficient_candidates_is_an_error() {
    let err = ingest_unranked(&fixture("unranked.csv"), (200, 33, 34), 7, &Feature::ALL);
    assert!(err.is_err());
}

#[test]
fn unranked_lor_includes_perfect_letters() {
    let out = ingest_unranked(&fixture("unranked.csv"), (33, 33, 34), 0, &[Feature::Lor])
        .unwrap();
    let e3 = 3.0f64.exp();
    assert!((lor_score(&[3.0, 3.0, 3.0]).unwrap() - e3).abs() < 1e-9);
    for v in out.x.matrix().iter() {
        assert!((1.0 - 1e-12..=e3 + 1e-12).contains(v));
    }
}

#[test]
fn ranked_fixture_exact_comparison_count() {
    let out = ingest_ranked(&fixture("ranked.csv")).unwrap();
    assert_eq!(out.log.kept, 88);
    assert_eq!(out.log.dropped.len(), 1);
    assert_eq!(out.omega.len(), 2610);
    verify_observations(&out.ordinals, &out.omega, &out.y).unwrap();
    // Equal scores are never compared.
    for &(i, j) in out.omega.pairs() {
        assert_ne!(out.ordinals[i], out.ordinals[j]);
    }
}

#[test]
fn ranked_tiny_tied_scores() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.csv");
    std::fs::write(
        &path,
        "score,gre_writing,gre_verbal,gre_quant,gpa\n1,4,160,160,3.9\n2,3.5,150,150,3.2\n2,3,145,155,3.0\n",
    )
    .unwrap();
    let out = ingest_ranked(&path).unwrap();
    assert_eq!(out.omega.len(), 2);
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "score,gre_writing,gre_verbal,gre_quant,gpa\n").unwrap();
    assert!(ingest_ranked(&empty).is_err());
}

fn small_config(dir: &Path, kind: &str, extra: &str) -> prefmetric_cli::config::ExperimentConfig {
    let text = format!(
        "kind = {kind}\noutput = {}\nd_list = 2\nn = 14\np_list = 6,12\ntrials = 2\nk_list = 3\n\
         solver_max_iters = 3000\nkkt_tol = 1e-5\nbase_seed = 11\n{extra}",
        dir.display()
    );
    parse_config(&text, dir).unwrap()
}

#[test]
fn experiment_is_deterministic_modulo_wall_ms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_a = small_config(&dir.path().join("a"), "euclidean_comparison", "");
    let cfg_b = small_config(&dir.path().join("b"), "euclidean_comparison", "");
    let out_a = run_experiment(&cfg_a).unwrap();
    let out_b = run_experiment(&cfg_b).unwrap();

    let strip = |path: &Path| -> String {
        let text = std::fs::read_to_string(path).unwrap();
        text.lines()
            .map(|line| {
                let cut = line.rfind(',').unwrap();
                &line[..cut]
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&out_a.trial_path), strip(&out_b.trial_path));
    let agg_a = std::fs::read_to_string(&out_a.aggregate_path).unwrap();
    let agg_b = std::fs::read_to_string(&out_b.aggregate_path).unwrap();
    assert_eq!(agg_a, agg_b);
}

#[test]
fn experiment_smoke_row_count_and_aggregate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "euclidean_comparison", "");
    let out = run_experiment(&cfg).unwrap();
    // d_list(1) x p_list(2) x trials(2) x methods(3)
    assert_eq!(out.rows.len(), 12);

    // Aggregate file values recompute from the trial rows.
    let recomputed = aggregate_rows(&cfg, &out.rows).unwrap();
    let text = std::fs::read_to_string(&out.aggregate_path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("schema_version,kind,d,n,p,method,metric,center"));
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), recomputed.len());
    for (line, row) in body.iter().zip(recomputed.iter()) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[5], row.method);
        assert_eq!(fields[6], row.metric);
        assert_eq!(fields[7].parse::<f64>().unwrap(), row.center);
        assert_eq!(fields[9].parse::<f64>().unwrap(), row.q25);
        assert_eq!(fields[10].parse::<f64>().unwrap(), row.q75);
    }
}

#[test]
fn alternating_sweep_fixes_instance_and_emits_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "kind = alternating_sweep\noutput = {}\nd_list = 2\nn = 12\np_list = 8\ntrials = 2\n\
         k_list = 3\nsolver_max_iters = 2000\nkkt_tol = 1e-5\nmax_outer = 5\nbase_seed = 3\n",
        dir.path().display()
    );
    let cfg = parse_config(&text, dir.path()).unwrap();
    assert_eq!(cfg.kind, ExperimentKind::AlternatingSweep);
    let out = run_experiment(&cfg).unwrap();
    // 2 trials x 1 P x 2 methods (single_step stage-0 + alternating final)
    assert_eq!(out.rows.len(), 4);
    let methods: Vec<&str> = out.rows.iter().map(|r| r.method).collect();
    assert!(methods.contains(&"single_step"));
    assert!(methods.contains(&"alternating"));
    // Same instance across trials: seeds differ only in the comparison set.
    assert_ne!(out.rows[0].seed, out.rows[2].seed);
}

#[test]
fn seed_sharing_across_kinds() {
    // EuclideanComparison and SingleStepSweep share (base_seed, d, trial)
    // so their single_step rows coincide.
    let dir = tempfile::tempdir().unwrap();
    let cfg_e = small_config(&dir.path().join("e"), "euclidean_comparison", "");
    let cfg_s = small_config(&dir.path().join("s"), "single_step_sweep", "");
    let out_e = run_experiment(&cfg_e).unwrap();
    let out_s = run_experiment(&cfg_s).unwrap();
    let singles_e: Vec<_> = out_e
        .rows
        .iter()
        .filter(|r| r.method == "single_step")
        .map(|r| (r.p, r.trial, r.ur_error, r.wer_error))
        .collect();
    let singles_s: Vec<_> = out_s
        .rows
        .iter()
        .map(|r| (r.p, r.trial, r.ur_error, r.wer_error))
        .collect();
    assert_eq!(singles_e, singles_s);
}

#[test]
fn derive_seed_matches_documented_independence() {
    assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
    assert_eq!(derive_seed(9, &[4]), derive_seed(9, &[4]));
}

#[test]
fn cli_round_trip_synth_fit_eval_report() {
    let dir = tempfile::tempdir().unwrap();
    let inst_dir = dir.path().join("inst");
    let est_dir = dir.path().join("est");

    let code = prefmetric_cli::cli_main([
        "prefmetric",
        "synth",
        "--d",
        "2",
        "--n",
        "14",
        "--seed",
        "5",
        "--p",
        "24",
        "--out",
        inst_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (omega, _y) = read_comparisons(&inst_dir.join("comparisons.csv"), 14).unwrap();
    assert_eq!(omega.len(), 24);

    let code = prefmetric_cli::cli_main([
        "prefmetric",
        "fit",
        "--instance",
        inst_dir.to_str().unwrap(),
        "--comparisons",
        inst_dir.join("comparisons.csv").to_str().unwrap(),
        "--out",
        est_dir.to_str().unwrap(),
        "--max-iters",
        "4000",
        "--kkt-tol",
        "1e-5",
    ]);
    assert_eq!(code, 0);
    assert!(est_dir.join("m_hat.csv").exists());
    assert!(est_dir.join("u_hat.csv").exists());
    assert!(est_dir.join("ranking.csv").exists());

    let code = prefmetric_cli::cli_main([
        "prefmetric",
        "eval",
        "--instance",
        inst_dir.to_str().unwrap(),
        "--estimate",
        est_dir.to_str().unwrap(),
        "--k",
        "3,5",
    ]);
    assert_eq!(code, 0);

    let code = prefmetric_cli::cli_main([
        "prefmetric",
        "report",
        "--metric",
        est_dir.join("m_hat.csv").to_str().unwrap(),
        "--names",
        "a,b",
    ]);
    assert_eq!(code, 0);
}

#[test]
fn cli_error_paths() {
    // Unknown subcommand: usage error, exit 2.
    assert_eq!(prefmetric_cli::cli_main(["prefmetric", "wat"]), 2);
    // Unknown flag: exit 2.
    assert_eq!(
        prefmetric_cli::cli_main(["prefmetric", "synth", "--bogus"]),
        2
    );
    // Help: exit 0.
    assert_eq!(prefmetric_cli::cli_main(["prefmetric", "--help"]), 0);
    // Runtime failure (missing file): exit 1.
    assert_eq!(
        prefmetric_cli::cli_main([
            "prefmetric",
            "experiment",
            "--config",
            "/nonexistent/config.cfg"
        ]),
        1
    );
}

#[test]
fn cli_ingest_runs_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("adm");
    let code = prefmetric_cli::cli_main([
        "prefmetric",
        "ingest",
        "--schema",
        "unranked",
        "--input",
        fixture("unranked.csv").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--counts",
        "10,10,10",
        "--seed",
        "3",
    ]);
    assert_eq!(code, 0);
    let (omega, y) = read_comparisons(&out_dir.join("comparisons.csv"), 30).unwrap();
    assert_eq!(omega.len(), 10 * 20 + 10 * 10);
    assert!(y.values().iter().all(|&v| v == -1.0));
}
