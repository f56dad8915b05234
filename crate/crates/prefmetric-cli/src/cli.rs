//! Command-line interface: synthetic instance generation, model fitting,
//! evaluation, experiment sweeps, admissions ingestion, and eigenstructure
//! reports.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use prefmetric::estimators::{
    fit_alternating, fit_euclidean_alg1, fit_euclidean_alg2, fit_single_step, rank_items,
    AlternatingParams, Estimate, StopMode,
};
use prefmetric::evaluation::{kendall_tau_norm, topk_fraction, ur_error, wer_error};
use prefmetric::geometry::{all_distances, observe_detailed, MetricMatrix};
use prefmetric::solver::{RegularizationParams, SolverConfig, SolverStatus};
use prefmetric::synthdata::{gen_instance, gen_instance_identity, sample_comparisons, GenConfig};

use crate::config::load_config;
use crate::experiment::run_experiment;
use crate::ingest::{ingest_ranked, ingest_unranked, Feature};
use crate::io::{
    format_f64, read_comparisons, read_estimate, read_instance, read_metric, write_comparisons,
    write_estimate, write_instance, InstanceData,
};
use crate::report::{eigen_report, DEFAULT_MIN_LOADING};

#[derive(Parser)]
#[command(
    name = "prefmetric",
    about = "Estimate a user's ideal point and preference metric from paired comparisons",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic ground-truth instance (and optionally comparisons)
    Synth(SynthArgs),
    /// Fit an estimate from an instance and comparisons
    Fit(FitArgs),
    /// Evaluate an estimate against ground truth
    Eval(EvalArgs),
    /// Run a configured experiment sweep
    Experiment(ExperimentArgs),
    /// Ingest an admissions-style CSV into an instance directory
    Ingest(IngestArgs),
    /// Report eigenvalues and feature interactions of a fitted metric
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also sample this many comparisons and observe them.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    eps_f: f64,
    #[arg(long, default_value_t = 0.25)]
    eps_s: f64,
    #[arg(long, default_value_t = 0.2)]
    eps_p: f64,
    /// Pin the metric to the identity instead of drawing one.
    #[arg(long)]
    identity_metric: bool,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    comparisons: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// single-step | alternating | euclid1 | euclid2
    #[arg(long, default_value = "single-step")]
    method: String,
    #[arg(long, default_value_t = 2.0)]
    gamma1: f64,
    #[arg(long, default_value_t = 0.002)]
    gamma2: f64,
    #[arg(long, default_value_t = 0.001)]
    gamma3: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Ridge weight of the direct Euclidean baseline (euclid2).
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    /// Alternating refinement stage weights (defaults to the staged presets).
    #[arg(long)]
    iter_gamma1: Option<f64>,
    #[arg(long)]
    iter_gamma2: Option<f64>,
    #[arg(long)]
    iter_gamma3: Option<f64>,
    #[arg(long)]
    iter_alpha: Option<f64>,
    /// Alternating stop tolerance on the ideal-point change.
    #[arg(long, default_value_t = 1e-3)]
    stop_tol: f64,
    #[arg(long, default_value_t = 100)]
    max_outer: usize,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    kkt_tol: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long)]
    solver_seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    /// Top-K sizes to report.
    #[arg(long, value_delimiter = ',', default_values_t = vec![5usize, 10, 20])]
    k: Vec<usize>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// unranked | ranked
    #[arg(long)]
    schema: String,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Candidates per category for the unranked schema: fellowship,admit,deny.
    #[arg(long, value_delimiter = ',')]
    counts: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Feature subset for the unranked schema.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
}

#[derive(Args)]
struct ReportArgs {
    /// Path to a metric CSV (D rows), e.g. an estimate's m_hat.csv.
    #[arg(long)]
    metric: PathBuf,
    #[arg(long, value_delimiter = ',')]
    names: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_MIN_LOADING)]
    min_loading: f64,
}

/// Entry point; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Ingest(args) => cmd_ingest(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut cfg = GenConfig::new(args.d, args.n, args.seed);
    cfg.eps_f = args.eps_f;
    cfg.eps_s = args.eps_s;
    cfg.eps_p = args.eps_p;
    let inst = if args.identity_metric {
        gen_instance_identity(&cfg)?
    } else {
        gen_instance(&cfg)?
    };

    let mut manifest = BTreeMap::from([
        ("kind".to_string(), "synthetic".to_string()),
        ("seed".to_string(), args.seed.to_string()),
        ("eps_f".to_string(), format_f64(args.eps_f)),
        ("eps_s".to_string(), format_f64(args.eps_s)),
        ("eps_p".to_string(), format_f64(args.eps_p)),
        (
            "metric_model".to_string(),
            if args.identity_metric {
                "identity".to_string()
            } else {
                "gram_normal".to_string()
            },
        ),
    ]);

    if let Some(p) = args.p {
        let omega = sample_comparisons(args.n, p, args.seed)?;
        let d_true = all_distances(&inst.x, &inst.u_true, &inst.m_true)?;
        let observed = observe_detailed(&d_true, &omega)?;
        if observed.tie_count > 0 {
            eprintln!(
                "warning: instance contains {} tied comparison(s)",
                observed.tie_count
            );
        }
        manifest.insert("p".to_string(), p.to_string());
        manifest.insert("tie_count".to_string(), observed.tie_count.to_string());
        std::fs::create_dir_all(&args.out)?;
        write_comparisons(&args.out.join("comparisons.csv"), &omega, &observed.y)?;
    }

    write_instance(
        &args.out,
        &InstanceData {
            x: inst.x,
            u_true: Some(inst.u_true),
            m_true: Some(inst.m_true),
            manifest,
        },
    )?;
    println!("wrote instance to {}", args.out.display());
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let inst = read_instance(&args.instance)?;
    let (omega, y) = read_comparisons(&args.comparisons, inst.x.n_items())?;
    let params = RegularizationParams::new(args.gamma1, args.gamma2, args.gamma3, args.alpha)?;
    let scfg = SolverConfig {
        max_iters: args.max_iters,
        kkt_tol: args.kkt_tol,
        penalty_rho: args.rho,
        seed: args.solver_seed,
        ..SolverConfig::default()
    };

    let estimate: Estimate = match args.method.as_str() {
        "single-step" => fit_single_step(&inst.x, &omega, &y, &params, &scfg)?,
        "euclid1" => fit_euclidean_alg1(&inst.x, &omega, &y, &params, &scfg)?,
        "euclid2" => {
            let u_hat = fit_euclidean_alg2(&inst.x, &omega, &y, args.lambda, &scfg)?;
            let eye = MetricMatrix::identity(inst.x.dim());
            let ranking = rank_items(&inst.x, &u_hat, &eye)?;
            let d_hat = all_distances(&inst.x, &u_hat, &eye)?;
            Estimate {
                m_hat: eye,
                u_hat,
                d_hat,
                ranking,
                solver_status: SolverStatus::Converged,
                iters: 1,
            }
        }
        "alternating" => {
            let presets = RegularizationParams::alternating_iter_defaults();
            let iter_params = RegularizationParams {
                gamma1: args.iter_gamma1.unwrap_or(presets.gamma1),
                gamma2: args.iter_gamma2.unwrap_or(presets.gamma2),
                gamma3: args.iter_gamma3.unwrap_or(presets.gamma3),
                alpha: args.iter_alpha.unwrap_or(presets.alpha),
            };
            let alt = AlternatingParams {
                init_params: params,
                iter_params,
                max_outer: args.max_outer,
                stop_mode: StopMode::EstimateDelta { tol: args.stop_tol },
            };
            fit_alternating(&inst.x, &omega, &y, &alt, &scfg)?.estimate
        }
        other => bail!("unknown method {other:?} (expected single-step, alternating, euclid1 or euclid2)"),
    };

    let extra = BTreeMap::from([
        ("method".to_string(), args.method.clone()),
        ("gamma1".to_string(), format_f64(args.gamma1)),
        ("gamma2".to_string(), format_f64(args.gamma2)),
        ("gamma3".to_string(), format_f64(args.gamma3)),
        ("alpha".to_string(), format_f64(args.alpha)),
    ]);
    write_estimate(&args.out, &estimate, &extra)?;
    println!(
        "wrote estimate to {} (status {}, {} stage(s))",
        args.out.display(),
        estimate.solver_status,
        estimate.iters
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let inst = read_instance(&args.instance)?;
    let est = read_estimate(&args.estimate)?;
    let u_true = inst
        .u_true
        .context("instance has no ground-truth ideal point")?;
    let m_true = inst
        .m_true
        .context("instance has no ground-truth metric")?;

    let ur = ur_error(&est.u_hat, &u_true, &m_true)?;
    let wer = wer_error(&m_true, &est.m_hat)?;
    let rank_true = rank_items(&inst.x, &u_true, &m_true)?;
    let kendall = kendall_tau_norm(&est.ranking, &rank_true)?;

    println!("metric,value");
    println!("ur_error,{}", format_f64(ur));
    println!("wer_error,{}", format_f64(wer));
    println!("kendall_norm,{}", format_f64(kendall));
    for &k in &args.k {
        let frac = topk_fraction(&est.ranking, &rank_true, k)?;
        println!("top{k},{}", format_f64(frac));
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let out = run_experiment(&cfg)?;
    println!(
        "wrote {} trial rows to {} and aggregates to {}",
        out.rows.len(),
        out.trial_path.display(),
        out.aggregate_path.display()
    );
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let out = match args.schema.as_str() {
        "unranked" => {
            let counts = match &args.counts {
                Some(v) if v.len() == 3 => (v[0], v[1], v[2]),
                Some(_) => bail!("--counts expects three values: fellowship,admit,deny"),
                None => (33, 33, 34),
            };
            let features: Vec<Feature> = match &args.features {
                Some(names) => names
                    .iter()
                    .map(|s| Feature::parse(s))
                    .collect::<Result<_>>()?,
                None => Feature::ALL.to_vec(),
            };
            ingest_unranked(&args.input, counts, args.seed, &features)?
        }
        "ranked" => ingest_ranked(&args.input)?,
        other => bail!("unknown schema {other:?} (expected unranked or ranked)"),
    };

    for (row, reason) in &out.log.dropped {
        eprintln!("dropped row {row}: {reason}");
    }
    eprintln!(
        "kept {} candidates, {} comparisons",
        out.log.kept,
        out.omega.len()
    );

    std::fs::create_dir_all(&args.out)?;
    write_comparisons(&args.out.join("comparisons.csv"), &out.omega, &out.y)?;
    let mut manifest = out.manifest.clone();
    manifest.insert("features".to_string(), out.feature_names.join(","));
    write_instance(
        &args.out,
        &InstanceData {
            x: out.x,
            u_true: None,
            m_true: None,
            manifest,
        },
    )?;
    println!("wrote ingested instance to {}", args.out.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let metric = read_metric(&args.metric)?;
    let report = eigen_report(&metric, &args.names, args.min_loading)?;
    println!("eigenvalue,interaction");
    for (value, terms) in report {
        println!("{},{terms}", format_f64(value));
    }
    Ok(())
}
