//! Flat key-value experiment configuration files.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are errors.
//! Keys (defaults in parentheses):
//!
//! ```text
//! kind            single_step_sweep | euclidean_comparison |
//!                 alternating_sweep | identity_sweep        (required)
//! d_list          comma list of dimensions                  (2)
//! n               item count                                (100)
//! p_list          comma list of comparison counts           (10,50,100,250,500)
//! trials          trials per (D, P) cell                    (20)
//! k_list          top-K sizes                               (5,10,20)
//! base_seed       experiment seed                           (0)
//! output          output directory for trials/aggregate     (required)
//! gamma1 gamma2 gamma3 alpha      single-step weights       (2, 0.002, 0.001, 1)
//! init_gamma1 .. init_alpha       alternating stage-0       (2, 0.002, 0.0001, 1)
//! iter_gamma1 .. iter_alpha       alternating stages >= 1   (2/3, 1/15, 7/1500, 0.5)
//! stop_tol        alternating stop tolerance                (0.001)
//! max_outer       alternating refinement cap                (100)
//! euclid2_ridge   ridge of the direct Euclidean baseline    (0.001)
//! solver_max_iters                                          (20000)
//! kkt_tol                                                   (1e-6)
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use prefmetric::solver::RegularizationParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SingleStepSweep,
    EuclideanComparison,
    AlternatingSweep,
    IdentitySweep,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::SingleStepSweep => "single_step_sweep",
            ExperimentKind::EuclideanComparison => "euclidean_comparison",
            ExperimentKind::AlternatingSweep => "alternating_sweep",
            ExperimentKind::IdentitySweep => "identity_sweep",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "single_step_sweep" => ExperimentKind::SingleStepSweep,
            "euclidean_comparison" => ExperimentKind::EuclideanComparison,
            "alternating_sweep" => ExperimentKind::AlternatingSweep,
            "identity_sweep" => ExperimentKind::IdentitySweep,
            other => bail!("unknown experiment kind {other:?}"),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub d_list: Vec<usize>,
    pub n: usize,
    pub p_list: Vec<usize>,
    pub trials: usize,
    pub k_list: Vec<usize>,
    pub params: RegularizationParams,
    pub alt_init: RegularizationParams,
    pub alt_iter: RegularizationParams,
    pub stop_tol: f64,
    pub max_outer: usize,
    pub euclid2_ridge: f64,
    pub solver_max_iters: usize,
    pub kkt_tol: f64,
    pub base_seed: u64,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            bail!("trials must be >= 1");
        }
        if self.d_list.is_empty() || self.p_list.is_empty() || self.k_list.is_empty() {
            bail!("d_list, p_list and k_list must be nonempty");
        }
        let max_pairs = self.n * (self.n - 1) / 2;
        for &p in &self.p_list {
            if p < 1 || p > max_pairs {
                bail!("p = {p} outside 1..={max_pairs} for n = {}", self.n);
            }
        }
        for &k in &self.k_list {
            if k < 1 || k > self.n {
                bail!("top-K size {k} outside 1..={}", self.n);
            }
        }
        self.params.validate()?;
        self.alt_init.validate()?;
        self.alt_iter.validate()?;
        if !(self.stop_tol > 0.0) {
            bail!("stop_tol must be positive");
        }
        if self.max_outer < 1 {
            bail!("max_outer must be >= 1");
        }
        Ok(())
    }
}

fn parse_list<T: std::str::FromStr>(value: &str, key: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    value
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .with_context(|| format!("bad entry {tok:?} in {key}"))
        })
        .collect()
}

pub fn parse_config(text: &str, config_dir: &Path) -> Result<ExperimentConfig> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key = value, got {raw:?}", lineno + 1);
        };
        if map
            .insert(k.trim().to_string(), v.trim().to_string())
            .is_some()
        {
            bail!("line {}: duplicate key {:?}", lineno + 1, k.trim());
        }
    }

    let mut take = |key: &str| map.remove(key);

    let kind = ExperimentKind::parse(
        &take("kind").context("missing required key: kind")?,
    )?;
    let output_raw = take("output").context("missing required key: output")?;
    let output_path = PathBuf::from(&output_raw);
    let output = if output_path.is_absolute() {
        output_path
    } else {
        config_dir.join(output_path)
    };

    let d_list = match take("d_list") {
        Some(v) => parse_list::<usize>(&v, "d_list")?,
        None => vec![2],
    };
    let n = match take("n") {
        Some(v) => v.parse::<usize>().context("bad n")?,
        None => 100,
    };
    let p_list = match take("p_list") {
        Some(v) => parse_list::<usize>(&v, "p_list")?,
        None => vec![10, 50, 100, 250, 500],
    };
    let trials = match take("trials") {
        Some(v) => v.parse::<usize>().context("bad trials")?,
        None => 20,
    };
    let k_list = match take("k_list") {
        Some(v) => parse_list::<usize>(&v, "k_list")?,
        None => vec![5, 10, 20],
    };
    let base_seed = match take("base_seed") {
        Some(v) => v.parse::<u64>().context("bad base_seed")?,
        None => 0,
    };

    let mut scalar = |key: &str, default: f64| -> Result<f64> {
        match take(key) {
            Some(v) => v.parse::<f64>().with_context(|| format!("bad {key}")),
            None => Ok(default),
        }
    };

    let defaults = RegularizationParams::single_step_defaults();
    let params = RegularizationParams {
        gamma1: scalar("gamma1", defaults.gamma1)?,
        gamma2: scalar("gamma2", defaults.gamma2)?,
        gamma3: scalar("gamma3", defaults.gamma3)?,
        alpha: scalar("alpha", defaults.alpha)?,
    };
    let init_defaults = RegularizationParams::alternating_init_defaults();
    let alt_init = RegularizationParams {
        gamma1: scalar("init_gamma1", init_defaults.gamma1)?,
        gamma2: scalar("init_gamma2", init_defaults.gamma2)?,
        gamma3: scalar("init_gamma3", init_defaults.gamma3)?,
        alpha: scalar("init_alpha", init_defaults.alpha)?,
    };
    let iter_defaults = RegularizationParams::alternating_iter_defaults();
    let alt_iter = RegularizationParams {
        gamma1: scalar("iter_gamma1", iter_defaults.gamma1)?,
        gamma2: scalar("iter_gamma2", iter_defaults.gamma2)?,
        gamma3: scalar("iter_gamma3", iter_defaults.gamma3)?,
        alpha: scalar("iter_alpha", iter_defaults.alpha)?,
    };
    let stop_tol = scalar("stop_tol", 1e-3)?;
    let euclid2_ridge = scalar("euclid2_ridge", 1e-3)?;
    let kkt_tol = scalar("kkt_tol", 1e-6)?;
    let max_outer = match take("max_outer") {
        Some(v) => v.parse::<usize>().context("bad max_outer")?,
        None => 100,
    };
    let solver_max_iters = match take("solver_max_iters") {
        Some(v) => v.parse::<usize>().context("bad solver_max_iters")?,
        None => 20_000,
    };

    if let Some(key) = map.keys().next() {
        bail!("unknown config key {key:?}");
    }

    let cfg = ExperimentConfig {
        kind,
        d_list,
        n,
        p_list,
        trials,
        k_list,
        params,
        alt_init,
        alt_iter,
        stop_tol,
        max_outer,
        euclid2_ridge,
        solver_max_iters,
        kkt_tol,
        base_seed,
        output,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg = parse_config(
            "kind = single_step_sweep\noutput = out/fig\n# comment\ntrials = 3\n",
            Path::new("/tmp/work"),
        )
        .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::SingleStepSweep);
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.n, 100);
        assert_eq!(cfg.output, PathBuf::from("/tmp/work/out/fig"));
        assert_eq!(cfg.params.gamma1, 2.0);
        assert_eq!(cfg.params.gamma2, 0.002);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(parse_config("kind = single_step_sweep\noutput = o\nwat = 1\n", Path::new("."))
            .is_err());
        assert!(parse_config("output = o\n", Path::new(".")).is_err());
        assert!(parse_config(
            "kind = single_step_sweep\noutput = o\nn = 10\np_list = 100\n",
            Path::new(".")
        )
        .is_err());
        assert!(parse_config(
            "kind = single_step_sweep\noutput = o\ntrials = 0\n",
            Path::new(".")
        )
        .is_err());
    }

    #[test]
    fn alternating_defaults_match_presets() {
        let cfg = parse_config(
            "kind = alternating_sweep\noutput = o\nd_list = 5\np_list = 40,100,200\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(cfg.alt_init.gamma3, 0.0001);
        assert!((cfg.alt_iter.gamma1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((cfg.alt_iter.gamma2 - 1.0 / 15.0).abs() < 1e-15);
        assert!((cfg.alt_iter.gamma3 - 7.0 / 1500.0).abs() < 1e-15);
        assert_eq!(cfg.alt_iter.alpha, 0.5);
        assert_eq!(cfg.max_outer, 100);
        assert_eq!(cfg.stop_tol, 1e-3);
    }
}
