//! Admissions-style CSV ingestion.
//!
//! Two schemas are supported (header row required, empty cells = missing):
//!
//! *Unranked* — categorical decisions, ten raw feature columns:
//! `category` (`fellowship` | `admit` | `deny`), `self_gre_writing`,
//! `self_gre_verbal`, `self_gre_quant`, `official_gre_writing`,
//! `official_gre_verbal`, `official_gre_quant`, `gpa`, `lor1`, `lor2`,
//! `lor3`.
//!
//! *Ranked* — ordinal scores, four features: `score` (integer 1..=10, 1
//! most preferred), `gre_writing`, `gre_verbal`, `gre_quant`, `gpa`.
//!
//! Preprocessing mirrors the documented pipeline: official GRE scores are
//! preferred and self-reported values fill gaps; GRE verbal/quantitative
//! must be integers in [130, 170] and writing a half-step in [0, 6]; GPA
//! outside [1, 4] drops the candidate; letter scores (each in [0, 3]) are
//! averaged and exponentiated into a LoR score in [1, e^3]. Candidates
//! missing any selected feature are dropped with a logged reason.
//!
//! Comparisons encode preference as `y = -1` for a pair emitted as
//! (preferred, less preferred): the preferred candidate sits closer to the
//! ideal point, so its squared distance is smaller.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use prefmetric::geometry::{ComparisonSet, ItemEmbedding, Observations};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Category {
    Fellowship,
    Admit,
    Deny,
}

impl Category {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "fellowship" => Category::Fellowship,
            "admit" => Category::Admit,
            "deny" => Category::Deny,
            other => bail!("unknown category {other:?}"),
        })
    }

    /// Preference rank: smaller is more preferred.
    fn ordinal(self) -> u8 {
        match self {
            Category::Fellowship => 0,
            Category::Admit => 1,
            Category::Deny => 2,
        }
    }
}

/// Selectable candidate features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    GreVerbal,
    GreQuant,
    GreWriting,
    Gpa,
    Lor,
}

impl Feature {
    pub const ALL: [Feature; 5] = [
        Feature::GreVerbal,
        Feature::GreQuant,
        Feature::GreWriting,
        Feature::Gpa,
        Feature::Lor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::GreVerbal => "gre_verbal",
            Feature::GreQuant => "gre_quant",
            Feature::GreWriting => "gre_writing",
            Feature::Gpa => "gpa",
            Feature::Lor => "lor",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "gre_verbal" => Feature::GreVerbal,
            "gre_quant" => Feature::GreQuant,
            "gre_writing" => Feature::GreWriting,
            "gpa" => Feature::Gpa,
            "lor" => Feature::Lor,
            other => bail!("unknown feature {other:?}"),
        })
    }
}

/// A candidate that survived preprocessing.
#[derive(Debug, Clone)]
pub struct CandidateRecord {
    pub category: Option<Category>,
    pub score: Option<u8>,
    pub gre_verbal: Option<f64>,
    pub gre_quant: Option<f64>,
    pub gre_writing: Option<f64>,
    pub gpa: Option<f64>,
    pub lor: Option<f64>,
}

impl CandidateRecord {
    fn feature(&self, f: Feature) -> Option<f64> {
        match f {
            Feature::GreVerbal => self.gre_verbal,
            Feature::GreQuant => self.gre_quant,
            Feature::GreWriting => self.gre_writing,
            Feature::Gpa => self.gpa,
            Feature::Lor => self.lor,
        }
    }
}

/// Ingestion provenance: kept candidate count and per-row drop reasons.
#[derive(Debug, Clone, Default)]
pub struct IngestLog {
    pub kept: usize,
    pub dropped: Vec<(usize, String)>,
}

/// Letter-of-recommendation score: the mean of the available letter scores,
/// exponentiated. `None` when no letters were submitted.
pub fn lor_score(letters: &[f64]) -> Option<f64> {
    if letters.is_empty() {
        return None;
    }
    let mean = letters.iter().sum::<f64>() / letters.len() as f64;
    Some(mean.exp())
}

fn is_half_step(v: f64) -> bool {
    (v * 2.0).fract() == 0.0
}

fn validate_gre_vq(v: f64, what: &str) -> Result<f64> {
    if v.fract() != 0.0 || !(130.0..=170.0).contains(&v) {
        bail!("{what} must be an integer in [130, 170], got {v}");
    }
    Ok(v)
}

fn validate_gre_writing(v: f64) -> Result<f64> {
    if !(0.0..=6.0).contains(&v) || !is_half_step(v) {
        bail!("gre_writing must be a half-step in [0, 6], got {v}");
    }
    Ok(v)
}

fn validate_letter(v: f64) -> Result<f64> {
    if !(0.0..=3.0).contains(&v) {
        bail!("letter score must lie in [0, 3], got {v}");
    }
    Ok(v)
}

#[derive(Debug, Deserialize)]
struct UnrankedRaw {
    category: String,
    self_gre_writing: Option<f64>,
    self_gre_verbal: Option<f64>,
    self_gre_quant: Option<f64>,
    official_gre_writing: Option<f64>,
    official_gre_verbal: Option<f64>,
    official_gre_quant: Option<f64>,
    gpa: Option<f64>,
    lor1: Option<f64>,
    lor2: Option<f64>,
    lor3: Option<f64>,
}

fn preprocess_unranked(raw: &UnrankedRaw) -> Result<CandidateRecord> {
    let category = Category::parse(&raw.category)?;
    // Official GRE scores take precedence; self-reported values fill gaps.
    let gre_writing = raw
        .official_gre_writing
        .or(raw.self_gre_writing)
        .map(validate_gre_writing)
        .transpose()?;
    let gre_verbal = raw
        .official_gre_verbal
        .or(raw.self_gre_verbal)
        .map(|v| validate_gre_vq(v, "gre_verbal"))
        .transpose()?;
    let gre_quant = raw
        .official_gre_quant
        .or(raw.self_gre_quant)
        .map(|v| validate_gre_vq(v, "gre_quant"))
        .transpose()?;
    let gpa = match raw.gpa {
        Some(g) if (1.0..=4.0).contains(&g) => Some(g),
        Some(g) => bail!("gpa {g} outside [1, 4]"),
        None => None,
    };
    let letters: Vec<f64> = [raw.lor1, raw.lor2, raw.lor3]
        .into_iter()
        .flatten()
        .map(validate_letter)
        .collect::<Result<_>>()?;
    Ok(CandidateRecord {
        category: Some(category),
        score: None,
        gre_verbal,
        gre_quant,
        gre_writing,
        gpa,
        lor: lor_score(&letters),
    })
}

pub struct IngestOutput {
    pub x: ItemEmbedding,
    pub omega: ComparisonSet,
    pub y: Observations,
    pub feature_names: Vec<String>,
    /// Preference ordinal per kept candidate (category rank or score).
    pub ordinals: Vec<u8>,
    pub log: IngestLog,
    pub manifest: BTreeMap<String, String>,
}

/// Re-checks every emitted observation against the candidates' ordinal
/// labels: y must be -1 exactly when candidate i is more preferred.
pub fn verify_observations(
    ordinals: &[u8],
    omega: &ComparisonSet,
    y: &Observations,
) -> Result<()> {
    for (k, &(i, j)) in omega.pairs().iter().enumerate() {
        let (oi, oj) = (ordinals[i], ordinals[j]);
        if oi == oj {
            bail!("comparison {k} pairs equally-ranked candidates {i} and {j}");
        }
        let expected = if oi < oj { -1.0 } else { 1.0 };
        if y.values()[k] != expected {
            bail!(
                "comparison {k}: y = {} contradicts ordinals ({oi} vs {oj})",
                y.values()[k]
            );
        }
    }
    Ok(())
}

/// Ingests the unranked schema: preprocess, subsample the requested number
/// of candidates per category with `seed`, and emit every cross-category
/// comparison (preferred first, y = -1).
pub fn ingest_unranked(
    path: &Path,
    counts: (usize, usize, usize),
    seed: u64,
    features: &[Feature],
) -> Result<IngestOutput> {
    if features.is_empty() {
        bail!("at least one feature must be selected");
    }
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut log = IngestLog::default();
    let mut candidates: Vec<CandidateRecord> = Vec::new();
    for (idx, record) in reader.deserialize::<UnrankedRaw>().enumerate() {
        let rownum = idx + 2; // header is line 1
        let raw = match record {
            Ok(raw) => raw,
            Err(e) => {
                bail!("{}:{rownum}: malformed row: {e}", path.display());
            }
        };
        match preprocess_unranked(&raw) {
            Ok(rec) => {
                if let Some(missing) = features.iter().find(|&&f| rec.feature(f).is_none()) {
                    log.dropped
                        .push((rownum, format!("missing feature {}", missing.name())));
                } else {
                    candidates.push(rec);
                }
            }
            Err(e) => log.dropped.push((rownum, e.to_string())),
        }
    }

    let mut by_cat: BTreeMap<Category, Vec<usize>> = BTreeMap::new();
    for (i, c) in candidates.iter().enumerate() {
        by_cat
            .entry(c.category.expect("unranked candidates have categories"))
            .or_default()
            .push(i);
    }
    let want = [
        (Category::Fellowship, counts.0),
        (Category::Admit, counts.1),
        (Category::Deny, counts.2),
    ];
    let mut selected: Vec<usize> = Vec::new();
    for (cat, want_n) in want {
        let avail = by_cat.get(&cat).map_or(0, |v| v.len());
        if avail < want_n {
            bail!(
                "need {want_n} usable {cat:?} candidates, found {avail} in {}",
                path.display()
            );
        }
        let mut pool = by_cat.remove(&cat).unwrap_or_default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(cat.ordinal() as u64 + 1);
        for k in 0..want_n {
            let swap = k + rng.random_range(0..(pool.len() - k));
            pool.swap(k, swap);
        }
        let mut chosen: Vec<usize> = pool[..want_n].to_vec();
        chosen.sort_unstable();
        selected.extend(chosen);
    }

    log.kept = selected.len();
    let feature_names: Vec<String> = features.iter().map(|f| f.name().to_string()).collect();
    let x = DMatrix::from_fn(selected.len(), features.len(), |i, j| {
        candidates[selected[i]]
            .feature(features[j])
            .expect("selected candidates have all features")
    });
    let ordinals: Vec<u8> = selected
        .iter()
        .map(|&i| candidates[i].category.unwrap().ordinal())
        .collect();

    // Every cross-category ordered pair, preferred candidate first.
    let (nf, na, nd) = counts;
    let mut pairs = Vec::with_capacity(nf * (na + nd) + na * nd);
    for i in 0..nf {
        for j in nf..(nf + na + nd) {
            pairs.push((i, j));
        }
    }
    for i in nf..(nf + na) {
        for j in (nf + na)..(nf + na + nd) {
            pairs.push((i, j));
        }
    }
    let y = Observations::new(vec![-1.0; pairs.len()])?;
    let omega = ComparisonSet::new(pairs, selected.len())?;
    verify_observations(&ordinals, &omega, &y)?;

    let manifest = BTreeMap::from([
        ("kind".to_string(), "ingested_unranked".to_string()),
        ("source".to_string(), path.display().to_string()),
        ("seed".to_string(), seed.to_string()),
        (
            "counts".to_string(),
            format!("{},{},{}", counts.0, counts.1, counts.2),
        ),
        ("features".to_string(), feature_names.join(",")),
    ]);

    Ok(IngestOutput {
        x: ItemEmbedding::new(x)?,
        omega,
        y,
        feature_names,
        ordinals,
        log,
        manifest,
    })
}

#[derive(Debug, Deserialize)]
struct RankedRaw {
    score: Option<f64>,
    gre_writing: Option<f64>,
    gre_verbal: Option<f64>,
    gre_quant: Option<f64>,
    gpa: Option<f64>,
}

/// Ingests the ranked schema: candidates with any missing field are
/// dropped; every pair of kept candidates with different scores becomes a
/// comparison (the lower score is preferred).
pub fn ingest_ranked(path: &Path) -> Result<IngestOutput> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut log = IngestLog::default();
    let mut rows: Vec<(u8, [f64; 4])> = Vec::new();
    for (idx, record) in reader.deserialize::<RankedRaw>().enumerate() {
        let rownum = idx + 2;
        let raw = match record {
            Ok(raw) => raw,
            Err(e) => bail!("{}:{rownum}: malformed row: {e}", path.display()),
        };
        let all = [
            raw.score,
            raw.gre_writing,
            raw.gre_verbal,
            raw.gre_quant,
            raw.gpa,
        ];
        if all.iter().any(Option::is_none) {
            log.dropped.push((rownum, "missing feature".to_string()));
            continue;
        }
        let score = raw.score.unwrap();
        if score.fract() != 0.0 || !(1.0..=10.0).contains(&score) {
            log.dropped
                .push((rownum, format!("score {score} outside 1..=10")));
            continue;
        }
        match (
            validate_gre_writing(raw.gre_writing.unwrap()),
            validate_gre_vq(raw.gre_verbal.unwrap(), "gre_verbal"),
            validate_gre_vq(raw.gre_quant.unwrap(), "gre_quant"),
            raw.gpa.filter(|g| (1.0..=4.0).contains(g)),
        ) {
            (Ok(w), Ok(v), Ok(q), Some(g)) => rows.push((score as u8, [w, v, q, g])),
            (w, v, q, g) => {
                let reason = w
                    .err()
                    .or(v.err())
                    .or(q.err())
                    .map(|e| e.to_string())
                    .unwrap_or_else(|| {
                        if g.is_none() {
                            "gpa outside [1, 4]".to_string()
                        } else {
                            "invalid row".to_string()
                        }
                    });
                log.dropped.push((rownum, reason));
            }
        }
    }
    if rows.len() < 2 {
        bail!("{}: fewer than two usable candidates", path.display());
    }
    log.kept = rows.len();

    let n = rows.len();
    let x = DMatrix::from_fn(n, 4, |i, j| rows[i].1[j]);
    let ordinals: Vec<u8> = rows.iter().map(|r| r.0).collect();
    let mut pairs = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if ordinals[i] == ordinals[j] {
                continue;
            }
            pairs.push((i, j));
            y.push(if ordinals[i] < ordinals[j] { -1.0 } else { 1.0 });
        }
    }
    let omega = ComparisonSet::new(pairs, n)?;
    let y = Observations::new(y)?;
    verify_observations(&ordinals, &omega, &y)?;

    let manifest = BTreeMap::from([
        ("kind".to_string(), "ingested_ranked".to_string()),
        ("source".to_string(), path.display().to_string()),
    ]);
    Ok(IngestOutput {
        x: ItemEmbedding::new(x)?,
        omega,
        y,
        feature_names: vec![
            "gre_writing".to_string(),
            "gre_verbal".to_string(),
            "gre_quant".to_string(),
            "gpa".to_string(),
        ],
        ordinals,
        log,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lor_score_examples() {
        assert!((lor_score(&[3.0, 3.0, 3.0]).unwrap() - 3.0f64.exp()).abs() < 1e-12);
        assert_eq!(lor_score(&[0.0]).unwrap(), 1.0);
        assert_eq!(lor_score(&[]), None);
    }

    #[test]
    fn lor_range_is_bounded() {
        for letters in [&[0.0, 0.0][..], &[1.5][..], &[3.0, 2.0, 1.0][..]] {
            let v = lor_score(letters).unwrap();
            assert!((1.0..=3.0f64.exp() + 1e-12).contains(&v));
        }
    }

    #[test]
    fn unranked_preprocess_prefers_official_scores() {
        let raw = UnrankedRaw {
            category: "admit".into(),
            self_gre_writing: Some(3.0),
            self_gre_verbal: Some(150.0),
            self_gre_quant: None,
            official_gre_writing: Some(4.5),
            official_gre_verbal: None,
            official_gre_quant: Some(165.0),
            gpa: Some(3.5),
            lor1: Some(2.0),
            lor2: None,
            lor3: None,
        };
        let rec = preprocess_unranked(&raw).unwrap();
        assert_eq!(rec.gre_writing, Some(4.5));
        assert_eq!(rec.gre_verbal, Some(150.0));
        assert_eq!(rec.gre_quant, Some(165.0));
        assert!((rec.lor.unwrap() - 2.0f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn unranked_preprocess_rejects_out_of_range() {
        let mut raw = UnrankedRaw {
            category: "deny".into(),
            self_gre_writing: None,
            self_gre_verbal: None,
            self_gre_quant: None,
            official_gre_writing: Some(3.0),
            official_gre_verbal: Some(155.0),
            official_gre_quant: Some(160.0),
            gpa: Some(4.7),
            lor1: Some(1.0),
            lor2: None,
            lor3: None,
        };
        assert!(preprocess_unranked(&raw).is_err()); // gpa filter
        raw.gpa = Some(3.0);
        raw.official_gre_verbal = Some(155.5);
        assert!(preprocess_unranked(&raw).is_err()); // non-integer verbal
    }

    #[test]
    fn verify_rejects_contradicting_observation() {
        let omega = ComparisonSet::new(vec![(0, 1)], 2).unwrap();
        let bad = Observations::new(vec![1.0]).unwrap();
        assert!(verify_observations(&[0, 1], &omega, &bad).is_err());
        let good = Observations::new(vec![-1.0]).unwrap();
        assert!(verify_observations(&[0, 1], &omega, &good).is_ok());
    }
}
