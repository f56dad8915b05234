//! On-disk interchange formats.
//!
//! An *instance directory* holds plain CSV matrices: `items.csv` (N rows of
//! D values), optionally `ideal_point.csv` (one row) and `metric.csv`
//! (D rows) when ground truth is known, optionally `comparisons.csv`
//! (header `i,j,y`), and a `manifest.txt` of `key = value` lines carrying
//! the schema version, seeds and generator thresholds.
//!
//! An *estimate directory* holds `m_hat.csv`, `u_hat.csv`, `ranking.csv`
//! (header `position,item`) and `estimate.txt` metadata.
//!
//! Numbers are written with Rust's shortest round-trip float formatting,
//! so identical values always produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use prefmetric::estimators::Estimate;
use prefmetric::geometry::{
    ComparisonSet, IdealPoint, ItemEmbedding, MetricMatrix, Observations,
};

pub const SCHEMA_VERSION: &str = "1";

pub fn format_f64(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v}").expect("formatting f64 cannot fail");
    s
}

fn as_row_matrix(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, v.len(), v.as_slice())
}

fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .with_context(|| format!("{}:{}: bad number {tok:?}", path.display(), lineno + 1))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                bail!(
                    "{}:{}: ragged row ({} vs {} columns)",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    first.len()
                );
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: empty matrix file", path.display());
    }
    let nrows = rows.len();
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn write_manifest(path: &Path, entries: &BTreeMap<String, String>) -> Result<()> {
    let mut out = String::new();
    for (k, v) in entries {
        out.push_str(&format!("{k} = {v}\n"));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_manifest(path: &Path) -> Result<BTreeMap<String, String>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{}: manifest line without '=': {line:?}", path.display());
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Ground-truth-optional instance contents.
pub struct InstanceData {
    pub x: ItemEmbedding,
    pub u_true: Option<IdealPoint>,
    pub m_true: Option<MetricMatrix>,
    pub manifest: BTreeMap<String, String>,
}

pub fn write_instance(dir: &Path, data: &InstanceData) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_matrix(&dir.join("items.csv"), data.x.matrix())?;
    if let Some(u) = &data.u_true {
        write_matrix(&dir.join("ideal_point.csv"), &as_row_matrix(u.as_vector()))?;
    }
    if let Some(m) = &data.m_true {
        write_matrix(&dir.join("metric.csv"), m.matrix())?;
    }
    let mut manifest = data.manifest.clone();
    manifest.insert("schema_version".into(), SCHEMA_VERSION.into());
    manifest.insert("n".into(), data.x.n_items().to_string());
    manifest.insert("d".into(), data.x.dim().to_string());
    write_manifest(&dir.join("manifest.txt"), &manifest)
}

pub fn read_instance(dir: &Path) -> Result<InstanceData> {
    let manifest = read_manifest(&dir.join("manifest.txt"))?;
    let x = ItemEmbedding::new(read_matrix(&dir.join("items.csv"))?)?;
    let u_path = dir.join("ideal_point.csv");
    let u_true = if u_path.exists() {
        let row = read_matrix(&u_path)?;
        if row.nrows() != 1 {
            bail!("{}: expected a single row", u_path.display());
        }
        Some(IdealPoint::new(row.row(0).transpose())?)
    } else {
        None
    };
    let m_path = dir.join("metric.csv");
    let m_true = if m_path.exists() {
        Some(MetricMatrix::new(read_matrix(&m_path)?)?)
    } else {
        None
    };
    Ok(InstanceData {
        x,
        u_true,
        m_true,
        manifest,
    })
}

pub fn write_comparisons(path: &Path, omega: &ComparisonSet, y: &Observations) -> Result<()> {
    if y.len() != omega.len() {
        bail!("comparison/observation length mismatch");
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "j", "y"])?;
    for (k, &(i, j)) in omega.pairs().iter().enumerate() {
        w.write_record([
            i.to_string(),
            j.to_string(),
            format_f64(y.values()[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_comparisons(path: &Path, n_items: usize) -> Result<(ComparisonSet, Observations)> {
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut pairs = Vec::new();
    let mut y = Vec::new();
    for record in r.records() {
        let record = record?;
        if record.len() != 3 {
            bail!("{}: expected 3 columns", path.display());
        }
        pairs.push((record[0].parse::<usize>()?, record[1].parse::<usize>()?));
        y.push(record[2].parse::<f64>()?);
    }
    Ok((
        ComparisonSet::new(pairs, n_items)?,
        Observations::new(y)?,
    ))
}

pub fn write_estimate(
    dir: &Path,
    est: &Estimate,
    extra: &BTreeMap<String, String>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_matrix(&dir.join("m_hat.csv"), est.m_hat.matrix())?;
    write_matrix(&dir.join("u_hat.csv"), &as_row_matrix(est.u_hat.as_vector()))?;
    let mut w = csv::Writer::from_path(dir.join("ranking.csv"))?;
    w.write_record(["position", "item"])?;
    for (pos, item) in est.ranking.iter().enumerate() {
        w.write_record([pos.to_string(), item.to_string()])?;
    }
    w.flush()?;
    let mut manifest = extra.clone();
    manifest.insert("schema_version".into(), SCHEMA_VERSION.into());
    manifest.insert("solver_status".into(), est.solver_status.to_string());
    manifest.insert("iters".into(), est.iters.to_string());
    write_manifest(&dir.join("estimate.txt"), &manifest)
}

/// Estimate contents reloaded from disk (ranking included).
pub struct EstimateData {
    pub m_hat: MetricMatrix,
    pub u_hat: IdealPoint,
    pub ranking: Vec<usize>,
    pub manifest: BTreeMap<String, String>,
}

pub fn read_estimate(dir: &Path) -> Result<EstimateData> {
    let m_hat = MetricMatrix::new(read_matrix(&dir.join("m_hat.csv"))?)?;
    let row = read_matrix(&dir.join("u_hat.csv"))?;
    if row.nrows() != 1 {
        bail!("u_hat.csv: expected a single row");
    }
    let u_hat = IdealPoint::new(row.row(0).transpose())?;
    let mut r = csv::Reader::from_path(dir.join("ranking.csv"))?;
    let mut ranking = Vec::new();
    for record in r.records() {
        let record = record?;
        ranking.push(record[1].parse::<usize>()?);
    }
    let manifest = read_manifest(&dir.join("estimate.txt"))?;
    Ok(EstimateData {
        m_hat,
        u_hat,
        ranking,
        manifest,
    })
}

/// Reads a metric matrix alone (for reporting on a fitted metric).
pub fn read_metric(path: &Path) -> Result<MetricMatrix> {
    Ok(MetricMatrix::new(read_matrix(path)?)?)
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.nrows() != 1 {
        bail!("{}: expected a single row", path.display());
    }
    Ok(m.row(0).transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn instance_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x = ItemEmbedding::new(dmatrix![1.5, -0.25; 0.125, 2.0; 0.1, 0.2]).unwrap();
        let u = IdealPoint::new(nalgebra::dvector![0.3, -0.7]).unwrap();
        let m = MetricMatrix::new(dmatrix![2.0, 0.5; 0.5, 1.0]).unwrap();
        let data = InstanceData {
            x,
            u_true: Some(u),
            m_true: Some(m),
            manifest: BTreeMap::from([("seed".to_string(), "7".to_string())]),
        };
        write_instance(dir.path(), &data).unwrap();
        let back = read_instance(dir.path()).unwrap();
        assert_eq!(back.x.matrix(), data.x.matrix());
        assert_eq!(
            back.u_true.unwrap().as_vector(),
            data.u_true.as_ref().unwrap().as_vector()
        );
        assert_eq!(
            back.m_true.unwrap().matrix(),
            data.m_true.as_ref().unwrap().matrix()
        );
        assert_eq!(back.manifest.get("seed").unwrap(), "7");
        assert_eq!(back.manifest.get("schema_version").unwrap(), "1");
    }

    #[test]
    fn comparisons_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("comparisons.csv");
        let omega = ComparisonSet::new(vec![(0, 1), (2, 0)], 3).unwrap();
        let y = Observations::new(vec![1.0, -1.0]).unwrap();
        write_comparisons(&path, &omega, &y).unwrap();
        let (omega2, y2) = read_comparisons(&path, 3).unwrap();
        assert_eq!(omega.pairs(), omega2.pairs());
        assert_eq!(y.values(), y2.values());
    }

    #[test]
    fn float_round_trip_is_exact() {
        let values = [1.0 / 3.0, f64::MIN_POSITIVE, 1e300, -0.1, 2.5e-17];
        for v in values {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
