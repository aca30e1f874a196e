//! Model files, data files and report output.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, TruncationPolicy};
use crate::solver::{FittedModel, ScatteredData};
use crate::torus::{FrequencyBound, TorusPoint};

pub const MODEL_VERSION: &str = "torus-fit-model/1";
pub const REPORT_VERSION: &str = "torus-fit-report/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Seconds since the Unix epoch.
    pub created: u64,
    pub config_hash: String,
}

/// On-disk form of a fitted model. Floats are written in their shortest
/// round-trip decimal form, so loading reproduces every bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: String,
    pub m: usize,
    pub k: u32,
    pub lambda: f64,
    /// Empty for the full kernel.
    pub omega: Vec<u32>,
    /// Series radius of the full kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<u64>,
    pub points: Vec<Vec<f64>>,
    pub coeffs: Vec<f64>,
    pub provenance: Provenance,
}

impl ModelFile {
    pub fn from_model(model: &FittedModel, config_hash: &str) -> Result<Self> {
        let spec = model.spec();
        let truncation_radius = if spec.omega().is_none() { Some(spec.resolve_radius()?) } else { None };
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(ModelFile {
            version: MODEL_VERSION.to_string(),
            m: spec.dim(),
            k: spec.k(),
            lambda: spec.lambda(),
            omega: spec.omega().map(|w| w.as_slice().to_vec()).unwrap_or_default(),
            truncation_radius,
            points: model.points().iter().map(|p| p.coords().to_vec()).collect(),
            coeffs: model.coeffs().to_vec(),
            provenance: Provenance { created, config_hash: config_hash.to_string() },
        })
    }

    pub fn to_model(&self) -> Result<FittedModel> {
        if self.version != MODEL_VERSION {
            return Err(Error::Input(format!("unsupported model version '{}'", self.version)));
        }
        let spec = if self.omega.is_empty() {
            let r = self
                .truncation_radius
                .ok_or_else(|| Error::Input("full-kernel model lacks a truncation radius".into()))?;
            KernelSpec::full(self.m, self.k, self.lambda)?.with_truncation(TruncationPolicy::Radius(r))?
        } else {
            if self.omega.len() != self.m {
                return Err(Error::Input(format!("ω has {} entries for dimension {}", self.omega.len(), self.m)));
            }
            KernelSpec::truncated(FrequencyBound::new(self.omega.clone()), self.k, self.lambda)?
        };
        let points = self.points.iter().map(|c| TorusPoint::wrap(c)).collect::<Result<Vec<_>>>()?;
        FittedModel::from_parts(points, self.coeffs.clone(), spec)
    }
}

pub fn save_model(model: &FittedModel, config_hash: &str, path: &Path) -> Result<()> {
    let file = ModelFile::from_model(model, config_hash)?;
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_model(path: &Path) -> Result<FittedModel> {
    let text = fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    file.to_model()
}

/// Parses whitespace-separated rows of numbers with `#` comments. Every row
/// must have `width` columns (or the width of the first row when `None`).
pub fn parse_table(text: &str, path: &str, width: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut expected = width;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { path: path.to_string(), line: i + 1, msg };
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(format!("'{tok}' is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match expected {
            Some(w) if w != row.len() => {
                return Err(parse_err(format!("expected {w} columns, found {}", row.len())));
            }
            None => expected = Some(row.len()),
            _ => {}
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Data file: `m` coordinates then the value on each line.
pub fn parse_data(text: &str, path: &str) -> Result<ScatteredData> {
    let rows = parse_table(text, path, None)?;
    if rows.is_empty() {
        return Err(Error::Parse { path: path.to_string(), line: 0, msg: "no data rows".into() });
    }
    if rows[0].len() < 2 {
        return Err(Error::Parse { path: path.to_string(), line: 1, msg: "need at least one coordinate and a value".into() });
    }
    let mut points = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for row in rows {
        let (v, x) = row.split_last().expect("non-empty row");
        points.push(TorusPoint::wrap(x)?);
        values.push(*v);
    }
    ScatteredData::new(points, values)
}

pub fn read_data(path: &Path) -> Result<ScatteredData> {
    let text = fs::read_to_string(path)?;
    parse_data(&text, &path.display().to_string())
}

/// Query file: `m` coordinates per line.
pub fn read_queries(path: &Path, m: usize) -> Result<Vec<TorusPoint>> {
    let text = fs::read_to_string(path)?;
    let rows = parse_table(&text, &path.display().to_string(), Some(m))?;
    rows.iter().map(|r| TorusPoint::wrap(r)).collect()
}

/// Hex SHA-256 of a serializable configuration's JSON form.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Input(format!("'{}' is not a file path", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Sidecar path for a report: `report.csv` becomes `report.csv.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Formats an optional float for CSV: empty when absent.
pub fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{evaluate, fit};

    #[test]
    fn parse_reports_line_numbers() {
        let text = "# header\n0.1 1.0\n\n0.5 2.0 # trailing\n0.7 x\n";
        match parse_data(text, "d.txt") {
            Err(Error::Parse { line: 5, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_data("0.1 0.2 1\n0.3 1\n", "d.txt") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        let d = parse_data(&text[..text.len() - 6], "d.txt").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.values(), &[1.0, 2.0]);
        assert!(parse_data("# nothing\n", "d.txt").is_err());
        assert!(parse_data("0.5\n", "d.txt").is_err());
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let data = parse_data("0.1 1.0\n0.35 -0.2\n0.8 0.4\n", "mem").unwrap();
        for spec in [
            KernelSpec::truncated(FrequencyBound::new(vec![5]), 1, 7.3).unwrap(),
            KernelSpec::full(1, 1, 3.0).unwrap().with_truncation(TruncationPolicy::Radius(300)).unwrap(),
        ] {
            let model = fit(&data, &spec).unwrap();
            let path = dir.path().join("m.json");
            save_model(&model, "abc", &path).unwrap();
            let back = load_model(&path).unwrap();
            assert_eq!(back.coeffs(), model.coeffs());
            for x in [0.0, 0.123456789, 0.9] {
                let p = TorusPoint::wrap(&[x]).unwrap();
                assert_eq!(evaluate(&back, &p).unwrap().to_bits(), evaluate(&model, &p).unwrap().to_bits());
            }
        }
    }

    #[test]
    fn atomic_write_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_atomic(&p, b"a\n").unwrap();
        write_atomic(&p, b"b\n").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "b\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(sidecar_path(&p).to_string_lossy().ends_with("r.csv.meta.json"));
    }

    #[test]
    fn hash_is_stable() {
        let a = config_hash(&vec![1.0, 2.0]).unwrap();
        assert_eq!(a, config_hash(&vec![1.0, 2.0]).unwrap());
        assert_ne!(a, config_hash(&vec![1.0, 2.5]).unwrap());
        assert_eq!(a.len(), 64);
    }
}
