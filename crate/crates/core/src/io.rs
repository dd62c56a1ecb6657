//! On-disk formats: a JSON patch manifest pointing at one headerless CSV per
//! patch, plus plain CSV matrices and label files. Indices are 0-based.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{QuiltError, Result};
use crate::linalg::Matrix;
use crate::metrics::LabelVector;
use crate::patches::{Patch, PatchSet};
use crate::simgen::MixtureGroundTruth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchEntry {
    pub features: Vec<usize>,
    pub samples: Vec<usize>,
    /// Relative paths resolve against the manifest's directory.
    pub data_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchManifest {
    pub n: usize,
    pub p: usize,
    pub patches: Vec<PatchEntry>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> QuiltError + '_ {
    move |source| QuiltError::Io { path: path.display().to_string(), source }
}

fn parse_err(path: &Path, detail: impl Into<String>) -> QuiltError {
    QuiltError::Parse { path: path.display().to_string(), detail: detail.into() }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn matrix_to_csv(x: &Matrix) -> String {
    let mut out = String::with_capacity(x.len() * 20);
    for i in 0..x.nrows() {
        let row: Vec<String> = x.row(i).iter().map(|&v| format_f64(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_matrix_csv(text: &str, path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(parse_err(path, format!("row {line} has {} fields, expected {c}", record.len())))
            }
            _ => {}
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, format!("row {line}, column {j}: `{field}` is not a number")))?;
            values.push(v);
        }
        rows += 1;
    }
    Ok(Matrix::from_row_slice(rows, cols.unwrap_or(0), &values))
}

pub fn write_matrix_csv(path: &Path, x: &Matrix) -> Result<()> {
    fs::write(path, matrix_to_csv(x)).map_err(io_err(path))
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_matrix_csv(&text, path)
}

/// One label per line.
pub fn write_labels_csv(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_labels_csv(path: &Path) -> Result<LabelVector> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut labels = Vec::new();
    for (line, raw) in text.lines().enumerate() {
        let field = raw.trim();
        if field.is_empty() {
            continue;
        }
        let l: usize = field
            .parse()
            .map_err(|_| parse_err(path, format!("line {line}: `{field}` is not a non-negative integer")))?;
        labels.push(l);
    }
    if labels.is_empty() {
        return Err(parse_err(path, "no labels found"));
    }
    LabelVector::from_labels(labels)
}

pub fn read_manifest(path: &Path) -> Result<PatchManifest> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))
}

/// Load and validate a patch set from its manifest.
pub fn load_patch_set(manifest_path: &Path) -> Result<PatchSet> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut patches = Vec::with_capacity(manifest.patches.len());
    for (m, entry) in manifest.patches.into_iter().enumerate() {
        let file = base.join(&entry.data_file);
        let data = read_matrix_csv(&file)?;
        if data.shape() != (entry.features.len(), entry.samples.len()) {
            return Err(parse_err(
                &file,
                format!(
                    "patch {m} data is {}x{} but the manifest lists {} features and {} samples",
                    data.nrows(),
                    data.ncols(),
                    entry.features.len(),
                    entry.samples.len()
                ),
            ));
        }
        patches.push(Patch::new(entry.features, entry.samples, data));
    }
    PatchSet::new(manifest.n, manifest.p, patches)
}

/// Write `patch_<m>.csv` files and `manifest.json` into `dir`; returns the
/// manifest path.
pub fn save_patch_set(ps: &PatchSet, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let width = ps.len().saturating_sub(1).to_string().len();
    let mut entries = Vec::with_capacity(ps.len());
    for (m, patch) in ps.patches().iter().enumerate() {
        let name = format!("patch_{m:0width$}.csv");
        write_matrix_csv(&dir.join(&name), &patch.data)?;
        entries.push(PatchEntry {
            features: patch.features.clone(),
            samples: patch.samples.clone(),
            data_file: name,
        });
    }
    let manifest = PatchManifest { n: ps.n(), p: ps.p(), patches: entries };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| parse_err(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Scalar ground-truth summary; centroids and labels live in sibling CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub rank: usize,
    pub d: f64,
    pub delta: f64,
    pub delta_m: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
    /// `||E[T_m, I_m]||` per patch.
    pub noise_norms: Vec<f64>,
    pub theta_file: String,
    pub labels_file: String,
}

/// Write `truth.json`, `theta.csv` (`K x p`) and `labels.csv` into `dir`.
pub fn save_ground_truth(dir: &Path, gt: &MixtureGroundTruth, noise_norms: &[f64]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_matrix_csv(&dir.join("theta.csv"), &gt.theta)?;
    write_labels_csv(&dir.join("labels.csv"), gt.z.labels())?;
    let file = TruthFile {
        rank: gt.rank,
        d: gt.d,
        delta: gt.delta,
        delta_m: gt.delta_m.clone(),
        cluster_sizes: gt.cluster_sizes.clone(),
        noise_norms: noise_norms.to_vec(),
        theta_file: "theta.csv".into(),
        labels_file: "labels.csv".into(),
    };
    let path = dir.join("truth.json");
    write_json(&path, &file)?;
    Ok(path)
}

pub fn load_ground_truth(path: &Path) -> Result<(MixtureGroundTruth, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let file: TruthFile = serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let theta = read_matrix_csv(&base.join(&file.theta_file))?;
    let z = read_labels_csv(&base.join(&file.labels_file))?.with_k(theta.nrows())?;
    let mut gt = MixtureGroundTruth::new(theta, z, file.rank, file.d)?;
    gt.delta_m = file.delta_m;
    Ok((gt, file.noise_norms))
}
