//! Dataset files: a CSV of samples plus a JSON sidecar with the normalisers,
//! split and ramp metadata.
//!
//! CSV header: the 11 feature names prefixed `f_`, the 5 target names, then
//! `raw_load`. Values are normalised except `raw_load` (kW). Floats are written
//! in shortest round-trip form so a save/load cycle is exact.

use std::fs::File;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::dataset::{Dataset, DatasetMeta, Sample, FEATURE_NAMES, N_FEATURES, N_TARGETS, TARGET_NAMES};

/// `data/train.csv` -> `data/train.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn csv_header() -> Vec<String> {
    FEATURE_NAMES
        .iter()
        .map(|f| format!("f_{f}"))
        .chain(TARGET_NAMES.iter().map(|t| t.to_string()))
        .chain(std::iter::once("raw_load".to_string()))
        .collect()
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(csv_header())?;
    for s in &dataset.samples {
        let row = s
            .features
            .iter()
            .chain(&s.targets)
            .chain(std::iter::once(&s.raw_load))
            .map(|v| v.to_string());
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let meta_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&dataset.meta)?;
    std::fs::write(&meta_path, json).map_err(|e| Error::io(meta_path, e))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let meta_path = sidecar_path(path);
    if !meta_path.exists() {
        return Err(Error::MissingMetadata(meta_path));
    }
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text)?;
    if meta.format != DatasetMeta::FORMAT || meta.version != DatasetMeta::VERSION {
        return Err(Error::Parse {
            path: meta_path,
            line: 1,
            msg: format!("unsupported dataset format {} v{}", meta.format, meta.version),
        });
    }

    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != csv_header() {
        return Err(parse_err(1, format!("unexpected header {header:?}")));
    }
    let width = N_FEATURES + N_TARGETS + 1;
    let mut samples = Vec::new();
    for record in r.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_err(line, format!("expected {width} columns, found {}", record.len())));
        }
        let values = record
            .iter()
            .map(|v| v.trim().parse::<f64>().map_err(|e| parse_err(line, format!("bad number {v:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        samples.push(Sample {
            features: values[..N_FEATURES].to_vec(),
            targets: values[N_FEATURES..N_FEATURES + N_TARGETS].to_vec(),
            raw_load: values[width - 1],
        });
    }

    if meta.split.train.iter().chain(&meta.split.test).any(|&i| i >= samples.len()) {
        return Err(parse_err(0, format!("split indices exceed the {} rows in the file", samples.len())));
    }
    Ok(Dataset { samples, meta })
}
