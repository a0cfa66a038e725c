//! Row types of the CSV artifacts and small file helpers.

use std::fs;
use std::path::Path;

use mrseq_core::provenance::{read_csv, write_csv_with_header, Provenance};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// One row per series of the ingest manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub series_uid: String,
    pub patient_id: String,
    pub collection: String,
    pub description: String,
    pub instances: usize,
    pub orientation: String,
    pub is4d: bool,
    pub distinct_positions: usize,
    pub repetition_time: Option<f64>,
    pub echo_time: Option<f64>,
    pub flip_angle: Option<f64>,
    /// Codes joined with a backslash, as in DICOM.
    pub scanning_sequence: String,
    pub contrast_present: bool,
}

pub const MANIFEST_HEADER: &[&str] = &[
    "series_uid",
    "patient_id",
    "collection",
    "description",
    "instances",
    "orientation",
    "is4d",
    "distinct_positions",
    "repetition_time",
    "echo_time",
    "flip_angle",
    "scanning_sequence",
    "contrast_present",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRow {
    pub path: String,
    pub reason: String,
}

pub const SKIP_HEADER: &[&str] = &["path", "reason"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub series_uid: String,
    pub patient_id: String,
    pub collection: String,
    pub method: String,
    pub predicted: String,
    pub p_t2w: f64,
    pub p_dwi: f64,
    pub p_adc: f64,
    pub p_dce: f64,
    /// Each member's argmax class, `;`-separated in member order.
    pub member_predictions: String,
}

pub const PREDICTION_HEADER: &[&str] = &[
    "series_uid",
    "patient_id",
    "collection",
    "method",
    "predicted",
    "p_t2w",
    "p_dwi",
    "p_adc",
    "p_dce",
    "member_predictions",
];

/// First 16 hex digits of the SHA-256 of the config's JSON form.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&json))[..16].to_string()
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Input(format!("cannot create {}: {e}", parent.display())))?;
    }
    Ok(())
}

pub(crate) fn write_rows<T: Serialize>(
    path: &Path,
    provenance: &Provenance,
    header: &[&str],
    rows: &[T],
) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut buf = Vec::new();
    write_csv_with_header(&mut buf, Some(provenance), header, rows)?;
    fs::write(path, buf).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn read_rows<T: DeserializeOwned>(path: &Path, what: &str) -> Result<Vec<T>, CliError> {
    let file =
        fs::File::open(path).map_err(|e| CliError::Input(format!("cannot open {what} {}: {e}", path.display())))?;
    read_csv(file).map_err(|e| CliError::Input(format!("bad {what} {}: {e}", path.display())))
}

pub(crate) fn read_text(path: &Path, what: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {what} {}: {e}", path.display())))
}
