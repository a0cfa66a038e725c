//! Recursive DICOM directory scan shared by every subcommand that reads images.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mrseq_core::dicom::{group_series, parse_json_instance, parse_part10, InstanceMetadata, SeriesRecord};
use mrseq_core::geometry::{compute_geometry, SeriesGeometry};
use rayon::prelude::*;
use walkdir::WalkDir;

use crate::io::SkipRow;
use crate::CliError;

/// Collection name for files sitting directly in the scan root.
pub const ROOT_COLLECTION: &str = "default";

#[derive(Debug, Clone, PartialEq)]
pub struct ScannedSeries {
    /// First path component under the scan root.
    pub collection: String,
    pub record: SeriesRecord,
    pub geometry: SeriesGeometry,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScanResult {
    /// Sorted by series UID.
    pub series: Vec<ScannedSeries>,
    /// Files that could not be read or parsed, in path order.
    pub skipped: Vec<SkipRow>,
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn parse_file(path: &Path) -> Result<InstanceMetadata, String> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
        parse_json_instance(&text).map_err(|e| e.to_string())
    } else {
        let bytes = fs::read(path).map_err(|e| e.to_string())?;
        parse_part10(&bytes).map_err(|e| e.to_string())
    }
}

/// Walks `root` in lexicographic order, parses every file (`.json` as the
/// DICOM JSON model, anything else as Part-10) and groups series.
pub fn scan_directory(root: &Path, overlap_tol: f64) -> Result<ScanResult, CliError> {
    fs::read_dir(root).map_err(|e| CliError::Input(format!("cannot read {}: {e}", root.display())))?;
    let mut files: Vec<PathBuf> = Vec::new();
    let mut skipped = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        match entry {
            Ok(e) if e.file_type().is_file() => files.push(e.into_path()),
            Ok(_) => {}
            Err(e) => skipped.push(SkipRow {
                path: e.path().map(|p| relative(root, p)).unwrap_or_default(),
                reason: e.to_string(),
            }),
        }
    }

    let parsed: Vec<(String, Result<InstanceMetadata, String>)> =
        files.par_iter().map(|p| (relative(root, p), parse_file(p))).collect();

    let mut collection_of: BTreeMap<String, String> = BTreeMap::new();
    let mut instances = Vec::new();
    for (rel, result) in parsed {
        match result {
            Ok(inst) => {
                let collection = match rel.split_once('/') {
                    Some((first, _)) => first.to_string(),
                    None => ROOT_COLLECTION.to_string(),
                };
                collection_of
                    .entry(inst.series_instance_uid.clone())
                    .and_modify(|c| {
                        if collection < *c {
                            *c = collection.clone();
                        }
                    })
                    .or_insert(collection);
                instances.push(inst);
            }
            Err(reason) => skipped.push(SkipRow { path: rel, reason }),
        }
    }
    skipped.sort_by(|a, b| a.path.cmp(&b.path));

    let records = group_series(instances).map_err(|e| CliError::Input(e.to_string()))?;
    let series = records
        .into_par_iter()
        .map(|record| ScannedSeries {
            collection: collection_of
                .get(&record.series_instance_uid)
                .cloned()
                .unwrap_or_else(|| ROOT_COLLECTION.to_string()),
            geometry: compute_geometry(&record, overlap_tol),
            record,
        })
        .collect();
    Ok(ScanResult { series, skipped })
}
