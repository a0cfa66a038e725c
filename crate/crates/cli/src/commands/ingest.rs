use std::path::PathBuf;

use mrseq_core::features::extract_raw;
use mrseq_core::geometry::DEFAULT_OVERLAP_TOL;
use mrseq_core::provenance::Provenance;
use serde::Serialize;

use crate::io::{config_hash, write_rows, ManifestRow, MANIFEST_HEADER, SKIP_HEADER};
use crate::scan::{scan_directory, ScannedSeries};
use crate::{require_dir, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Root directory to scan recursively.
    pub root: PathBuf,
    /// Series manifest CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Skipped-file CSV; defaults to `skipped.csv` next to the manifest.
    #[arg(long)]
    pub skipped: Option<PathBuf>,
    /// Slice-offset tolerance in mm for overlap detection.
    #[arg(long, default_value_t = DEFAULT_OVERLAP_TOL)]
    pub overlap_tol: f64,
    /// Recorded in the provenance line; ingest itself draws no random numbers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Serialize)]
struct Config {
    command: &'static str,
    overlap_tol: f64,
}

pub(crate) fn manifest_row(s: &ScannedSeries) -> ManifestRow {
    let raw = extract_raw(&s.record, &s.geometry);
    ManifestRow {
        series_uid: s.record.series_instance_uid.clone(),
        patient_id: s.record.patient_id.clone(),
        collection: s.collection.clone(),
        description: s.record.series_description.clone(),
        instances: s.record.instances.len(),
        orientation: s.geometry.orientation_class.as_str().to_string(),
        is4d: s.geometry.is4d,
        distinct_positions: s.geometry.distinct_positions,
        repetition_time: raw.repetition_time,
        echo_time: raw.echo_time,
        flip_angle: raw.flip_angle,
        scanning_sequence: raw.scanning_sequence.join("\\"),
        contrast_present: raw.contrast_present,
    }
}

pub fn run(args: &Args) -> Result<(), CliError> {
    require_dir(&args.root, "scan root")?;
    if !(args.overlap_tol.is_finite() && args.overlap_tol >= 0.0) {
        return Err(CliError::Usage("--overlap-tol must be a nonnegative number".into()));
    }
    let skipped_path = args
        .skipped
        .clone()
        .unwrap_or_else(|| args.out.with_file_name("skipped.csv"));
    let prov = Provenance::new(
        args.seed,
        config_hash(&Config {
            command: "ingest",
            overlap_tol: args.overlap_tol,
        }),
    );
    let scan = scan_directory(&args.root, args.overlap_tol)?;
    let rows: Vec<ManifestRow> = scan.series.iter().map(manifest_row).collect();
    write_rows(&args.out, &prov, MANIFEST_HEADER, &rows)?;
    write_rows(&skipped_path, &prov, SKIP_HEADER, &scan.skipped)?;
    println!("ingested {} series; skipped {} files", rows.len(), scan.skipped.len());
    Ok(())
}
