use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use mrseq_core::features::extract_raw;
use mrseq_core::geometry::DEFAULT_OVERLAP_TOL;
use mrseq_core::harness::{
    kfold_train, save_ensemble, split_patients, CollectionSplit, HarnessError, Method, Sample, SplitName, SplitPlan,
    TrainConfig,
};
use mrseq_core::imaging::{preprocess, MODEL_IMAGE_SIZE};
use mrseq_core::provenance::Provenance;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::read_labels;
use crate::io::{config_hash, read_text, sha256_hex, write_rows, write_text};
use crate::scan::{scan_directory, ScannedSeries};
use crate::{require_dir, require_file, CliError};

pub const SPLIT_PLAN_FILE: &str = "split_plan.json";
pub const ENSEMBLE_DIR: &str = "ensemble";
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
const LOG_HEADER: &[&str] = &["method", "fold", "epoch", "train_loss", "val_loss"];

#[derive(Debug, clap::Args)]
pub struct Args {
    /// DICOM root, scanned the same way as `ingest`.
    #[arg(long)]
    pub data: PathBuf,
    /// Curation report; only `labeled` series are used.
    #[arg(long)]
    pub curation: PathBuf,
    #[arg(long)]
    pub method: Method,
    /// Output directory for the split plan, ensemble and training log.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 2)]
    pub patience: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub min_delta: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    /// Train, validation and test fractions per collection.
    #[arg(long, default_value = "0.6,0.2,0.2", value_parser = parse_fractions)]
    pub fractions: Fractions,
    /// Collection whose patients all go to the test split (repeatable).
    #[arg(long = "test-only")]
    pub test_only: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_OVERLAP_TOL)]
    pub overlap_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fractions(pub [f64; 3]);

fn parse_fractions(s: &str) -> Result<Fractions, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let arr: [f64; 3] = parts
        .try_into()
        .map_err(|_| "expected three comma-separated fractions".to_string())?;
    Ok(Fractions(arr))
}

/// Split plan as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlanFile {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub plan: SplitPlan,
}

impl SplitPlanFile {
    pub fn read(path: &Path) -> Result<SplitPlanFile, CliError> {
        let text = read_text(path, "split plan")?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("bad split plan {}: {e}", path.display())))
    }
}

#[derive(Serialize)]
struct Config<'a> {
    command: &'static str,
    method: Method,
    k: usize,
    max_epochs: usize,
    patience: usize,
    min_delta: f64,
    batch_size: usize,
    fractions: [f64; 3],
    test_only: &'a [String],
    overlap_tol: f64,
    curation_sha256: String,
}

/// Test-only collections go wholly to the test split; the rest are split by
/// `fractions`. A patient already placed by the regular split is not repeated.
fn plan_splits(
    series: &[&ScannedSeries],
    fractions: [f64; 3],
    test_only: &BTreeSet<&str>,
    seed: u64,
) -> Result<SplitPlan, CliError> {
    let regular: Vec<(&str, &str)> = series
        .iter()
        .filter(|s| !test_only.contains(s.collection.as_str()))
        .map(|s| (s.record.patient_id.as_str(), s.collection.as_str()))
        .collect();
    let mut plan =
        split_patients(regular.iter().copied(), fractions, seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let placed: BTreeSet<String> = [SplitName::Train, SplitName::Val, SplitName::Test]
        .iter()
        .flat_map(|&s| plan.patients(s).into_iter().map(String::from).collect::<Vec<_>>())
        .collect();
    let mut held: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for s in series.iter().filter(|s| test_only.contains(s.collection.as_str())) {
        if !placed.contains(&s.record.patient_id) {
            held.entry(s.collection.clone())
                .or_default()
                .insert(s.record.patient_id.clone());
        }
    }
    for (collection, patients) in held {
        let entry = plan
            .collections
            .entry(collection)
            .or_insert_with(CollectionSplit::default);
        entry.test.extend(patients);
        entry.test.sort();
        entry.test.dedup();
    }
    Ok(plan)
}

/// Builds model inputs; images are decoded only for image methods.
pub(crate) fn build_samples(
    series: &[&ScannedSeries],
    labels: &BTreeMap<String, usize>,
    method: Method,
) -> Result<Vec<Sample>, CliError> {
    series
        .par_iter()
        .map(|s| {
            let uid = &s.record.series_instance_uid;
            let image = if method.needs_image() {
                Some(
                    preprocess(&s.record, &s.geometry, MODEL_IMAGE_SIZE)
                        .map_err(|e| CliError::Input(format!("series {uid}: {e}")))?,
                )
            } else {
                None
            };
            Ok(Sample {
                patient_id: s.record.patient_id.clone(),
                series_uid: uid.clone(),
                label: labels.get(uid).copied().unwrap_or(0),
                raw: extract_raw(&s.record, &s.geometry),
                image,
            })
        })
        .collect()
}

fn harness_error(e: HarnessError) -> CliError {
    match e {
        HarnessError::BadFractions(_)
        | HarnessError::TooFewPatients { .. }
        | HarnessError::DegenerateFold(_)
        | HarnessError::MissingImage(_)
        | HarnessError::ModeMismatch(_) => CliError::Input(e.to_string()),
        other => CliError::Internal(other.to_string()),
    }
}

pub fn run(args: &Args) -> Result<(), CliError> {
    require_dir(&args.data, "data directory")?;
    require_file(&args.curation, "curation report")?;
    if args.k < 2 || args.max_epochs == 0 || args.batch_size == 0 {
        return Err(CliError::Usage(
            "--k must be at least 2; --max-epochs and --batch-size positive".into(),
        ));
    }
    if !(args.min_delta.is_finite() && args.min_delta >= 0.0) {
        return Err(CliError::Usage("--min-delta must be a nonnegative number".into()));
    }
    let curation_text = read_text(&args.curation, "curation report")?;
    let labels: BTreeMap<String, usize> = read_labels(&args.curation)?
        .into_iter()
        .map(|(uid, c)| (uid, c.index()))
        .collect();
    let prov = Provenance::new(
        args.seed,
        config_hash(&Config {
            command: "train",
            method: args.method,
            k: args.k,
            max_epochs: args.max_epochs,
            patience: args.patience,
            min_delta: args.min_delta,
            batch_size: args.batch_size,
            fractions: args.fractions.0,
            test_only: &args.test_only,
            overlap_tol: args.overlap_tol,
            curation_sha256: sha256_hex(curation_text.as_bytes()),
        }),
    );

    let scan = scan_directory(&args.data, args.overlap_tol)?;
    let labeled: Vec<&ScannedSeries> = scan
        .series
        .iter()
        .filter(|s| labels.contains_key(&s.record.series_instance_uid))
        .collect();
    if labeled.is_empty() {
        return Err(CliError::Input(
            "no labeled series found under the data directory".into(),
        ));
    }
    let test_only: BTreeSet<&str> = args.test_only.iter().map(String::as_str).collect();
    let plan = plan_splits(&labeled, args.fractions.0, &test_only, args.seed)?;
    if !plan.is_disjoint() {
        return Err(CliError::Internal("split plan leaks patients between splits".into()));
    }
    let pool_patients: BTreeSet<String> = plan
        .patients(SplitName::Train)
        .union(&plan.patients(SplitName::Val))
        .map(|p| p.to_string())
        .collect();
    let pool_series: Vec<&ScannedSeries> = labeled
        .iter()
        .copied()
        .filter(|s| pool_patients.contains(&s.record.patient_id))
        .collect();
    let pool = build_samples(&pool_series, &labels, args.method)?;

    let config = TrainConfig {
        k: args.k,
        max_epochs: args.max_epochs,
        min_delta: args.min_delta,
        patience: args.patience,
        batch_size: args.batch_size,
        ..TrainConfig::default()
    };
    let ensemble = kfold_train(&pool, args.method, &config, args.seed).map_err(harness_error)?;

    let plan_file = SplitPlanFile {
        provenance: prov.clone(),
        plan,
    };
    let plan_json = serde_json::to_string_pretty(&plan_file).map_err(|e| CliError::Internal(e.to_string()))?;
    write_text(&args.out.join(SPLIT_PLAN_FILE), &(plan_json + "\n"))?;
    save_ensemble(&ensemble, &args.out.join(ENSEMBLE_DIR), Some(&prov)).map_err(harness_error)?;
    write_rows(&args.out.join(TRAINING_LOG_FILE), &prov, LOG_HEADER, &ensemble.log)?;
    println!(
        "trained {} ensemble: {} members on {} series from {} patients",
        args.method,
        ensemble.members.len(),
        pool.len(),
        pool_patients.len()
    );
    Ok(())
}
