use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use mrseq_core::class::argmax;
use mrseq_core::geometry::DEFAULT_OVERLAP_TOL;
use mrseq_core::harness::{load_ensemble, mean_probabilities, HarnessError, Method, SplitName, ENSEMBLE_MANIFEST};
use mrseq_core::provenance::Provenance;
use mrseq_core::SeqClass;
use rayon::prelude::*;
use serde::Serialize;

use super::train::{build_samples, SplitPlanFile};
use crate::io::{config_hash, read_text, sha256_hex, write_rows, PredictionRow, PREDICTION_HEADER};
use crate::scan::{scan_directory, ScannedSeries};
use crate::{require_dir, require_file, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Ensemble directory written by `train`.
    #[arg(long)]
    pub ensemble: PathBuf,
    /// DICOM root to classify.
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Expected method; a different ensemble method is a mode mismatch.
    #[arg(long)]
    pub method: Option<Method>,
    /// Restrict to the patients of one split of this plan.
    #[arg(long)]
    pub split_plan: Option<PathBuf>,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    pub split: SplitName,
    #[arg(long, default_value_t = DEFAULT_OVERLAP_TOL)]
    pub overlap_tol: f64,
}

fn parse_split(s: &str) -> Result<SplitName, String> {
    match s.to_ascii_lowercase().as_str() {
        "train" => Ok(SplitName::Train),
        "val" => Ok(SplitName::Val),
        "test" => Ok(SplitName::Test),
        other => Err(format!("unknown split {other:?}")),
    }
}

#[derive(Serialize)]
struct Config {
    command: &'static str,
    ensemble_sha256: String,
    split: Option<SplitName>,
    overlap_tol: f64,
}

pub fn run(args: &Args) -> Result<(), CliError> {
    require_dir(&args.ensemble, "ensemble directory")?;
    require_dir(&args.data, "data directory")?;
    if let Some(p) = &args.split_plan {
        require_file(p, "split plan")?;
    }
    let manifest_text = read_text(&args.ensemble.join(ENSEMBLE_MANIFEST), "ensemble manifest")?;
    let ensemble = load_ensemble(&args.ensemble).map_err(|e| CliError::Input(format!("cannot load ensemble: {e}")))?;
    if let Some(m) = args.method.filter(|m| *m != ensemble.method) {
        return Err(CliError::Input(format!(
            "{}: asked for {m}",
            HarnessError::ModeMismatch(ensemble.method)
        )));
    }
    let prov = Provenance::new(
        ensemble.seed,
        config_hash(&Config {
            command: "classify",
            ensemble_sha256: sha256_hex(manifest_text.as_bytes()),
            split: args.split_plan.as_ref().map(|_| args.split),
            overlap_tol: args.overlap_tol,
        }),
    );

    let scan = scan_directory(&args.data, args.overlap_tol)?;
    let keep: Option<BTreeSet<String>> = match &args.split_plan {
        Some(p) => Some(
            SplitPlanFile::read(p)?
                .plan
                .patients(args.split)
                .into_iter()
                .map(String::from)
                .collect(),
        ),
        None => None,
    };
    let series: Vec<&ScannedSeries> = scan
        .series
        .iter()
        .filter(|s| keep.as_ref().is_none_or(|k| k.contains(&s.record.patient_id)))
        .collect();
    let samples = build_samples(&series, &BTreeMap::new(), ensemble.method)?;
    let rows: Vec<PredictionRow> = samples
        .par_iter()
        .zip(&series)
        .map(|(sample, s)| {
            let per = ensemble
                .member_probabilities(sample.input_for(ensemble.method))
                .map_err(|e| CliError::Input(format!("series {}: {e}", sample.series_uid)))?;
            let (mean, class) = mean_probabilities(&per);
            let members: Vec<String> = per.iter().map(|p| argmax(p).to_string()).collect();
            Ok(PredictionRow {
                series_uid: sample.series_uid.clone(),
                patient_id: sample.patient_id.clone(),
                collection: s.collection.clone(),
                method: ensemble.method.to_string(),
                predicted: SeqClass::from_index(class).map_or("?", SeqClass::as_str).to_string(),
                p_t2w: mean[0],
                p_dwi: mean[1],
                p_adc: mean[2],
                p_dce: mean[3],
                member_predictions: members.join(";"),
            })
        })
        .collect::<Result<_, CliError>>()?;
    write_rows(&args.out, &prov, PREDICTION_HEADER, &rows)?;
    println!("classified {} series with the {} ensemble", rows.len(), ensemble.method);
    Ok(())
}
