use std::collections::BTreeSet;
use std::path::PathBuf;

use mrseq_core::evaluate::{
    confusion_matrix, f_beta, report_from_pairs, CONFUSION_HEADER, DEFAULT_BETA, REPORT_HEADER,
};
use mrseq_core::provenance::Provenance;
use mrseq_core::{SeqClass, NUM_CLASSES};
use serde::Serialize;

use super::read_labels;
use crate::io::{config_hash, read_rows, write_rows, PredictionRow};
use crate::{require_file, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Predictions CSV from `classify`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Curation report holding the true classes.
    #[arg(long)]
    pub truth: PathBuf,
    /// Per-class report CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Confusion matrix CSV; defaults to `confusion.csv` next to the report.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    /// Name written to the `split` column.
    #[arg(long, default_value = "test")]
    pub split_name: String,
    /// Only score series from these collections (repeatable).
    #[arg(long)]
    pub collection: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Serialize)]
struct Config<'a> {
    command: &'static str,
    beta: f64,
    split_name: &'a str,
    collection: &'a [String],
}

fn class_index(s: &str) -> Result<usize, CliError> {
    s.parse::<SeqClass>()
        .map(SeqClass::index)
        .or_else(|e| s.trim().parse::<usize>().ok().filter(|i| *i < NUM_CLASSES).ok_or(e))
        .map_err(|e| CliError::Input(format!("prediction {s:?}: {e}")))
}

pub fn run(args: &Args) -> Result<(), CliError> {
    require_file(&args.predictions, "predictions")?;
    require_file(&args.truth, "truth")?;
    if !(args.beta.is_finite() && args.beta > 0.0) {
        return Err(CliError::Usage("--beta must be positive".into()));
    }
    let labels = read_labels(&args.truth)?;
    let predictions: Vec<PredictionRow> = read_rows(&args.predictions, "predictions")?;
    let wanted: BTreeSet<&str> = args.collection.iter().map(String::as_str).collect();
    let scored: Vec<(&PredictionRow, usize)> = predictions
        .iter()
        .filter(|p| wanted.is_empty() || wanted.contains(p.collection.as_str()))
        .filter_map(|p| labels.get(&p.series_uid).map(|c| (p, c.index())))
        .collect();
    if scored.is_empty() {
        return Err(CliError::Input("no prediction matches a labeled series".into()));
    }
    let methods: BTreeSet<&str> = scored.iter().map(|(p, _)| p.method.as_str()).collect();
    if methods.len() > 1 {
        return Err(CliError::Input(format!("predictions mix methods {methods:?}")));
    }
    let method = methods.into_iter().next().unwrap_or_default();

    let mut pairs = Vec::with_capacity(scored.len());
    let mut member_pairs: Vec<Vec<(usize, usize)>> = Vec::new();
    for (p, truth) in &scored {
        pairs.push((*truth, class_index(&p.predicted)?));
        let members: Vec<&str> = p.member_predictions.split(';').filter(|s| !s.is_empty()).collect();
        if member_pairs.is_empty() {
            member_pairs = vec![Vec::new(); members.len()];
        }
        if members.len() != member_pairs.len() {
            return Err(CliError::Input(format!(
                "series {}: member count differs",
                p.series_uid
            )));
        }
        for (acc, m) in member_pairs.iter_mut().zip(members) {
            acc.push((*truth, class_index(m)?));
        }
    }
    let mut report =
        report_from_pairs(method, &args.split_name, &pairs, args.beta).map_err(|e| CliError::Input(e.to_string()))?;
    if !member_pairs.is_empty() {
        let k = member_pairs.len() as f64;
        let mut mean = vec![0.0; NUM_CLASSES];
        for mp in &member_pairs {
            let conf = confusion_matrix(mp).map_err(|e| CliError::Input(e.to_string()))?;
            for (c, m) in mean.iter_mut().enumerate() {
                *m += f_beta(&conf, c, args.beta) / k;
            }
        }
        report.fold_mean_f_beta = Some(mean);
    }

    let prov = Provenance::new(
        args.seed,
        config_hash(&Config {
            command: "evaluate",
            beta: args.beta,
            split_name: &args.split_name,
            collection: &args.collection,
        }),
    );
    let confusion_path = args
        .confusion
        .clone()
        .unwrap_or_else(|| args.out.with_file_name("confusion.csv"));
    write_rows(&args.out, &prov, REPORT_HEADER, &report.rows())?;
    write_rows(&confusion_path, &prov, CONFUSION_HEADER, &report.confusion_rows())?;
    for row in report.rows() {
        println!("{} {} {} f_beta={:.4}", row.method, row.split, row.class, row.f_beta);
    }
    Ok(())
}
