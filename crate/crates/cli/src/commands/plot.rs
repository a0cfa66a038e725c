use std::collections::BTreeMap;
use std::path::PathBuf;

use mrseq_core::labeling::CurationRow;
use mrseq_core::provenance::Provenance;
use mrseq_core::synth::{export_distribution_plot, PlotRow, SynthError};
use serde::Serialize;

use crate::io::{config_hash, read_rows, write_text, ManifestRow};
use crate::{require_file, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Series manifest from `ingest`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Curation report used to colour lines by class.
    #[arg(long)]
    pub curation: Option<PathBuf>,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[arg(long)]
    pub out_html: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Serialize)]
struct Config {
    command: &'static str,
    labelled: bool,
}

pub fn run(args: &Args) -> Result<(), CliError> {
    require_file(&args.manifest, "manifest")?;
    let labels: BTreeMap<String, String> = match &args.curation {
        Some(path) => {
            require_file(path, "curation report")?;
            read_rows::<CurationRow>(path, "curation report")?
                .into_iter()
                .map(|r| {
                    let label = match r.disposition.as_str() {
                        "labeled" => r.value,
                        "excluded" => "Excluded".to_string(),
                        _ => "Unmatched".to_string(),
                    };
                    (r.series_uid, label)
                })
                .collect()
        }
        None => BTreeMap::new(),
    };
    let manifest: Vec<ManifestRow> = read_rows(&args.manifest, "manifest")?;
    let rows: Vec<PlotRow> = manifest
        .into_iter()
        .map(|m| PlotRow {
            label: labels.get(&m.series_uid).cloned().unwrap_or_else(|| "Unlabeled".into()),
            series_uid: m.series_uid,
            repetition_time: m.repetition_time,
            echo_time: m.echo_time,
            flip_angle: m.flip_angle,
            contrast_present: m.contrast_present,
            is4d: m.is4d,
        })
        .collect();
    let prov = Provenance::new(
        args.seed,
        config_hash(&Config {
            command: "plot",
            labelled: args.curation.is_some(),
        }),
    );
    let plot = export_distribution_plot(&rows, Some(&prov)).map_err(|e| match e {
        SynthError::EmptyTable => CliError::Input("manifest has no series to plot".into()),
        other => CliError::Internal(other.to_string()),
    })?;
    write_text(&args.out_csv, &plot.csv)?;
    write_text(&args.out_html, &plot.html)?;
    println!("plotted {} series", rows.len());
    Ok(())
}
