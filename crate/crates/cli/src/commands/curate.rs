use std::path::PathBuf;

use mrseq_core::geometry::OrientationClass;
use mrseq_core::labeling::{curate, load_rules, CurationInput, CURATION_HEADER, DEFAULT_RULES};
use mrseq_core::provenance::Provenance;
use serde::Serialize;

use crate::io::{config_hash, read_rows, read_text, sha256_hex, write_rows, ManifestRow};
use crate::{require_file, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Series manifest from `ingest`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Rule table CSV; the built-in table when omitted.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Curation report CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Serialize)]
struct Config {
    command: &'static str,
    rules_sha256: String,
}

struct Row(ManifestRow, OrientationClass);

impl CurationInput for Row {
    fn series_uid(&self) -> &str {
        &self.0.series_uid
    }
    fn description(&self) -> &str {
        &self.0.description
    }
    fn orientation(&self) -> OrientationClass {
        self.1
    }
}

pub fn run(args: &Args) -> Result<(), CliError> {
    require_file(&args.manifest, "manifest")?;
    let rules_text = match &args.rules {
        Some(path) => {
            require_file(path, "rule table")?;
            read_text(path, "rule table")?
        }
        None => DEFAULT_RULES.to_string(),
    };
    let rules = load_rules(&rules_text).map_err(|e| CliError::Input(format!("rule table: {e}")))?;
    let manifest: Vec<ManifestRow> = read_rows(&args.manifest, "manifest")?;
    let rows: Vec<Row> = manifest
        .into_iter()
        .map(|m| {
            let o = m.orientation.parse().unwrap_or(OrientationClass::Unknown);
            Row(m, o)
        })
        .collect();
    let result = curate(&rows, &rules);
    let prov = Provenance::new(
        args.seed,
        config_hash(&Config {
            command: "curate",
            rules_sha256: sha256_hex(rules_text.as_bytes()),
        }),
    );
    write_rows(&args.out, &prov, CURATION_HEADER, &result.report_rows())?;
    println!(
        "labeled {} excluded {} unmatched {} coverage {:.4}",
        result.labeled.len(),
        result.excluded.len(),
        result.unmatched.len(),
        result.coverage_fraction
    );
    Ok(())
}
