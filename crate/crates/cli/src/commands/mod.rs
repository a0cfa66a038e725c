pub mod classify;
pub mod curate;
pub mod evaluate;
pub mod ingest;
pub mod plot;
pub mod synth;
pub mod train;

use std::collections::BTreeMap;
use std::path::Path;

use mrseq_core::labeling::CurationRow;
use mrseq_core::SeqClass;

use crate::io::read_rows;
use crate::CliError;

/// Series UID → class for every `labeled` row of a curation report.
pub(crate) fn read_labels(path: &Path) -> Result<BTreeMap<String, SeqClass>, CliError> {
    let rows: Vec<CurationRow> = read_rows(path, "curation report")?;
    let mut labels = BTreeMap::new();
    for r in rows.into_iter().filter(|r| r.disposition == "labeled") {
        let class: SeqClass = r
            .value
            .parse()
            .map_err(|e| CliError::Input(format!("curation row {}: {e}", r.series_uid)))?;
        labels.insert(r.series_uid, class);
    }
    Ok(labels)
}
