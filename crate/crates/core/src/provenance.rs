//! Provenance stamps and CSV helpers shared by every written artifact.

use std::io::{self, Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const TOOL_NAME: &str = "mrseq";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Provenance {
        Provenance {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            seed,
            config_hash: config_hash.into(),
        }
    }

    pub fn comment_line(&self) -> String {
        format!(
            "# {} {} seed={} config={}",
            self.tool, self.version, self.seed, self.config_hash
        )
    }
}

/// Writes rows as CSV, preceded by a `#` provenance comment when given.
pub fn write_csv<W: Write, T: Serialize>(mut out: W, provenance: Option<&Provenance>, rows: &[T]) -> io::Result<()> {
    if let Some(p) = provenance {
        writeln!(out, "{}", p.comment_line())?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for row in rows {
        w.serialize(row).map_err(io::Error::other)?;
    }
    w.flush()
}

/// Writes a header-only CSV when there are no rows, so empty outputs still
/// carry their schema.
pub fn write_csv_with_header<W: Write, T: Serialize>(
    mut out: W,
    provenance: Option<&Provenance>,
    header: &[&str],
    rows: &[T],
) -> io::Result<()> {
    if !rows.is_empty() {
        return write_csv(out, provenance, rows);
    }
    if let Some(p) = provenance {
        writeln!(out, "{}", p.comment_line())?;
    }
    writeln!(out, "{}", header.join(","))
}

/// Reads CSV rows, skipping `#` comment lines.
pub fn read_csv<R: Read, T: DeserializeOwned>(input: R) -> Result<Vec<T>, csv::Error> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input)
        .deserialize()
        .collect()
}
