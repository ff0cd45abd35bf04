use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::Format;
use crate::CliError;

/// Provenance written at the top of every emitted file.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub config_hash: String,
}

impl Meta {
    /// `settings` is the effective configuration of the command; its JSON
    /// encoding is hashed.
    pub fn new(command: &str, seed: Option<u64>, settings: &impl Serialize) -> Self {
        let json = serde_json::to_string(settings).expect("settings serialise");
        Self {
            tool: "lmdsw",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            config_hash: Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect(),
        }
    }

    pub fn comment(&self) -> String {
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
        format!(
            "# {} {} command={} seed={} config_hash={}\n",
            self.tool, self.version, self.command, seed, self.config_hash
        )
    }
}

pub fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::Input(format!("cannot create {}: {e}", p.display())))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize + ?Sized> {
    metadata: &'a Meta,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct Rows<'a, T: Serialize> {
    rows: &'a [T],
}

pub fn write_csv_rows<T: Serialize>(w: &mut dyn Write, meta: &Meta, rows: &[T]) -> Result<(), CliError> {
    w.write_all(meta.comment().as_bytes())?;
    let mut cw = csv::Writer::from_writer(w);
    for r in rows {
        cw.serialize(r)?;
    }
    cw.flush()?;
    Ok(())
}

/// Rows as CSV with a comment header, or as `{"metadata", "rows"}` JSON.
pub fn emit_rows<T: Serialize>(out: Option<&Path>, format: Format, meta: &Meta, rows: &[T]) -> Result<(), CliError> {
    let mut w = sink(out)?;
    match format {
        Format::Csv => write_csv_rows(&mut *w, meta, rows)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &Wrapped { metadata: meta, body: &Rows { rows } })?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A single record: one CSV row, or a JSON object merged with the
/// metadata. `full` is what JSON output carries; `flat` the CSV row.
pub fn emit_record<F: Serialize, J: Serialize>(
    out: Option<&Path>,
    format: Format,
    meta: &Meta,
    flat: &F,
    full: &J,
) -> Result<(), CliError> {
    let mut w = sink(out)?;
    match format {
        Format::Csv => write_csv_rows(&mut *w, meta, std::slice::from_ref(flat))?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &Wrapped { metadata: meta, body: full })?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}
