use std::io::Write;

use anyhow::Result;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// One checked property on one instance.
#[derive(Clone, Debug, Serialize)]
pub struct Record {
    pub name: String,
    /// Which property was checked.
    pub check: &'static str,
    pub passed: bool,
    pub values: Value,
}

impl Record {
    pub fn new(name: impl Into<String>, check: &'static str, passed: bool, values: Value) -> Self {
        Record { name: name.into(), check, passed, values }
    }
}

/// A witness row of the exhaustivity command.
#[derive(Clone, Debug, Serialize)]
pub struct WitnessRow {
    pub sequence: usize,
    pub index: usize,
    pub weight_bound: String,
    pub verified: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub config_hash: String,
    pub passed: bool,
    pub records: Vec<Record>,
    /// Set by the exhaustivity command only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<WitnessRow>>,
    /// Wall time; the only field that may differ between identical runs.
    pub timing_ms: u128,
}

pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Report {
    pub fn new(command: String, config_hash: String, records: Vec<Record>, witnesses: Option<Vec<WitnessRow>>, timing_ms: u128) -> Self {
        let passed = records.iter().all(|r| r.passed) && witnesses.iter().flatten().all(|w| w.verified);
        Report { command, config_hash, passed, records, witnesses, timing_ms }
    }

    /// JSON, or CSV of the witness rows when the command has them and of
    /// the records otherwise. CSV carries no timing.
    pub fn write<W: Write>(&self, out: W, format: Format) -> Result<()> {
        match format {
            Format::Json => {
                let mut out = out;
                serde_json::to_writer_pretty(&mut out, self)?;
                writeln!(out)?;
            }
            Format::Csv => {
                let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
                match &self.witnesses {
                    Some(rows) => {
                        w.write_record(["sequence", "index", "weight_bound", "verified"])?;
                        for row in rows {
                            w.serialize(row)?;
                        }
                    }
                    None => {
                        w.write_record(["name", "check", "passed", "values"])?;
                        for r in &self.records {
                            w.write_record([r.name.as_str(), r.check, &r.passed.to_string(), &r.values.to_string()])?;
                        }
                    }
                }
                w.flush()?;
            }
        }
        Ok(())
    }
}
