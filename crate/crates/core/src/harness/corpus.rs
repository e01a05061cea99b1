//! Line-delimited prompt corpora.
//!
//! One JSON object per line: `{"id": "...", "prompt": [ids..], "reference": [ids..] | null}`.
//! Blank lines are ignored.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::TokenId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub prompt: Vec<TokenId>,
    #[serde(default)]
    pub reference: Option<Vec<TokenId>>,
}

pub fn parse_corpus(reader: impl BufRead, origin: &str) -> Result<Vec<PromptRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: origin.to_string(),
            line: i + 1,
            message,
        };
        let record: PromptRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if record.prompt.is_empty() {
            return Err(err(format!("prompt {:?} is empty", record.id)));
        }
        if !seen.insert(record.id.clone()) {
            return Err(err(format!("duplicate id {:?}", record.id)));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<PromptRecord>> {
    let path = path.as_ref();
    parse_corpus(
        BufReader::new(File::open(path)?),
        &path.display().to_string(),
    )
}

pub fn write_corpus(path: impl AsRef<Path>, records: &[PromptRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
