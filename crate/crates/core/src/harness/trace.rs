//! Line-delimited per-step trace files.
//!
//! Each line is a [`TraceLine`]: the prompt id, the decoding method, every
//! [`TraceRecord`] field at top level, and `elapsed_seconds`, the cumulative
//! wall-clock time at the end of the step. Floats carry 9 significant digits
//! and unused fields are `null`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sig9;
use crate::decoders::{GenerationResult, Method, TraceRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub prompt_id: String,
    pub method: Method,
    #[serde(flatten)]
    pub record: TraceRecord,
    #[serde(with = "sig9")]
    pub elapsed_seconds: f64,
}

impl TraceLine {
    /// Trace lines of one generation, with values rounded as they are written.
    pub fn from_result(prompt_id: &str, method: Method, result: &GenerationResult) -> Vec<Self> {
        result
            .trace
            .iter()
            .zip(&result.step_seconds)
            .map(|(record, &t)| {
                let line = Self {
                    prompt_id: prompt_id.to_string(),
                    method,
                    record: record.clone(),
                    elapsed_seconds: t,
                };
                line.rounded()
            })
            .collect()
    }

    /// Copy with every float rounded to what the file format stores.
    pub fn rounded(&self) -> Self {
        let opt = |x: Option<f64>| x.map(sig9::round);
        let r = &self.record;
        Self {
            prompt_id: self.prompt_id.clone(),
            method: self.method,
            record: TraceRecord {
                full_entropy: sig9::round(r.full_entropy),
                topk_entropy: opt(r.topk_entropy),
                delta_t: opt(r.delta_t),
                delta_tk: opt(r.delta_tk),
                alpha_t: opt(r.alpha_t),
                model_confidence: sig9::round(r.model_confidence),
                penalty: opt(r.penalty),
                ..r.clone()
            },
            elapsed_seconds: sig9::round(self.elapsed_seconds),
        }
    }
}

pub fn write_trace(w: &mut impl Write, lines: &[TraceLine]) -> Result<()> {
    for line in lines {
        serde_json::to_writer(&mut *w, line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_trace(path: impl AsRef<Path>, lines: &[TraceLine]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_trace(&mut w, lines)?;
    w.flush()?;
    Ok(())
}

pub fn parse_trace(reader: impl BufRead, origin: &str) -> Result<Vec<TraceLine>> {
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        lines.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(lines)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<TraceLine>> {
    let path = path.as_ref();
    parse_trace(
        BufReader::new(File::open(path)?),
        &path.display().to_string(),
    )
}

/// Groups consecutive lines by prompt id, preserving file order.
pub fn group_by_prompt(lines: &[TraceLine]) -> Vec<(&str, &[TraceLine])> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=lines.len() {
        if i == lines.len() || lines[i].prompt_id != lines[start].prompt_id {
            if start < i {
                groups.push((lines[start].prompt_id.as_str(), &lines[start..i]));
            }
            start = i;
        }
    }
    groups
}

/// Tab-separated per-step table for plotting; absent fields print as `NA`.
pub fn dump_table(w: &mut impl Write, lines: &[TraceLine]) -> Result<()> {
    writeln!(
        w,
        "prompt_id\tstep\tchosen\tfull_entropy\ttopk_entropy\tk_t\talpha_t\tdelta_t\tdelta_tk\tmodel_confidence\tpenalty"
    )?;
    let f = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| v.to_string());
    for l in lines {
        let r = &l.record;
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            l.prompt_id,
            r.step,
            r.chosen,
            r.full_entropy,
            f(r.topk_entropy),
            r.k_t.map_or_else(|| "NA".to_string(), |k| k.to_string()),
            f(r.alpha_t),
            f(r.delta_t),
            f(r.delta_tk),
            r.model_confidence,
            f(r.penalty),
        )?;
    }
    Ok(())
}
