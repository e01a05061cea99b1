use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::corpus::{load_corpus, PromptRecord};
use super::report::{prompt_report, Failure, PromptReport, Report};
use super::trace::{group_by_prompt, save_trace, TraceLine};
use crate::backend::wire::WireFormat;
use crate::backend::{
    Backend, BackendDescriptor, ProcessBackend, SyntheticBackend, SyntheticConfig, TokenId,
};
use crate::decoders::{generate, DecoderConfig, GenerationResult, Method};
use crate::error::Result;
use crate::metrics::MeanRepresentationEmbedder;
use crate::parallel::{self, Execution};

/// Which model a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Synthetic(SyntheticConfig),
    /// External process speaking the wire protocol on stdin/stdout.
    Process {
        program: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default)]
        format: WireFormat,
    },
}

impl BackendSpec {
    pub fn build(&self) -> Result<Box<dyn Backend>> {
        Ok(match self {
            BackendSpec::Synthetic(cfg) => Box::new(SyntheticBackend::new(*cfg)?),
            BackendSpec::Process {
                program,
                args,
                format,
            } => Box::new(ProcessBackend::spawn(program, args, *format)?),
        })
    }
}

/// Everything needed to reproduce a corpus run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub backend: BackendSpec,
    /// Filled in from the live backend when the run starts.
    #[serde(default)]
    pub backend_descriptor: Option<BackendDescriptor>,
    pub decoder: DecoderConfig,
    pub corpus: PathBuf,
    pub trace_path: PathBuf,
    pub report_path: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
    pub created_at: String,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(
        backend: BackendSpec,
        decoder: DecoderConfig,
        corpus: impl Into<PathBuf>,
        trace_path: impl Into<PathBuf>,
        report_path: impl Into<PathBuf>,
    ) -> Self {
        Self {
            backend,
            backend_descriptor: None,
            decoder,
            corpus: corpus.into(),
            trace_path: trace_path.into(),
            report_path: report_path.into(),
            workers: None,
            created_at: chrono::Utc::now().to_rfc3339(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// At least one prompt failed; the rest were written.
    PartialFailure,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Descriptor reported by the live backend.
    pub descriptor: BackendDescriptor,
    pub report: Report,
    pub trace_lines: usize,
    pub outcome: Outcome,
}

/// Runs one generation per corpus record. Results are in corpus order.
pub fn generate_corpus(
    backend: &dyn Backend,
    corpus: &[PromptRecord],
    config: &DecoderConfig,
    execution: Execution,
) -> Vec<Result<GenerationResult>> {
    parallel::map(corpus, execution, |rec| {
        generate(backend, &rec.prompt, config)
    })
}

fn reports_for(
    groups: &[(&str, &[TraceLine])],
    prompts: &BTreeMap<&str, &[TokenId]>,
    backend: &dyn Backend,
    execution: Execution,
) -> Vec<std::result::Result<PromptReport, Failure>> {
    let embedder = MeanRepresentationEmbedder::new(backend);
    parallel::map(groups, execution, |(id, lines)| {
        let continuation: Vec<TokenId> = lines.iter().map(|l| l.record.chosen).collect();
        let elapsed = lines.last().map_or(0.0, |l| l.elapsed_seconds);
        let prompt = prompts.get(id).copied().ok_or_else(|| Failure {
            id: id.to_string(),
            error: "prompt id not in corpus".into(),
        })?;
        prompt_report(id, prompt, &continuation, elapsed, &embedder).map_err(|e| Failure {
            id: id.to_string(),
            error: e.to_string(),
        })
    })
}

/// Generates every prompt, then writes the trace and report files named in
/// the manifest. Failed prompts are recorded in the report and skipped.
pub fn run_experiment(manifest: &RunManifest, execution: Execution) -> Result<RunSummary> {
    manifest.decoder.validate()?;
    let backend = manifest.backend.build()?;
    let descriptor = backend.descriptor();
    let corpus = load_corpus(&manifest.corpus)?;
    let method = manifest.decoder.method;

    let results = generate_corpus(backend.as_ref(), &corpus, &manifest.decoder, execution);
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for (rec, result) in corpus.iter().zip(results) {
        match result {
            Ok(r) => lines.extend(TraceLine::from_result(&rec.id, method, &r)),
            Err(e) => failures.push(Failure {
                id: rec.id.clone(),
                error: e.to_string(),
            }),
        }
    }
    save_trace(&manifest.trace_path, &lines)?;

    let prompts: BTreeMap<&str, &[TokenId]> = corpus
        .iter()
        .map(|r| (r.id.as_str(), r.prompt.as_slice()))
        .collect();
    let groups = group_by_prompt(&lines);
    let mut reports = Vec::with_capacity(groups.len());
    for r in reports_for(&groups, &prompts, backend.as_ref(), execution) {
        match r {
            Ok(p) => reports.push(p),
            Err(f) => failures.push(f),
        }
    }
    let report = Report::new(method, reports, failures);
    report.save(&manifest.report_path)?;
    Ok(RunSummary {
        descriptor,
        outcome: if report.failures.is_empty() {
            Outcome::Success
        } else {
            Outcome::PartialFailure
        },
        trace_lines: lines.len(),
        report,
    })
}

/// Recomputes a report from trace lines. Prompt tokens are looked up in
/// `corpus`, coherence uses the backend's mean-representation embedder.
pub fn evaluate_traces(
    lines: &[TraceLine],
    corpus: &[PromptRecord],
    backend: &dyn Backend,
    method: Method,
    execution: Execution,
) -> Result<Report> {
    let prompts: BTreeMap<&str, &[TokenId]> = corpus
        .iter()
        .map(|r| (r.id.as_str(), r.prompt.as_slice()))
        .collect();
    let groups = group_by_prompt(lines);
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for r in reports_for(&groups, &prompts, backend, execution) {
        match r {
            Ok(p) => reports.push(p),
            Err(f) => failures.push(f),
        }
    }
    Ok(Report::new(method, reports, failures))
}
