//! `acs`: run decoding experiments from the command line.
//!
//! Exit codes: 0 success, 1 partial failure or runtime error, 2 configuration error.

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptive_cs::backend::{wire, SyntheticBackend};
use adaptive_cs::decoders::generate;
use adaptive_cs::harness::{
    compare_reports, dump_table, evaluate_traces, load_corpus, load_trace, run_experiment,
    save_trace, Outcome, Report, RunManifest, TraceLine,
};
use adaptive_cs::parallel::Execution;
use anyhow::Context;
use clap::{Parser, Subcommand};

use config::{
    config_error, output_path, parse_tokens, BackendArgs, ConfigError, DecoderArgs, FileConfig,
};

#[derive(Parser)]
#[command(
    name = "acs",
    version,
    about = "Adaptive contrastive search experiments"
)]
struct Cli {
    /// TOML file with optional [backend] and [decoder] tables and `workers`.
    #[arg(long, global = true, env = "ACS_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads for corpus runs; 1 runs sequentially.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode one prompt and print the continuation as JSON.
    Generate {
        /// Token ids, comma or space separated.
        #[arg(long)]
        prompt: String,
        /// Also write the per-step trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Decode every prompt of a corpus, writing trace, report, and manifest.
    Run {
        /// Corpus file; not needed with --manifest.
        #[arg(long, required_unless_present = "manifest")]
        corpus: Option<PathBuf>,
        /// Rerun a saved manifest; other run options are ignored.
        #[arg(long, conflicts_with = "corpus")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Where to save the manifest (default: next to the report).
        #[arg(long)]
        manifest_out: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Recompute a report from a trace file.
    Eval {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Compare two reports over the same prompts.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Per-step trace table (tab-separated) for plotting.
    TraceDump {
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the synthetic backend over the wire protocol (--wire) on stdin/stdout.
    Serve {
        #[command(flatten)]
        backend: BackendArgs,
    },
}

fn execution(flag: Option<usize>, file: Option<usize>) -> anyhow::Result<Execution> {
    let workers = flag.or(file);
    if workers == Some(0) {
        return Err(config_error("--workers must be positive"));
    }
    Ok(Execution::with_workers(workers))
}

fn default_manifest_path(report: &Path) -> PathBuf {
    let mut name = report.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    report.with_file_name(name)
}

fn exit_for(outcome: Outcome) -> ExitCode {
    match outcome {
        Outcome::Success => ExitCode::SUCCESS,
        Outcome::PartialFailure => ExitCode::from(1),
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate {
            prompt,
            trace,
            backend,
            decoder,
        } => {
            let spec = backend.resolve(file.backend)?;
            let decoder = decoder.resolve(file.decoder)?;
            let prompt = parse_tokens(&prompt)?;
            let model = spec.build().context("starting backend")?;
            let result = generate(model.as_ref(), &prompt, &decoder)?;
            if let Some(path) = trace {
                save_trace(
                    &path,
                    &TraceLine::from_result("prompt", decoder.method, &result),
                )?;
            }
            let out = serde_json::json!({
                "method": decoder.method,
                "tokens": result.tokens,
                "elapsed_seconds": result.elapsed_seconds,
                "tokens_per_second": result.tokens_per_second,
            });
            println!("{out}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            corpus,
            manifest,
            trace,
            report,
            manifest_out,
            backend,
            decoder,
        } => {
            let exec_file = file.workers;
            let mut m = match manifest {
                Some(path) => RunManifest::load(&path).map_err(|e| {
                    config_error(format!("cannot load manifest {}: {e}", path.display()))
                })?,
                None => {
                    let corpus = corpus.expect("clap requires corpus without manifest");
                    let decoder = decoder.resolve(file.decoder)?;
                    let stem = decoder.method.name();
                    let mut m = RunManifest::new(
                        backend.resolve(file.backend)?,
                        decoder,
                        corpus,
                        output_path(trace, &format!("{stem}.trace.jsonl")),
                        output_path(report, &format!("{stem}.report.jsonl")),
                    );
                    m.workers = cli.workers.or(exec_file);
                    m
                }
            };
            m.decoder
                .validate()
                .map_err(|e| config_error(e.to_string()))?;
            if !m.corpus.exists() {
                return Err(config_error(format!(
                    "corpus {} not found",
                    m.corpus.display()
                )));
            }
            let summary = run_experiment(&m, execution(cli.workers, m.workers)?)?;
            m.backend_descriptor = Some(summary.descriptor.clone());
            let manifest_path =
                manifest_out.unwrap_or_else(|| default_manifest_path(&m.report_path));
            m.save(&manifest_path)?;
            let agg = &summary.report.aggregate;
            eprintln!(
                "{}: {} prompts, {} failures, {} trace lines; trace {}, report {}, manifest {}",
                agg.method,
                agg.prompts,
                agg.failures,
                summary.trace_lines,
                m.trace_path.display(),
                m.report_path.display(),
                manifest_path.display()
            );
            for f in &summary.report.failures {
                eprintln!("failed {}: {}", f.id, f.error);
            }
            Ok(exit_for(summary.outcome))
        }
        Command::Eval {
            trace,
            corpus,
            report,
            backend,
        } => {
            let lines = load_trace(&trace)?;
            let method = match lines.first() {
                Some(l) if lines.iter().all(|x| x.method == l.method) => l.method,
                Some(_) => return Err(config_error("trace mixes several methods")),
                None => return Err(config_error(format!("trace {} is empty", trace.display()))),
            };
            let corpus = load_corpus(&corpus)?;
            let model = backend
                .resolve(file.backend)?
                .build()
                .context("starting backend")?;
            let rep = evaluate_traces(
                &lines,
                &corpus,
                model.as_ref(),
                method,
                execution(cli.workers, file.workers)?,
            )?;
            match report {
                Some(path) => rep.save(&path)?,
                None => rep.write(&mut io::stdout().lock())?,
            }
            Ok(if rep.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Compare { a, b, json } => {
            let (a, b) = (Report::load(&a)?, Report::load(&b)?);
            let cmp = compare_reports(&a, &b).map_err(|e| config_error(e.to_string()))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&cmp)?);
            } else {
                print!("{}", cmp.to_table());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::TraceDump { trace, out } => {
            let lines = load_trace(&trace)?;
            match out {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(&path)?);
                    dump_table(&mut w, &lines)?;
                    w.flush()?;
                }
                None => dump_table(&mut io::stdout().lock(), &lines)?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { backend } => {
            let model = SyntheticBackend::new(backend.synthetic()?)
                .map_err(|e| config_error(e.to_string()))?;
            let format = backend.wire.map(Into::into).unwrap_or_default();
            wire::serve(&model, io::stdin().lock(), io::stdout().lock(), format)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Output closed early by a downstream reader such as `head`.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>().map(|io| io.kind()) == Some(io::ErrorKind::BrokenPipe)
            || matches!(c.downcast_ref::<adaptive_cs::Error>(), Some(adaptive_cs::Error::Io(io)) if io.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some()
                || matches!(
                    e.downcast_ref::<adaptive_cs::Error>(),
                    Some(adaptive_cs::Error::Argument(_) | adaptive_cs::Error::Parse { .. })
                )
            {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
