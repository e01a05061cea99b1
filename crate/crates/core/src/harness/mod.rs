//! Corpus ingestion, experiment orchestration, and trace/report files.

mod corpus;
mod experiment;
mod report;
pub mod sig9;
mod trace;

pub use corpus::{load_corpus, parse_corpus, write_corpus, PromptRecord};
pub use experiment::{
    evaluate_traces, generate_corpus, run_experiment, BackendSpec, Outcome, RunManifest, RunSummary,
};
pub use report::{
    compare_reports, prompt_report, prompt_reports_from_trace, Aggregate, Comparison, Failure,
    MetricDelta, PromptReport, Report, WinCount,
};
pub use trace::{
    dump_table, group_by_prompt, load_trace, parse_trace, save_trace, write_trace, TraceLine,
};
