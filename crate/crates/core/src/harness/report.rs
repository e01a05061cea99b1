//! Metric reports and report comparison.
//!
//! A report file is line-delimited JSON: one `{"prompt":{..}}` line per
//! generated prompt in corpus order, one `{"failure":{..}}` line per failed
//! prompt, and a final `{"aggregate":{..}}` line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sig9;
use super::trace::{group_by_prompt, TraceLine};
use crate::backend::TokenId;
use crate::decoders::{tokens_per_second, Method};
use crate::error::{Error, Result};
use crate::metrics::{coherence, diversity, speed_summary_from, DiversityReport, Embedder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptReport {
    pub id: String,
    pub tokens_generated: usize,
    /// `None` for continuations shorter than 5 tokens.
    pub diversity: Option<DiversityReport>,
    pub coherence: Option<f64>,
    #[serde(with = "sig9")]
    pub elapsed_seconds: f64,
    #[serde(with = "sig9")]
    pub tokens_per_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub prompts: usize,
    pub failures: usize,
    pub mean_diversity: Option<f64>,
    pub mean_rep_n: BTreeMap<usize, f64>,
    pub mean_coherence: Option<f64>,
    pub mean_seconds_per_generation: Option<f64>,
    pub mean_tokens_per_second: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ReportLine {
    Prompt(PromptReport),
    Failure(Failure),
    Aggregate(Aggregate),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub prompts: Vec<PromptReport>,
    pub failures: Vec<Failure>,
    pub aggregate: Aggregate,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Metrics for one generation. `elapsed_seconds` is the time to the last token.
pub fn prompt_report(
    id: &str,
    prompt: &[TokenId],
    continuation: &[TokenId],
    elapsed_seconds: f64,
    embedder: &dyn Embedder,
) -> Result<PromptReport> {
    let diversity = if continuation.len() >= 5 {
        Some(diversity(continuation)?)
    } else {
        None
    };
    let coherence = if continuation.is_empty() {
        None
    } else {
        Some(coherence(prompt, continuation, embedder)?)
    };
    Ok(PromptReport {
        id: id.to_string(),
        tokens_generated: continuation.len(),
        diversity,
        coherence,
        elapsed_seconds,
        tokens_per_second: tokens_per_second(continuation.len(), elapsed_seconds),
    })
}

/// Per-prompt reports recomputed from trace lines. Prompt tokens come from
/// `prompts` by id.
pub fn prompt_reports_from_trace(
    lines: &[TraceLine],
    prompts: &BTreeMap<String, Vec<TokenId>>,
    embedder: &dyn Embedder,
) -> Result<Vec<PromptReport>> {
    group_by_prompt(lines)
        .into_iter()
        .map(|(id, group)| {
            let prompt = prompts
                .get(id)
                .ok_or_else(|| Error::Mismatch(format!("trace prompt {id:?} not in corpus")))?;
            let continuation: Vec<TokenId> = group.iter().map(|l| l.record.chosen).collect();
            let elapsed = group.last().map_or(0.0, |l| l.elapsed_seconds);
            prompt_report(id, prompt, &continuation, elapsed, embedder)
        })
        .collect()
}

impl Report {
    pub fn new(method: Method, prompts: Vec<PromptReport>, failures: Vec<Failure>) -> Self {
        let divs: Vec<&DiversityReport> = prompts
            .iter()
            .filter_map(|p| p.diversity.as_ref())
            .collect();
        let mut mean_rep_n = BTreeMap::new();
        if !divs.is_empty() {
            for n in crate::metrics::NGRAM_ORDERS {
                mean_rep_n.insert(n, mean(divs.iter().map(|d| d.rep_n[&n])).unwrap());
            }
        }
        let speed = speed_summary_from(
            prompts
                .iter()
                .map(|p| (p.elapsed_seconds, p.tokens_per_second)),
        )
        .ok();
        let aggregate = Aggregate {
            method,
            prompts: prompts.len(),
            failures: failures.len(),
            mean_diversity: mean(divs.iter().map(|d| d.diversity)),
            mean_rep_n,
            mean_coherence: mean(prompts.iter().filter_map(|p| p.coherence)),
            mean_seconds_per_generation: speed.map(|s| s.mean_seconds_per_generation),
            mean_tokens_per_second: speed.map(|s| s.mean_tokens_per_second),
        };
        Self {
            prompts,
            failures,
            aggregate,
        }
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        let lines = self
            .prompts
            .iter()
            .cloned()
            .map(ReportLine::Prompt)
            .chain(self.failures.iter().cloned().map(ReportLine::Failure))
            .chain(std::iter::once(ReportLine::Aggregate(
                self.aggregate.clone(),
            )));
        for line in lines {
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn parse(reader: impl BufRead, origin: &str) -> Result<Self> {
        let mut prompts = Vec::new();
        let mut failures = Vec::new();
        let mut aggregate = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ReportLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            match parsed {
                ReportLine::Prompt(p) => prompts.push(p),
                ReportLine::Failure(f) => failures.push(f),
                ReportLine::Aggregate(a) => aggregate = Some(a),
            }
        }
        let aggregate = aggregate.ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: 0,
            message: "report has no aggregate line".into(),
        })?;
        Ok(Self {
            prompts,
            failures,
            aggregate,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(
            BufReader::new(File::open(path)?),
            &path.display().to_string(),
        )
    }
}

/// Per-prompt outcome counts for one metric, higher is better.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinCount {
    pub a: usize,
    pub b: usize,
    pub ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// `b − a`.
    pub delta: Option<f64>,
    pub wins: Option<WinCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method_a: Method,
    pub method_b: Method,
    pub rows: Vec<MetricDelta>,
}

fn row(metric: &str, a: Option<f64>, b: Option<f64>, wins: Option<WinCount>) -> MetricDelta {
    MetricDelta {
        metric: metric.to_string(),
        a,
        b,
        delta: a.zip(b).map(|(a, b)| b - a),
        wins,
    }
}

fn win_count(pairs: impl Iterator<Item = (Option<f64>, Option<f64>)>) -> WinCount {
    let mut w = WinCount::default();
    for (a, b) in pairs {
        if let (Some(a), Some(b)) = (a, b) {
            match a.partial_cmp(&b) {
                Some(std::cmp::Ordering::Greater) => w.a += 1,
                Some(std::cmp::Ordering::Less) => w.b += 1,
                _ => w.ties += 1,
            }
        }
    }
    w
}

/// Aggregate deltas and per-prompt wins. Both reports must cover the same
/// prompt ids.
pub fn compare_reports(a: &Report, b: &Report) -> Result<Comparison> {
    let ids_a: BTreeSet<&str> = a.prompts.iter().map(|p| p.id.as_str()).collect();
    let ids_b: BTreeSet<&str> = b.prompts.iter().map(|p| p.id.as_str()).collect();
    if ids_a != ids_b {
        let only_a = ids_a.difference(&ids_b).count();
        let only_b = ids_b.difference(&ids_a).count();
        return Err(Error::Mismatch(format!(
            "reports cover different prompts ({only_a} only in first, {only_b} only in second)"
        )));
    }
    let by_id: BTreeMap<&str, &PromptReport> =
        b.prompts.iter().map(|p| (p.id.as_str(), p)).collect();
    let pairs: Vec<(&PromptReport, &PromptReport)> = a
        .prompts
        .iter()
        .map(|p| (p, by_id[p.id.as_str()]))
        .collect();

    let div = |p: &PromptReport| p.diversity.as_ref().map(|d| d.diversity);
    let (aa, ab) = (&a.aggregate, &b.aggregate);
    let mut rows = vec![
        row(
            "diversity",
            aa.mean_diversity,
            ab.mean_diversity,
            Some(win_count(pairs.iter().map(|(x, y)| (div(x), div(y))))),
        ),
        row(
            "coherence",
            aa.mean_coherence,
            ab.mean_coherence,
            Some(win_count(
                pairs.iter().map(|(x, y)| (x.coherence, y.coherence)),
            )),
        ),
    ];
    for n in crate::metrics::NGRAM_ORDERS {
        rows.push(row(
            &format!("rep-{n}"),
            aa.mean_rep_n.get(&n).copied(),
            ab.mean_rep_n.get(&n).copied(),
            None,
        ));
    }
    rows.push(row(
        "sec/generation",
        aa.mean_seconds_per_generation,
        ab.mean_seconds_per_generation,
        None,
    ));
    rows.push(row(
        "tokens/sec",
        aa.mean_tokens_per_second,
        ab.mean_tokens_per_second,
        Some(win_count(pairs.iter().map(|(x, y)| {
            (Some(x.tokens_per_second), Some(y.tokens_per_second))
        }))),
    ));
    Ok(Comparison {
        method_a: aa.method,
        method_b: ab.method,
        rows,
    })
}

impl Comparison {
    /// Plain-text table; diversity and rep-n are shown in percent.
    pub fn to_table(&self) -> String {
        let cell = |x: Option<f64>, pct: bool| match x {
            Some(v) if pct => format!("{:.2}", 100.0 * v),
            Some(v) => format!("{v:.4}"),
            None => "-".to_string(),
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>22} {:>22} {:>10} {:>14}",
            "metric",
            self.method_a.name(),
            self.method_b.name(),
            "delta",
            "wins a/b/tie"
        );
        for r in &self.rows {
            let pct = r.metric == "diversity" || r.metric.starts_with("rep-");
            let wins = r.wins.map_or_else(
                || "-".to_string(),
                |w| format!("{}/{}/{}", w.a, w.b, w.ties),
            );
            let _ = writeln!(
                out,
                "{:<16} {:>22} {:>22} {:>10} {:>14}",
                r.metric,
                cell(r.a, pct),
                cell(r.b, pct),
                cell(r.delta, pct),
                wins
            );
        }
        out
    }
}
