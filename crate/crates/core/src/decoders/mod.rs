//! Decoding strategies and the generation loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backend::{validate_context, Backend, StepOutput, TokenId};
use crate::error::{argument, Error, Result};
use crate::harness::sig9;
use crate::prob::{shannon_entropy, topk_entropy, EntropyHistory, ProbabilityDistribution};
use crate::representation::ContextRepresentations;
use crate::rng::SampleRng;

mod contrastive;
mod sampling;

pub use contrastive::{
    adaptive_contrastive_step, adaptive_parameters, contrastive_step, fixed_contrastive_step,
    select_by_score, AdaptiveParameters, AdaptiveVariant, Selection, StepOutcome,
};
pub use sampling::{
    greedy_step, nucleus_step, nucleus_support, topk_sample_step, typical_step, typical_support,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Greedy,
    TopK,
    Nucleus,
    Typical,
    Contrastive,
    AdaptiveContrastive,
    AdaptiveDoubleExp,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Greedy,
        Method::TopK,
        Method::Nucleus,
        Method::Typical,
        Method::Contrastive,
        Method::AdaptiveContrastive,
        Method::AdaptiveDoubleExp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::TopK => "top_k",
            Method::Nucleus => "nucleus",
            Method::Typical => "typical",
            Method::Contrastive => "contrastive",
            Method::AdaptiveContrastive => "adaptive_contrastive",
            Method::AdaptiveDoubleExp => "adaptive_double_exp",
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(
            self,
            Method::AdaptiveContrastive | Method::AdaptiveDoubleExp
        )
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| argument(format!("unknown method {s:?}")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Decoding hyperparameters. Only the fields relevant to `method` are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    pub method: Method,
    /// Pool size for top-k sampling and fixed contrastive search.
    pub k: usize,
    /// Penalty weight for fixed contrastive search.
    pub alpha: f64,
    /// Nucleus mass.
    pub p: f64,
    /// Typical-set mass.
    pub tau: f64,
    /// Temperature on the standardized entropy for the adaptive methods.
    pub q: f64,
    pub max_new_tokens: usize,
    pub rng_seed: u64,
    /// Generation stops after emitting any of these tokens.
    pub stop_tokens: Vec<TokenId>,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            method: Method::AdaptiveContrastive,
            k: 10,
            alpha: 0.6,
            p: 0.95,
            tau: 0.95,
            q: 1.0,
            max_new_tokens: 256,
            rng_seed: 0,
            stop_tokens: Vec::new(),
        }
    }
}

impl DecoderConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_new_tokens == 0 {
            return Err(argument("max_new_tokens must be positive"));
        }
        match self.method {
            Method::TopK | Method::Contrastive if self.k == 0 => {
                Err(argument("k must be positive"))
            }
            Method::Contrastive if !(0.0..=1.0).contains(&self.alpha) => {
                Err(argument(format!("alpha = {} outside [0, 1]", self.alpha)))
            }
            Method::Nucleus if !(self.p > 0.0 && self.p <= 1.0) => {
                Err(argument(format!("p = {} outside (0, 1]", self.p)))
            }
            Method::Typical if !(self.tau > 0.0 && self.tau <= 1.0) => {
                Err(argument(format!("tau = {} outside (0, 1]", self.tau)))
            }
            m if m.is_adaptive() && !(self.q > 0.0 && self.q.is_finite()) => {
                Err(argument(format!("q = {} must be positive", self.q)))
            }
            _ => Ok(()),
        }
    }
}

/// Diagnostics for one generated token. Fields a method does not use are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub chosen: TokenId,
    /// Entropy of the full next-token distribution, nats.
    #[serde(with = "sig9")]
    pub full_entropy: f64,
    /// Entropy of the renormalized top-k distribution, nats.
    #[serde(default, with = "sig9::option")]
    pub topk_entropy: Option<f64>,
    #[serde(default, with = "sig9::option")]
    pub delta_t: Option<f64>,
    /// Standardized top-k entropy before any DoubleExp transform.
    #[serde(default, with = "sig9::option")]
    pub delta_tk: Option<f64>,
    #[serde(default)]
    pub k_t: Option<usize>,
    #[serde(default, with = "sig9::option")]
    pub alpha_t: Option<f64>,
    /// Probability of the chosen token.
    #[serde(with = "sig9")]
    pub model_confidence: f64,
    /// Degeneration penalty of the chosen token.
    #[serde(default, with = "sig9::option")]
    pub penalty: Option<f64>,
}

impl TraceRecord {
    fn sampled(step: usize, chosen: TokenId, dist: &ProbabilityDistribution) -> Self {
        Self {
            step,
            chosen,
            full_entropy: shannon_entropy(dist),
            topk_entropy: None,
            delta_t: None,
            delta_tk: None,
            k_t: None,
            alpha_t: None,
            model_confidence: dist.get(chosen.index()),
            penalty: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    /// Generated continuation, prompt excluded.
    pub tokens: Vec<TokenId>,
    pub trace: Vec<TraceRecord>,
    /// Wall-clock seconds from the start of generation to the last token.
    pub elapsed_seconds: f64,
    pub tokens_per_second: f64,
    /// Cumulative wall-clock seconds at the end of each step.
    pub step_seconds: Vec<f64>,
}

fn at_step<T>(step: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Step {
        step,
        source: Box::new(e),
    })
}

/// Generates up to `config.max_new_tokens` tokens after `prompt`.
///
/// Deterministic for a fixed backend, prompt and config, except for the timing
/// fields.
pub fn generate(
    backend: &dyn Backend,
    prompt: &[TokenId],
    config: &DecoderConfig,
) -> Result<GenerationResult> {
    config.validate()?;
    let desc = backend.descriptor();
    validate_context(prompt, desc.vocab_size)?;

    let start = Instant::now();
    let mut context = prompt.to_vec();
    let mut tokens = Vec::with_capacity(config.max_new_tokens);
    let mut trace = Vec::with_capacity(config.max_new_tokens);
    let mut step_seconds = Vec::with_capacity(config.max_new_tokens);
    let mut rng = SampleRng::from_seed(config.rng_seed);

    let contrastive = matches!(
        config.method,
        Method::Contrastive | Method::AdaptiveContrastive | Method::AdaptiveDoubleExp
    );
    let mut context_reps = ContextRepresentations::new();
    let mut history = EntropyHistory::new();
    let mut current: Option<StepOutput> = None;
    if contrastive {
        for j in 1..=prompt.len() {
            let out = at_step(0, backend.step(&prompt[..j]))?;
            context_reps.push(out.last_representation.clone())?;
            current = Some(out);
        }
    }

    for step in 0..config.max_new_tokens {
        let out = match current.take() {
            Some(out) => out,
            None => at_step(step, backend.step(&context))?,
        };
        let dist = &out.dist;
        let record = match config.method {
            Method::Greedy => TraceRecord::sampled(step, greedy_step(dist), dist),
            Method::TopK => {
                let t = at_step(step, topk_sample_step(dist, config.k, &mut rng))?;
                TraceRecord {
                    topk_entropy: Some(at_step(step, topk_entropy(dist, config.k))?),
                    k_t: Some(config.k),
                    ..TraceRecord::sampled(step, t, dist)
                }
            }
            Method::Nucleus => {
                let t = at_step(step, nucleus_step(dist, config.p, &mut rng))?;
                TraceRecord::sampled(step, t, dist)
            }
            Method::Typical => {
                let t = at_step(step, typical_step(dist, config.tau, &mut rng))?;
                TraceRecord::sampled(step, t, dist)
            }
            Method::Contrastive | Method::AdaptiveContrastive | Method::AdaptiveDoubleExp => {
                let outcome = at_step(
                    step,
                    match config.method {
                        Method::Contrastive => fixed_contrastive_step(
                            dist,
                            backend,
                            &context,
                            &context_reps,
                            config.k,
                            config.alpha,
                            step,
                        ),
                        m => adaptive_contrastive_step(
                            dist,
                            backend,
                            &context,
                            &context_reps,
                            &mut history,
                            config.q,
                            if m == Method::AdaptiveDoubleExp {
                                AdaptiveVariant::DoubleExp
                            } else {
                                AdaptiveVariant::Standard
                            },
                            step,
                        ),
                    },
                )?;
                context_reps.push(outcome.chosen_output.last_representation.clone())?;
                current = Some(outcome.chosen_output);
                outcome.record
            }
        };
        let chosen = record.chosen;
        context.push(chosen);
        tokens.push(chosen);
        trace.push(record);
        step_seconds.push(start.elapsed().as_secs_f64());
        if config.stop_tokens.contains(&chosen) {
            break;
        }
    }

    let elapsed_seconds = step_seconds.last().copied().unwrap_or(0.0);
    Ok(GenerationResult {
        tokens_per_second: tokens_per_second(tokens.len(), elapsed_seconds),
        tokens,
        trace,
        elapsed_seconds,
        step_seconds,
    })
}

/// `n / seconds`, zero when no time elapsed.
pub fn tokens_per_second(n: usize, seconds: f64) -> f64 {
    if seconds > 0.0 {
        n as f64 / seconds
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{tokens, SyntheticBackend, SyntheticConfig};

    fn backend(bias: f64) -> SyntheticBackend {
        SyntheticBackend::new(SyntheticConfig {
            vocab_size: 64,
            hidden_dim: 16,
            seed: 7,
            repetition_bias: bias,
        })
        .unwrap()
    }

    #[test]
    fn greedy_loops_on_fully_biased_backend() {
        let b = backend(1.0);
        let cfg = DecoderConfig {
            max_new_tokens: 12,
            ..DecoderConfig::new(Method::Greedy)
        };
        let r = generate(&b, &tokens(&[4, 9, 2]), &cfg).unwrap();
        assert_eq!(r.tokens, tokens(&[2; 12]));
        assert_eq!(r.trace.len(), 12);
    }

    #[test]
    fn every_method_is_deterministic() {
        let b = backend(0.5);
        for method in Method::ALL {
            let cfg = DecoderConfig {
                max_new_tokens: 20,
                rng_seed: 3,
                ..DecoderConfig::new(method)
            };
            let a = generate(&b, &tokens(&[1, 2]), &cfg).unwrap();
            let c = generate(&b, &tokens(&[1, 2]), &cfg).unwrap();
            assert_eq!(a.tokens, c.tokens, "{method}");
            assert_eq!(a.trace, c.trace, "{method}");
        }
    }

    #[test]
    fn trace_fields_follow_method() {
        let b = backend(0.2);
        let run = |m| {
            generate(
                &b,
                &tokens(&[5]),
                &DecoderConfig {
                    max_new_tokens: 4,
                    ..DecoderConfig::new(m)
                },
            )
            .unwrap()
        };
        let greedy = run(Method::Greedy);
        assert!(greedy
            .trace
            .iter()
            .all(|r| r.k_t.is_none() && r.penalty.is_none() && r.delta_t.is_none()));
        let cs = run(Method::Contrastive);
        assert!(cs
            .trace
            .iter()
            .all(|r| r.k_t == Some(10) && r.alpha_t == Some(0.6) && r.delta_t.is_none()));
        let acs = run(Method::AdaptiveContrastive);
        assert!(acs
            .trace
            .iter()
            .all(|r| r.delta_t.is_some() && r.penalty.is_some()));
        assert_eq!(acs.trace[0].k_t, Some(10));
        assert_eq!(acs.trace[0].alpha_t, Some(0.5));
    }

    #[test]
    fn stop_tokens_end_generation() {
        let b = backend(1.0);
        let cfg = DecoderConfig {
            max_new_tokens: 10,
            stop_tokens: tokens(&[3]),
            ..DecoderConfig::new(Method::Greedy)
        };
        assert_eq!(
            generate(&b, &tokens(&[3]), &cfg).unwrap().tokens,
            tokens(&[3])
        );
    }

    #[test]
    fn errors_carry_context() {
        let b = backend(0.0);
        assert!(generate(&b, &[], &DecoderConfig::default()).is_err());
        assert!(generate(&b, &tokens(&[64]), &DecoderConfig::default()).is_err());
        let bad_k = DecoderConfig {
            k: 65,
            ..DecoderConfig::new(Method::TopK)
        };
        assert!(matches!(
            generate(&b, &tokens(&[1]), &bad_k),
            Err(Error::Step { step: 0, .. })
        ));
        let bad_q = DecoderConfig {
            q: 0.0,
            ..DecoderConfig::default()
        };
        assert!(generate(&b, &tokens(&[1]), &bad_q).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(
                serde_json::to_string(&m).unwrap(),
                format!("\"{}\"", m.name())
            );
        }
    }
}
