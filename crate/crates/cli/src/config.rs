//! Run configuration: defaults, then the TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use adaptive_cs::backend::wire::WireFormat;
use adaptive_cs::backend::{SyntheticConfig, TokenId};
use adaptive_cs::decoders::{DecoderConfig, Method};
use adaptive_cs::harness::BackendSpec;
use clap::{Args, ValueEnum};
use serde::Deserialize;

/// Marks errors that map to the configuration exit code.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Contents of a `--config` file. Every section is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<BackendSpec>,
    pub decoder: Option<DecoderConfig>,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| config_error(format!("invalid config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Wire {
    Json,
    Binary,
}

impl From<Wire> for WireFormat {
    fn from(w: Wire) -> Self {
        match w {
            Wire::Json => WireFormat::Json,
            Wire::Binary => WireFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    /// External backend program speaking the wire protocol on stdin/stdout.
    #[arg(long, value_name = "PROGRAM")]
    pub process: Option<String>,
    /// Argument passed to the backend program (repeatable).
    #[arg(long = "process-arg", value_name = "ARG", allow_hyphen_values = true)]
    pub process_args: Vec<String>,
    #[arg(long, value_enum)]
    pub wire: Option<Wire>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Seed of the synthetic model (not the sampling seed).
    #[arg(long)]
    pub model_seed: Option<u64>,
    #[arg(long)]
    pub repetition_bias: Option<f64>,
}

impl BackendArgs {
    pub fn resolve(&self, file: Option<BackendSpec>) -> anyhow::Result<BackendSpec> {
        if let Some(program) = &self.process {
            return Ok(BackendSpec::Process {
                program: program.clone(),
                args: self.process_args.clone(),
                format: self.wire.map(Into::into).unwrap_or_default(),
            });
        }
        match file.unwrap_or(BackendSpec::Synthetic(SyntheticConfig::default())) {
            BackendSpec::Synthetic(mut cfg) => {
                cfg.vocab_size = self.vocab_size.unwrap_or(cfg.vocab_size);
                cfg.hidden_dim = self.hidden_dim.unwrap_or(cfg.hidden_dim);
                cfg.seed = self.model_seed.unwrap_or(cfg.seed);
                cfg.repetition_bias = self.repetition_bias.unwrap_or(cfg.repetition_bias);
                Ok(BackendSpec::Synthetic(cfg))
            }
            BackendSpec::Process {
                program,
                args,
                format,
            } => {
                if self.vocab_size.or(self.hidden_dim).is_some()
                    || self.model_seed.is_some()
                    || self.repetition_bias.is_some()
                {
                    return Err(config_error(
                        "synthetic backend flags given for a process backend",
                    ));
                }
                Ok(BackendSpec::Process {
                    program,
                    args,
                    format: self.wire.map(Into::into).unwrap_or(format),
                })
            }
        }
    }

    pub fn synthetic(&self) -> anyhow::Result<SyntheticConfig> {
        match self.resolve(None)? {
            BackendSpec::Synthetic(cfg) => Ok(cfg),
            BackendSpec::Process { .. } => Err(config_error("expected a synthetic backend")),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct DecoderArgs {
    /// greedy, top_k, nucleus, typical, contrastive, adaptive_contrastive, adaptive_double_exp
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub max_new_tokens: Option<usize>,
    /// Sampling seed for the stochastic decoders.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Token id that ends generation (repeatable).
    #[arg(long = "stop")]
    pub stop_tokens: Vec<u32>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

impl DecoderArgs {
    pub fn resolve(&self, file: Option<DecoderConfig>) -> anyhow::Result<DecoderConfig> {
        let mut c = file.unwrap_or_default();
        c.method = self.method.unwrap_or(c.method);
        c.k = self.k.unwrap_or(c.k);
        c.alpha = self.alpha.unwrap_or(c.alpha);
        c.p = self.p.unwrap_or(c.p);
        c.tau = self.tau.unwrap_or(c.tau);
        c.q = self.q.unwrap_or(c.q);
        c.max_new_tokens = self.max_new_tokens.unwrap_or(c.max_new_tokens);
        c.rng_seed = self.seed.unwrap_or(c.rng_seed);
        if !self.stop_tokens.is_empty() {
            c.stop_tokens = self.stop_tokens.iter().map(|&t| TokenId(t)).collect();
        }
        c.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(c)
    }
}

/// Parses `"1,2,3"` or `"1 2 3"` into token ids.
pub fn parse_tokens(s: &str) -> anyhow::Result<Vec<TokenId>> {
    let tokens = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<u32>()
                .map(TokenId)
                .map_err(|_| config_error(format!("invalid token id {t:?}")))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    if tokens.is_empty() {
        return Err(config_error("prompt is empty"));
    }
    Ok(tokens)
}

/// Output path: explicit flag, else `<ACS_OUTPUT_DIR or .>/<default_name>`.
pub fn output_path(explicit: Option<PathBuf>, default_name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        std::env::var_os("ACS_OUTPUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
            .join(default_name)
    })
}
