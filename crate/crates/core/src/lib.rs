//! Adaptive contrastive search and baseline decoding strategies.
//!
//! The crate is organized bottom-up:
//!
//! * [`prob`]: distributions, Shannon entropy and the entropy standardization
//!   that maps model uncertainty to a candidate-pool size `k_t` and a penalty
//!   weight `α_t`.
//! * [`representation`]: cosine similarity and the degeneration penalty.
//! * [`backend`]: the model interface, a deterministic synthetic model and a
//!   bridge to external inference processes.
//! * [`decoders`]: greedy, top-k, nucleus, typical, contrastive and adaptive
//!   contrastive search, plus the generation loop.
//! * [`metrics`]: n-gram diversity, coherence and speed.
//! * [`harness`]: corpus/trace/report files and corpus runs.
//!
//! ```
//! use adaptive_cs::backend::{tokens, SyntheticBackend, SyntheticConfig};
//! use adaptive_cs::decoders::{generate, DecoderConfig, Method};
//!
//! let model = SyntheticBackend::new(SyntheticConfig::default()).unwrap();
//! let config = DecoderConfig { max_new_tokens: 16, ..DecoderConfig::new(Method::AdaptiveContrastive) };
//! let out = generate(&model, &tokens(&[1, 2, 3]), &config).unwrap();
//! assert_eq!(out.tokens.len(), 16);
//! assert!(out.trace.iter().all(|r| (5..=15).contains(&r.k_t.unwrap())));
//! ```

pub mod backend;
pub mod decoders;
mod error;
pub mod harness;
pub mod metrics;
pub mod parallel;
pub mod prob;
pub mod representation;
pub mod rng;

pub use error::{Error, Result};
