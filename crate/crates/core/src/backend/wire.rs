//! Line protocol for bridging an external inference process.
//!
//! The client sends one request per model evaluation and reads exactly one
//! response. Two encodings are supported.
//!
//! **JSON lines.** One object per line.
//!
//! | request                                  | response                                                |
//! |------------------------------------------|---------------------------------------------------------|
//! | `{"op":"describe"}`                      | `{"name":..,"vocab_size":..,"hidden_dim":..}`           |
//! | `{"op":"step","context":[ids..]}`        | `{"probs":[..vocab_size],"representation":[..hidden_dim]}` |
//! | anything that fails                      | `{"error":"message"}`                                   |
//!
//! **Binary.** Little-endian throughout.
//!
//! * request: `u8 op` (`0` describe, `1` step); for step, `u32 n` then `n × u32` token ids.
//! * response: `u8 status` (`0` ok, `1` error). Error: `u32 len` + UTF-8 message.
//!   Describe: `u32 vocab_size`, `u32 hidden_dim`, `u32 len` + UTF-8 name.
//!   Step: `u32 vocab_size`, `u32 hidden_dim`, `vocab_size × f32` probabilities,
//!   then `hidden_dim × f32` representation.
//!
//! Clients renormalize received probabilities in double precision, since a
//! float32 payload cannot meet the 1e-9 mass tolerance on its own.

use std::io::{self, BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::{Backend, BackendDescriptor, StepOutput, TokenId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireFormat {
    #[default]
    Json,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Describe,
    Step { context: Vec<TokenId> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPayload {
    pub probs: Vec<f64>,
    pub representation: Vec<f64>,
}

impl From<&StepOutput> for StepPayload {
    fn from(out: &StepOutput) -> Self {
        Self {
            probs: out.dist.probs().to_vec(),
            representation: out.last_representation.values().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Step(StepPayload),
    Describe(BackendDescriptor),
    Error { error: String },
}

const OP_DESCRIBE: u8 = 0;
const OP_STEP: u8 = 1;
const STATUS_OK: u8 = 0;
const STATUS_ERR: u8 = 1;

fn read_u8(r: &mut impl Read) -> io::Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32(r: &mut impl Read) -> io::Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

fn read_string(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Backend(format!("invalid UTF-8: {e}")))
}

fn write_string(w: &mut impl Write, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

/// Writes one request. JSON requests are newline-terminated.
pub fn write_request(w: &mut impl Write, req: &Request, format: WireFormat) -> Result<()> {
    match format {
        WireFormat::Json => {
            serde_json::to_writer(&mut *w, req)?;
            w.write_all(b"\n")?;
        }
        WireFormat::Binary => match req {
            Request::Describe => w.write_all(&[OP_DESCRIBE])?,
            Request::Step { context } => {
                w.write_all(&[OP_STEP])?;
                w.write_all(&(context.len() as u32).to_le_bytes())?;
                for t in context {
                    w.write_all(&t.0.to_le_bytes())?;
                }
            }
        },
    }
    w.flush()?;
    Ok(())
}

/// Reads one request; `Ok(None)` on clean end of stream.
pub fn read_request(r: &mut impl BufRead, format: WireFormat) -> Result<Option<Request>> {
    match format {
        WireFormat::Json => {
            let mut line = String::new();
            loop {
                line.clear();
                if r.read_line(&mut line)? == 0 {
                    return Ok(None);
                }
                if !line.trim().is_empty() {
                    return Ok(Some(serde_json::from_str(line.trim())?));
                }
            }
        }
        WireFormat::Binary => {
            if r.fill_buf()?.is_empty() {
                return Ok(None);
            }
            match read_u8(r)? {
                OP_DESCRIBE => Ok(Some(Request::Describe)),
                OP_STEP => {
                    let n = read_u32(r)? as usize;
                    let context = (0..n)
                        .map(|_| read_u32(r).map(TokenId))
                        .collect::<io::Result<_>>()?;
                    Ok(Some(Request::Step { context }))
                }
                op => Err(Error::Backend(format!("unknown binary op {op}"))),
            }
        }
    }
}

/// Writes one response. Binary step payloads are narrowed to `f32`.
pub fn write_response(w: &mut impl Write, resp: &Response, format: WireFormat) -> Result<()> {
    match format {
        WireFormat::Json => {
            serde_json::to_writer(&mut *w, resp)?;
            w.write_all(b"\n")?;
        }
        WireFormat::Binary => match resp {
            Response::Error { error } => {
                w.write_all(&[STATUS_ERR])?;
                write_string(w, error)?;
            }
            Response::Describe(d) => {
                w.write_all(&[STATUS_OK])?;
                w.write_all(&(d.vocab_size as u32).to_le_bytes())?;
                w.write_all(&(d.hidden_dim as u32).to_le_bytes())?;
                write_string(w, &d.name)?;
            }
            Response::Step(p) => {
                w.write_all(&[STATUS_OK])?;
                w.write_all(&(p.probs.len() as u32).to_le_bytes())?;
                w.write_all(&(p.representation.len() as u32).to_le_bytes())?;
                for x in p.probs.iter().chain(&p.representation) {
                    w.write_all(&(*x as f32).to_le_bytes())?;
                }
            }
        },
    }
    w.flush()?;
    Ok(())
}

/// Reads the response to a request of kind `expect`.
pub fn read_response(
    r: &mut impl BufRead,
    expect: &Request,
    format: WireFormat,
) -> Result<Response> {
    match format {
        WireFormat::Json => {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Backend("backend closed its output".into()));
            }
            Ok(serde_json::from_str(line.trim())?)
        }
        WireFormat::Binary => {
            if read_u8(r)? == STATUS_ERR {
                return Ok(Response::Error {
                    error: read_string(r)?,
                });
            }
            let vocab_size = read_u32(r)? as usize;
            let hidden_dim = read_u32(r)? as usize;
            match expect {
                Request::Describe => Ok(Response::Describe(BackendDescriptor {
                    name: read_string(r)?,
                    vocab_size,
                    hidden_dim,
                })),
                Request::Step { .. } => {
                    let probs = (0..vocab_size)
                        .map(|_| read_f32(r).map(f64::from))
                        .collect::<io::Result<_>>()?;
                    let representation = (0..hidden_dim)
                        .map(|_| read_f32(r).map(f64::from))
                        .collect::<io::Result<_>>()?;
                    Ok(Response::Step(StepPayload {
                        probs,
                        representation,
                    }))
                }
            }
        }
    }
}

/// Answers protocol requests from `backend` until the input ends.
pub fn serve<B: Backend + ?Sized>(
    backend: &B,
    mut input: impl BufRead,
    mut output: impl Write,
    format: WireFormat,
) -> Result<()> {
    while let Some(req) = read_request(&mut input, format)? {
        let resp = match &req {
            Request::Describe => Response::Describe(backend.descriptor()),
            Request::Step { context } => match backend.step(context) {
                Ok(out) => Response::Step(StepPayload::from(&out)),
                Err(e) => Response::Error {
                    error: e.to_string(),
                },
            },
        };
        write_response(&mut output, &resp, format)?;
    }
    Ok(())
}
