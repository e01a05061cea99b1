use std::io::{BufReader, BufWriter};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use super::wire::{read_response, write_request, Request, Response, WireFormat};
use super::{validate_context, validate_output, Backend, BackendDescriptor, StepOutput, TokenId};
use crate::error::{Error, Result};
use crate::prob::ProbabilityDistribution;
use crate::representation::Representation;

struct Channel {
    stdin: BufWriter<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

/// Backend served by a child process speaking the [`wire`](super::wire) protocol.
///
/// Requests are serialized through a mutex, one in flight at a time.
pub struct ProcessBackend {
    child: Mutex<Child>,
    channel: Mutex<Channel>,
    descriptor: BackendDescriptor,
    format: WireFormat,
}

impl ProcessBackend {
    /// Spawns `program args..` and performs the describe handshake.
    pub fn spawn(program: &str, args: &[String], format: WireFormat) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Backend(format!("cannot spawn {program}: {e}")))?;
        let channel = Channel {
            stdin: BufWriter::new(child.stdin.take().expect("piped stdin")),
            stdout: BufReader::new(child.stdout.take().expect("piped stdout")),
        };
        let mut backend = Self {
            child: Mutex::new(child),
            channel: Mutex::new(channel),
            descriptor: BackendDescriptor {
                name: String::new(),
                vocab_size: 0,
                hidden_dim: 0,
            },
            format,
        };
        match backend.call(&Request::Describe)? {
            Response::Describe(d) => {
                d.validate()?;
                backend.descriptor = d;
                Ok(backend)
            }
            other => Err(Error::Backend(format!(
                "unexpected describe reply {other:?}"
            ))),
        }
    }

    fn call(&self, req: &Request) -> Result<Response> {
        let mut ch = self.channel.lock().expect("channel lock");
        let Channel { stdin, stdout } = &mut *ch;
        write_request(stdin, req, self.format)?;
        match read_response(stdout, req, self.format)? {
            Response::Error { error } => Err(Error::Backend(error)),
            resp => Ok(resp),
        }
    }
}

impl Backend for ProcessBackend {
    fn descriptor(&self) -> BackendDescriptor {
        self.descriptor.clone()
    }

    fn step(&self, context: &[TokenId]) -> Result<StepOutput> {
        validate_context(context, self.descriptor.vocab_size)?;
        let payload = match self.call(&Request::Step {
            context: context.to_vec(),
        })? {
            Response::Step(p) => p,
            other => return Err(Error::Backend(format!("unexpected step reply {other:?}"))),
        };
        let out = StepOutput {
            dist: ProbabilityDistribution::from_weights(payload.probs)?,
            last_representation: Representation::new(payload.representation)?,
        };
        validate_output(&out, &self.descriptor)?;
        Ok(out)
    }
}

impl Drop for ProcessBackend {
    fn drop(&mut self) {
        if let Ok(mut child) = self.child.lock() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
