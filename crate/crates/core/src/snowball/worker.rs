//! Worker transports: in-process, subprocess over stdio, and HTTP.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::protocol::{match_responses, parse_response, Request, Response, WorkerError};

pub trait Worker {
    /// Sends every request and returns the validated responses in request order.
    fn exchange(&mut self, requests: &[Request]) -> Result<Vec<Response>, WorkerError>;

    /// Called before each iteration, so stateful workers can reseed.
    fn begin_iteration(&mut self, _index: usize) {}
}

/// Answers one request; the in-process half of a worker.
pub trait Handler {
    fn handle(&mut self, request: &Request) -> Result<Response, String>;

    fn begin_iteration(&mut self, _index: usize) {}
}

/// Runs a [`Handler`] in process.
pub struct LocalWorker<H>(pub H);

impl<H: Handler> Worker for LocalWorker<H> {
    fn exchange(&mut self, requests: &[Request]) -> Result<Vec<Response>, WorkerError> {
        let responses = requests
            .iter()
            .map(|r| self.0.handle(r).map_err(WorkerError::Protocol))
            .collect::<Result<Vec<_>, _>>()?;
        match_responses(requests, responses)
    }

    fn begin_iteration(&mut self, index: usize) {
        self.0.begin_iteration(index);
    }
}

/// A long-running child process speaking the protocol on stdin/stdout.
pub struct SubprocessWorker {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    max_in_flight: usize,
}

impl SubprocessWorker {
    /// Starts `command` through `sh -c`.
    pub fn spawn(command: &str, timeout: Duration, max_in_flight: usize) -> Result<Self, WorkerError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(format!("exec {command}"))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| WorkerError::Io(format!("cannot start `{command}`: {e}")))?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let stdin = child.stdin.take();
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines,
            timeout,
            max_in_flight: max_in_flight.max(1),
        })
    }

    fn send(&mut self, request: &Request) -> Result<(), WorkerError> {
        let stdin = self.stdin.as_mut().ok_or(WorkerError::Exited)?;
        let mut line = request.to_line();
        line.push('\n');
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::BrokenPipe => WorkerError::Exited,
                _ => WorkerError::Io(e.to_string()),
            })
    }

    fn receive(&mut self) -> Result<Response, WorkerError> {
        loop {
            let line = match self.lines.recv_timeout(self.timeout) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(WorkerError::Io(e.to_string())),
                Err(RecvTimeoutError::Timeout) => return Err(WorkerError::Timeout(self.timeout.as_millis() as u64)),
                Err(RecvTimeoutError::Disconnected) => return Err(WorkerError::Exited),
            };
            if !line.trim().is_empty() {
                return parse_response(&line);
            }
        }
    }
}

impl Worker for SubprocessWorker {
    fn exchange(&mut self, requests: &[Request]) -> Result<Vec<Response>, WorkerError> {
        let mut pending: VecDeque<&Request> = requests.iter().collect();
        let mut in_flight = 0;
        let mut responses = Vec::with_capacity(requests.len());
        while !pending.is_empty() || in_flight > 0 {
            while in_flight < self.max_in_flight {
                let Some(req) = pending.pop_front() else { break };
                self.send(req)?;
                in_flight += 1;
            }
            responses.push(self.receive()?);
            in_flight -= 1;
        }
        match_responses(requests, responses)
    }
}

impl Drop for SubprocessWorker {
    fn drop(&mut self) {
        // closing stdin lets a well-behaved worker exit on its own
        self.stdin.take();
        for _ in 0..20 {
            if matches!(self.child.try_wait(), Ok(Some(_))) {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Posts each record to an HTTP endpoint; the body of the reply is the
/// response record.
pub struct HttpWorker {
    endpoint: String,
    agent: ureq::Agent,
    timeout_ms: u64,
    max_in_flight: usize,
}

impl HttpWorker {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, max_in_flight: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .new_agent();
        Self {
            endpoint: endpoint.into(),
            agent,
            timeout_ms: timeout.as_millis() as u64,
            max_in_flight: max_in_flight.max(1),
        }
    }

    fn post(&self, request: &Request) -> Result<Response, WorkerError> {
        let reply = self
            .agent
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .send(request.to_line())
            .and_then(|mut r| r.body_mut().read_to_string());
        match reply {
            Ok(body) => parse_response(body.trim()),
            Err(ureq::Error::Timeout(_)) => Err(WorkerError::Timeout(self.timeout_ms)),
            Err(e) => Err(WorkerError::Io(e.to_string())),
        }
    }
}

impl Worker for HttpWorker {
    fn exchange(&mut self, requests: &[Request]) -> Result<Vec<Response>, WorkerError> {
        let mut responses = Vec::with_capacity(requests.len());
        for chunk in requests.chunks(self.max_in_flight) {
            let this = &*self;
            let results: Vec<Result<Response, WorkerError>> = thread::scope(|s| {
                let handles: Vec<_> = chunk.iter().map(|r| s.spawn(move || this.post(r))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(WorkerError::Io("request thread panicked".into()))))
                    .collect()
            });
            for r in results {
                responses.push(r?);
            }
        }
        match_responses(requests, responses)
    }
}

/// Serves requests from `input` until end of input, or until `limit`
/// requests have been answered. Bad records get an error record carrying
/// the request id when one can be read.
pub fn serve(
    handler: &mut dyn Handler,
    input: impl BufRead,
    mut output: impl Write,
    limit: Option<usize>,
) -> std::io::Result<usize> {
    let mut served = 0;
    for line in input.lines() {
        if limit.is_some_and(|n| served >= n) {
            break;
        }
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Request>(&line) {
            Ok(req) => match handler.handle(&req) {
                Ok(resp) => resp.to_line(),
                Err(message) => serde_json::json!({"id": req.id(), "error": message}).to_string(),
            },
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").cloned())
                    .unwrap_or(serde_json::Value::Null);
                serde_json::json!({"id": id, "error": e.to_string()}).to_string()
            }
        };
        writeln!(output, "{reply}")?;
        output.flush()?;
        served += 1;
    }
    Ok(served)
}
