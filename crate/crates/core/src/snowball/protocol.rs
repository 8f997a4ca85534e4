//! Line-delimited JSON records exchanged with generator and evaluator workers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Request {
    Generate {
        id: u64,
        input: String,
        control: String,
        beam: usize,
    },
    Evaluate {
        id: u64,
        logic: String,
        text: String,
    },
}

impl Request {
    pub fn id(&self) -> u64 {
        match self {
            Request::Generate { id, .. } | Request::Evaluate { id, .. } => *id,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("requests serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Candidates { id: u64, candidates: Vec<Candidate> },
    Gamma { id: u64, gamma: f64 },
}

impl Response {
    pub fn id(&self) -> u64 {
        match self {
            Response::Candidates { id, .. } | Response::Gamma { id, .. } => *id,
        }
    }

    pub fn to_line(&self) -> String {
        let v = match self {
            Response::Candidates { id, candidates } => serde_json::json!({"id": id, "candidates": candidates}),
            Response::Gamma { id, gamma } => serde_json::json!({"id": id, "gamma": gamma}),
        };
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkerError {
    #[error("worker protocol error: {0}")]
    Protocol(String),
    #[error("worker did not answer within {0} ms")]
    Timeout(u64),
    #[error("worker exited before answering all requests")]
    Exited,
    #[error("worker i/o failed: {0}")]
    Io(String),
}

fn protocol(msg: impl Into<String>) -> WorkerError {
    WorkerError::Protocol(msg.into())
}

/// Decodes one response line. Unknown fields are ignored; error records
/// and missing fields are protocol errors.
pub fn parse_response(line: &str) -> Result<Response, WorkerError> {
    let v: Value = serde_json::from_str(line).map_err(|e| protocol(format!("malformed record: {e}")))?;
    let obj = v.as_object().ok_or_else(|| protocol("response is not an object"))?;
    let id = obj
        .get("id")
        .and_then(Value::as_u64)
        .ok_or_else(|| protocol("response without an integer id"))?;
    if let Some(err) = obj.get("error") {
        return Err(protocol(format!("worker reported error for id {id}: {err}")));
    }
    if let Some(g) = obj.get("gamma") {
        let gamma = g
            .as_f64()
            .ok_or_else(|| protocol(format!("id {id}: gamma is not a number")))?;
        return Ok(Response::Gamma { id, gamma });
    }
    if let Some(c) = obj.get("candidates") {
        let candidates: Vec<Candidate> = serde_json::from_value(c.clone())
            .map_err(|e| protocol(format!("id {id}: bad candidates: {e}")))?;
        return Ok(Response::Candidates { id, candidates });
    }
    Err(protocol(format!("id {id}: response has neither gamma nor candidates")))
}

/// Checks `responses` answer `requests` one-to-one and returns them in
/// request order.
pub fn match_responses(requests: &[Request], responses: Vec<Response>) -> Result<Vec<Response>, WorkerError> {
    let mut by_id: HashMap<u64, Response> = HashMap::with_capacity(responses.len());
    for r in responses {
        let id = r.id();
        if by_id.insert(id, r).is_some() {
            return Err(protocol(format!("duplicate response for id {id}")));
        }
    }
    let mut out = Vec::with_capacity(requests.len());
    for req in requests {
        let id = req.id();
        let resp = by_id
            .remove(&id)
            .ok_or_else(|| protocol(format!("no response for id {id}")))?;
        check_response(req, &resp)?;
        out.push(resp);
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(protocol(format!("response for unknown id {extra}")));
    }
    Ok(out)
}

pub fn check_response(req: &Request, resp: &Response) -> Result<(), WorkerError> {
    match (req, resp) {
        (Request::Generate { id, .. }, Response::Candidates { candidates, .. }) => {
            if candidates.is_empty() {
                return Err(protocol(format!("id {id}: empty beam")));
            }
            if let Some(c) = candidates.iter().find(|c| !c.score.is_finite()) {
                return Err(protocol(format!("id {id}: non-finite score {}", c.score)));
            }
            Ok(())
        }
        (Request::Evaluate { id, .. }, Response::Gamma { gamma, .. }) => {
            if (0.0..=1.0).contains(gamma) {
                Ok(())
            } else {
                Err(protocol(format!("id {id}: gamma {gamma} outside [0, 1]")))
            }
        }
        (req, _) => Err(protocol(format!("id {}: response does not fit the request op", req.id()))),
    }
}
