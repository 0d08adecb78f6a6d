//! Client side of the remote-classifier wire protocol.
//!
//! Endpoints (JSON over HTTP):
//!
//! * `GET  /v1/health`  → `{"status": "idle" | "training" | "ready" | "failed"}`
//! * `POST /v1/train`   `{"labelled": [{"text", "label"}], "inferred": [...], "config": {...}}`
//!   → `{"status": "ready", "session": "..."}`; 400 for invalid requests
//!   (e.g. a single class), 409 while another job is training.
//! * `POST /v1/predict` `{"texts": [...]}` → `{"probs": [[p0, p1], ...]}`;
//!   503 until a model is ready.
//!
//! The same request/response shapes travel over [`HttpTransport`] or, for
//! tests and hermetic runs, an [`InProcessTransport`] wrapping a
//! [`Service`] such as [`StubClassifierService`].

use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    check_trainable, Backend, LinearBackend, LinearModel, Model, ProbabilityDistribution,
    TrainConfig,
};
use crate::corpus::{Document, Label, LabeledExample};
use crate::{Error, Result};

/// Probability rows from a backend must sum to one within this tolerance.
pub const PROTOCOL_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Request {
    pub method: Method,
    pub path: String,
    pub body: Option<Value>,
}

impl Request {
    pub fn get(path: &str) -> Self {
        Request {
            method: Method::Get,
            path: path.into(),
            body: None,
        }
    }

    pub fn post(path: &str, body: Value) -> Self {
        Request {
            method: Method::Post,
            path: path.into(),
            body: Some(body),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Response {
    pub status: u16,
    pub body: Value,
}

impl Response {
    pub fn ok(body: Value) -> Self {
        Response { status: 200, body }
    }

    pub fn error(status: u16, message: impl Into<String>) -> Self {
        Response {
            status,
            body: json!({ "error": message.into() }),
        }
    }
}

/// Delivers requests to an endpoint. Transport failures (unreachable
/// endpoint, timeout) are errors; any HTTP status is a [`Response`].
pub trait Transport: Send + Sync {
    fn endpoint(&self) -> &str;

    fn send(&self, request: &Request) -> Result<Response>;
}

pub struct HttpTransport {
    base_url: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        HttpTransport {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }
}

impl Transport for HttpTransport {
    fn endpoint(&self) -> &str {
        &self.base_url
    }

    fn send(&self, request: &Request) -> Result<Response> {
        let url = format!("{}{}", self.base_url, request.path);
        let result = match (&request.method, &request.body) {
            (Method::Get, _) => self.agent.get(&url).call(),
            (Method::Post, Some(body)) => self.agent.post(&url).send_json(body),
            (Method::Post, None) => self.agent.post(&url).call(),
        };
        let read_body = |r: ureq::Response| r.into_json::<Value>().unwrap_or(Value::Null);
        match result {
            Ok(r) => {
                let status = r.status();
                Ok(Response {
                    status,
                    body: r.into_json::<Value>().map_err(|e| Error::Protocol {
                        endpoint: self.base_url.clone(),
                        message: format!("response is not JSON: {e}"),
                    })?,
                })
            }
            Err(ureq::Error::Status(status, r)) => Ok(Response {
                status,
                body: read_body(r),
            }),
            Err(ureq::Error::Transport(t)) => {
                let message = t.to_string();
                if message.contains("timed out") || message.contains("Timeout") {
                    Err(Error::Timeout {
                        endpoint: self.base_url.clone(),
                    })
                } else {
                    Err(Error::Connection {
                        endpoint: self.base_url.clone(),
                        message,
                    })
                }
            }
        }
    }
}

/// Request handler living in the same process.
pub trait Service: Send + Sync {
    fn handle(&self, request: &Request) -> Response;
}

pub struct InProcessTransport<S> {
    name: String,
    service: S,
}

impl<S: Service> InProcessTransport<S> {
    pub fn new(name: impl Into<String>, service: S) -> Self {
        InProcessTransport {
            name: name.into(),
            service,
        }
    }

    pub fn service(&self) -> &S {
        &self.service
    }
}

impl<S: Service> Transport for InProcessTransport<S> {
    fn endpoint(&self) -> &str {
        &self.name
    }

    fn send(&self, request: &Request) -> Result<Response> {
        // round-trip through JSON text so in-process runs see exactly what
        // the HTTP transport would
        let request = Request {
            body: request
                .body
                .as_ref()
                .map(|b| serde_json::from_str(&b.to_string()).expect("valid JSON")),
            ..request.clone()
        };
        Ok(self.service.handle(&request))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireExample {
    pub text: String,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    pub labelled: Vec<WireExample>,
    pub inferred: Vec<WireExample>,
    pub config: TrainConfig,
}

impl TrainRequest {
    pub fn from_examples(train: &[LabeledExample], config: &TrainConfig) -> Self {
        let wire = |e: &LabeledExample| WireExample {
            text: e.text().to_string(),
            label: e.label,
        };
        TrainRequest {
            labelled: train.iter().filter(|e| e.is_human()).map(wire).collect(),
            inferred: train.iter().filter(|e| !e.is_human()).map(wire).collect(),
            config: config.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub texts: Vec<String>,
}

/// Checks a `/v1/predict` body against the request it answers.
pub fn parse_probs(
    endpoint: &str,
    body: &Value,
    expected: usize,
) -> Result<Vec<ProbabilityDistribution>> {
    let violation = |message: String| Error::Protocol {
        endpoint: endpoint.to_string(),
        message,
    };
    let rows = body
        .get("probs")
        .and_then(Value::as_array)
        .ok_or_else(|| violation("missing \"probs\" array".into()))?;
    if rows.len() != expected {
        return Err(violation(format!(
            "{} probability rows for {expected} texts",
            rows.len()
        )));
    }
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let row = row
                .as_array()
                .ok_or_else(|| violation(format!("row {i} is not an array")))?;
            if row.len() != 2 {
                return Err(violation(format!(
                    "row {i} has {} classes, expected 2",
                    row.len()
                )));
            }
            let p = [row[0].as_f64(), row[1].as_f64()];
            let (Some(a), Some(b)) = (p[0], p[1]) else {
                return Err(violation(format!("row {i} is not numeric")));
            };
            let dist = ProbabilityDistribution([a, b]);
            dist.validate(PROTOCOL_TOLERANCE)
                .map_err(|m| violation(format!("row {i}: {m}")))?;
            Ok(dist)
        })
        .collect()
}

fn status_error(endpoint: &str, resp: &Response) -> Error {
    let message = resp
        .body
        .get("error")
        .and_then(Value::as_str)
        .map(str::to_string)
        .unwrap_or_else(|| resp.body.to_string());
    Error::BackendStatus {
        endpoint: endpoint.to_string(),
        status: resp.status,
        message,
    }
}

/// A [`Backend`] that delegates training and inference to a remote
/// classifier server.
#[derive(Clone)]
pub struct RemoteBackend {
    transport: Arc<dyn Transport>,
    predict_retries: usize,
    // serializes requests: one in flight per backend
    gate: Arc<Mutex<()>>,
}

impl RemoteBackend {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        RemoteBackend {
            transport,
            predict_retries: 2,
            gate: Arc::new(Mutex::new(())),
        }
    }

    pub fn http(base_url: &str, timeout: Duration) -> Self {
        RemoteBackend::new(Arc::new(HttpTransport::new(base_url, timeout)))
    }

    pub fn with_predict_retries(mut self, retries: usize) -> Self {
        self.predict_retries = retries;
        self
    }

    pub fn endpoint(&self) -> &str {
        self.transport.endpoint()
    }

    fn send(&self, request: &Request) -> Result<Response> {
        let _guard = self.gate.lock().unwrap_or_else(|e| e.into_inner());
        self.transport.send(request)
    }

    pub fn health(&self) -> Result<String> {
        let resp = self.send(&Request::get("/v1/health"))?;
        if resp.status != 200 {
            return Err(status_error(self.endpoint(), &resp));
        }
        resp.body
            .get("status")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Error::Protocol {
                endpoint: self.endpoint().to_string(),
                message: "health response lacks \"status\"".into(),
            })
    }

    pub fn predict_texts(&self, texts: &[String]) -> Result<Vec<ProbabilityDistribution>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let request = Request::post(
            "/v1/predict",
            json!(PredictRequest {
                texts: texts.to_vec()
            }),
        );
        let mut attempt = 0;
        let resp = loop {
            match self.send(&request) {
                Ok(r) => break r,
                Err(e @ (Error::Connection { .. } | Error::Timeout { .. }))
                    if attempt >= self.predict_retries =>
                {
                    return Err(e)
                }
                Err(Error::Connection { .. } | Error::Timeout { .. }) => attempt += 1,
                Err(e) => return Err(e),
            }
        };
        if resp.status != 200 {
            return Err(status_error(self.endpoint(), &resp));
        }
        parse_probs(self.endpoint(), &resp.body, texts.len())
    }
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("endpoint", &self.endpoint())
            .field("predict_retries", &self.predict_retries)
            .finish()
    }
}

#[derive(Debug)]
pub struct RemoteModel {
    backend: RemoteBackend,
    pub session: Option<String>,
}

impl Model for RemoteModel {
    fn predict_proba(&self, docs: &[Document]) -> Result<Vec<ProbabilityDistribution>> {
        let texts: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
        self.backend.predict_texts(&texts)
    }
}

impl Backend for RemoteBackend {
    type Model = RemoteModel;

    /// Never retried: a train request is not idempotent.
    fn train(
        &self,
        train: &[LabeledExample],
        _dev: Option<&[LabeledExample]>,
        config: &TrainConfig,
    ) -> Result<RemoteModel> {
        config.validate()?;
        check_trainable(train)?;
        let body = json!(TrainRequest::from_examples(train, config));
        let resp = self.send(&Request::post("/v1/train", body))?;
        if resp.status != 200 {
            return Err(status_error(self.endpoint(), &resp));
        }
        match resp.body.get("status").and_then(Value::as_str) {
            Some("ready") => Ok(RemoteModel {
                backend: self.clone(),
                session: resp
                    .body
                    .get("session")
                    .and_then(Value::as_str)
                    .map(str::to_string),
            }),
            Some(other) => Err(Error::Protocol {
                endpoint: self.endpoint().to_string(),
                message: format!("train finished with status {other:?}"),
            }),
            None => Err(Error::Protocol {
                endpoint: self.endpoint().to_string(),
                message: "train response lacks \"status\"".into(),
            }),
        }
    }
}

/// What the stub server answers predictions with.
pub enum StubMode {
    /// The same distribution for every text (validation is still applied
    /// on the client side, so malformed rows can be injected here).
    Fixed(Vec<f64>),
    /// Trains the built-in linear model on each request.
    Linear(LinearBackend),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionStatus {
    Idle,
    Training,
    Ready,
    Failed,
}

impl SessionStatus {
    fn as_str(self) -> &'static str {
        match self {
            SessionStatus::Idle => "idle",
            SessionStatus::Training => "training",
            SessionStatus::Ready => "ready",
            SessionStatus::Failed => "failed",
        }
    }
}

struct StubState {
    status: SessionStatus,
    model: Option<LinearModel>,
    sessions: usize,
}

/// Reference implementation of the server side of the protocol.
pub struct StubClassifierService {
    mode: StubMode,
    state: Mutex<StubState>,
}

impl StubClassifierService {
    pub fn new(mode: StubMode) -> Self {
        StubClassifierService {
            mode,
            state: Mutex::new(StubState {
                status: SessionStatus::Idle,
                model: None,
                sessions: 0,
            }),
        }
    }

    pub fn fixed(probs: [f64; 2]) -> Self {
        StubClassifierService::new(StubMode::Fixed(probs.to_vec()))
    }

    /// Puts the session into a state, e.g. to simulate a running job.
    pub fn force_status(&self, status: SessionStatus) {
        self.state.lock().unwrap().status = status;
    }

    fn train(&self, body: Option<&Value>) -> Response {
        let req: TrainRequest = match body.map(|b| serde_json::from_value(b.clone())) {
            Some(Ok(r)) => r,
            Some(Err(e)) => return Response::error(400, format!("malformed train request: {e}")),
            None => return Response::error(400, "missing body"),
        };
        {
            let mut st = self.state.lock().unwrap();
            if st.status == SessionStatus::Training {
                return Response::error(409, "a training job is already running");
            }
            st.status = SessionStatus::Training;
        }
        let examples: Vec<LabeledExample> = req
            .labelled
            .iter()
            .enumerate()
            .map(|(i, w)| {
                LabeledExample::human(Document::new(format!("l{i}"), w.text.clone()), w.label)
            })
            .chain(req.inferred.iter().enumerate().map(|(i, w)| {
                LabeledExample::weak(Document::new(format!("i{i}"), w.text.clone()), w.label, 1.0)
            }))
            .collect();
        let outcome = check_trainable(&examples).and_then(|_| match &self.mode {
            StubMode::Fixed(_) => Ok(None),
            StubMode::Linear(b) => b.train(&examples, None, &req.config).map(Some),
        });
        let mut st = self.state.lock().unwrap();
        match outcome {
            Ok(model) => {
                st.model = model;
                st.status = SessionStatus::Ready;
                st.sessions += 1;
                Response::ok(json!({ "status": "ready", "session": format!("s{}", st.sessions) }))
            }
            Err(e) => {
                st.status = if st.model.is_some() || st.sessions > 0 {
                    SessionStatus::Ready
                } else {
                    SessionStatus::Idle
                };
                Response::error(400, e.to_string())
            }
        }
    }

    fn predict(&self, body: Option<&Value>) -> Response {
        let st = self.state.lock().unwrap();
        if st.status != SessionStatus::Ready {
            return Response::error(503, format!("session is {}", st.status.as_str()));
        }
        let req: PredictRequest = match body.map(|b| serde_json::from_value(b.clone())) {
            Some(Ok(r)) => r,
            _ => return Response::error(400, "malformed predict request"),
        };
        let probs: Vec<Vec<f64>> = match (&self.mode, &st.model) {
            (StubMode::Fixed(p), _) => vec![p.clone(); req.texts.len()],
            (StubMode::Linear(_), Some(m)) => req
                .texts
                .iter()
                .map(|t| {
                    m.proba_features(&m.feature_space().featurize_text(t))
                        .0
                        .to_vec()
                })
                .collect(),
            (StubMode::Linear(_), None) => return Response::error(503, "no model"),
        };
        Response::ok(json!({ "probs": probs }))
    }
}

impl Service for StubClassifierService {
    fn handle(&self, request: &Request) -> Response {
        match (request.method, request.path.as_str()) {
            (Method::Get, "/v1/health") => {
                let st = self.state.lock().unwrap();
                Response::ok(json!({ "status": st.status.as_str() }))
            }
            (Method::Post, "/v1/train") => self.train(request.body.as_ref()),
            (Method::Post, "/v1/predict") => self.predict(request.body.as_ref()),
            _ => Response::error(404, format!("no route {}", request.path)),
        }
    }
}

/// Outcome of one protocol check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Twenty short labelled texts, ten per class.
pub fn contract_fixture() -> Vec<WireExample> {
    let offensive = ["idiot", "moron", "stupid", "trash", "loser"];
    let benign = ["lovely", "thanks", "great", "sunny", "friend"];
    let mut out = Vec::new();
    for i in 0..10 {
        out.push(WireExample {
            text: format!("you are a {} number {i}", offensive[i % 5]),
            label: Label::Offensive,
        });
        out.push(WireExample {
            text: format!("what a {} day number {i}", benign[i % 5]),
            label: Label::NotOffensive,
        });
    }
    out
}

/// Runs the protocol contract against any endpoint: health schema, request
/// validation and error codes, training on the 20-example fixture,
/// probability normalization and index alignment of predictions.
pub fn run_contract_suite(transport: &dyn Transport) -> Vec<ContractCheck> {
    let mut checks = Vec::new();
    let mut check = |name: &'static str, result: std::result::Result<(), String>| {
        checks.push(ContractCheck {
            name,
            passed: result.is_ok(),
            detail: result.err().unwrap_or_default(),
        })
    };
    let send = |r: Request| transport.send(&r).map_err(|e| e.to_string());
    let config = TrainConfig {
        epochs: 3,
        ..TrainConfig::remote_defaults()
    };

    check(
        "health_schema",
        send(Request::get("/v1/health")).and_then(|r| {
            let s = r.body.get("status").and_then(Value::as_str).unwrap_or("");
            if r.status == 200 && ["idle", "training", "ready", "failed"].contains(&s) {
                Ok(())
            } else {
                Err(format!("status {} body {}", r.status, r.body))
            }
        }),
    );

    let fixture = contract_fixture();
    let single: Vec<WireExample> = fixture
        .iter()
        .filter(|w| w.label == Label::Offensive)
        .cloned()
        .collect();
    check(
        "train_rejects_single_class",
        send(Request::post(
            "/v1/train",
            json!(TrainRequest {
                labelled: single,
                inferred: vec![],
                config: config.clone()
            }),
        ))
        .and_then(|r| {
            if (400..500).contains(&r.status) && r.body.get("error").is_some() {
                Ok(())
            } else {
                Err(format!(
                    "expected 4xx with error, got {} {}",
                    r.status, r.body
                ))
            }
        }),
    );

    check(
        "train_rejects_malformed_body",
        send(Request::post("/v1/train", json!({ "labelled": "nope" }))).and_then(|r| {
            if (400..500).contains(&r.status) {
                Ok(())
            } else {
                Err(format!("expected 4xx, got {}", r.status))
            }
        }),
    );

    let (labelled, inferred) = fixture.split_at(14);
    check(
        "train_fixture_ready",
        send(Request::post(
            "/v1/train",
            json!(TrainRequest {
                labelled: labelled.to_vec(),
                inferred: inferred.to_vec(),
                config
            }),
        ))
        .and_then(|r| match r.body.get("status").and_then(Value::as_str) {
            Some("ready") if r.status == 200 => Ok(()),
            _ => Err(format!("{} {}", r.status, r.body)),
        }),
    );

    let texts: Vec<String> = fixture.iter().map(|w| w.text.clone()).collect();
    let predicted = send(Request::post("/v1/predict", json!({ "texts": texts }))).and_then(|r| {
        if r.status != 200 {
            return Err(format!("status {}", r.status));
        }
        parse_probs(transport.endpoint(), &r.body, texts.len()).map_err(|e| e.to_string())
    });
    check(
        "predict_rows_normalized",
        predicted.as_ref().map(|_| ()).map_err(Clone::clone),
    );

    let reversed: Vec<String> = texts.iter().rev().cloned().collect();
    check(
        "predict_alignment",
        predicted.and_then(|fwd| {
            let r = send(Request::post("/v1/predict", json!({ "texts": reversed })))?;
            let back = parse_probs(transport.endpoint(), &r.body, texts.len())
                .map_err(|e| e.to_string())?;
            let aligned = fwd
                .iter()
                .zip(back.iter().rev())
                .all(|(a, b)| (a.0[0] - b.0[0]).abs() <= PROTOCOL_TOLERANCE);
            if aligned {
                Ok(())
            } else {
                Err("rows do not follow input order".into())
            }
        }),
    );

    check(
        "predict_empty",
        send(Request::post("/v1/predict", json!({ "texts": [] }))).and_then(|r| {
            match r.body.get("probs").and_then(Value::as_array) {
                Some(rows) if r.status == 200 && rows.is_empty() => Ok(()),
                _ => Err(format!("{} {}", r.status, r.body)),
            }
        }),
    );

    checks
}
