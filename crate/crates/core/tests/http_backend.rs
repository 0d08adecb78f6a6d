//! The remote classifier and translation clients over real HTTP, against
//! the reference services hosted by a local tiny_http server.

use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde_json::Value;
use tiny_http::{Header, Server};

use selftrain_core::augment::{
    backtranslate, DictionaryTranslator, LanguagePair, TranslationService, TransportTranslator,
};
use selftrain_core::classifier::remote::{
    run_contract_suite, HttpTransport, InProcessTransport, Method, RemoteBackend, Request,
    Response, Service, SessionStatus, StubClassifierService, StubMode,
};
use selftrain_core::classifier::{Backend, LinearBackend, Model, TrainConfig};
use selftrain_core::features::FeatureSpace;
use selftrain_core::selftrain::{run_self_training, SelfTrainConfig};
use selftrain_core::synthetic::{generate, SyntheticSpec};
use selftrain_core::{Document, Error, Execution};

/// Serves `service` on an ephemeral port until the process exits.
fn serve<S: Service + 'static>(service: S) -> (String, Arc<S>) {
    let server = Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}", server.server_addr().to_ip().unwrap());
    let service = Arc::new(service);
    let handle = Arc::clone(&service);
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let method = match req.method() {
                tiny_http::Method::Get => Method::Get,
                _ => Method::Post,
            };
            let mut raw = String::new();
            req.as_reader().read_to_string(&mut raw).unwrap();
            let resp = if raw.is_empty() {
                handle.handle(&Request {
                    method,
                    path: req.url().to_string(),
                    body: None,
                })
            } else {
                match serde_json::from_str::<Value>(&raw) {
                    Ok(body) => handle.handle(&Request {
                        method,
                        path: req.url().to_string(),
                        body: Some(body),
                    }),
                    Err(_) => Response::error(400, "body is not JSON"),
                }
            };
            let header = Header::from_bytes("Content-Type", "application/json").unwrap();
            let out = tiny_http::Response::from_string(resp.body.to_string())
                .with_status_code(resp.status)
                .with_header(header);
            let _ = req.respond(out);
        }
    });
    (url, service)
}

fn small_space() -> FeatureSpace {
    FeatureSpace::new(1 << 12, &[1, 2], 0).unwrap()
}

#[test]
fn contract_suite_passes_over_http() {
    for service in [
        StubClassifierService::fixed([0.25, 0.75]),
        StubClassifierService::new(StubMode::Linear(LinearBackend::new(small_space()))),
    ] {
        let (url, _) = serve(service);
        let transport = HttpTransport::new(&url, Duration::from_secs(10));
        let checks = run_contract_suite(&transport);
        assert!(!checks.is_empty());
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}

#[test]
fn contract_suite_flags_unnormalized_rows() {
    let (url, _) = serve(StubClassifierService::fixed([0.6, 0.6]));
    let checks = run_contract_suite(&HttpTransport::new(&url, Duration::from_secs(10)));
    let row_check = checks
        .iter()
        .find(|c| c.name == "predict_rows_normalized")
        .unwrap();
    assert!(!row_check.passed);
}

#[test]
fn self_training_over_http_matches_in_process() {
    let bundle = generate(&SyntheticSpec {
        train: 40,
        test: 40,
        unlabelled: 200,
        ..SyntheticSpec::default()
    });
    let config = SelfTrainConfig {
        generations: 2,
        train: TrainConfig {
            epochs: 4,
            ..TrainConfig::default()
        },
        ..SelfTrainConfig::default()
    };
    let (url, _) = serve(StubClassifierService::new(StubMode::Linear(
        LinearBackend::new(small_space()),
    )));
    let http = RemoteBackend::http(&url, Duration::from_secs(30));
    assert_eq!(http.health().unwrap(), "idle");
    let over_http = run_self_training(&http, &bundle, &config, Execution::Sequential).unwrap();
    let local = RemoteBackend::new(Arc::new(InProcessTransport::new(
        "local",
        StubClassifierService::new(StubMode::Linear(LinearBackend::new(small_space()))),
    )));
    let in_process = run_self_training(&local, &bundle, &config, Execution::Sequential).unwrap();
    assert_eq!(over_http, in_process);
    assert_eq!(over_http.len(), 2);
    assert_eq!(http.health().unwrap(), "ready");
}

#[test]
fn backend_errors_name_the_endpoint() {
    let (url, service) = serve(StubClassifierService::fixed([0.5, 0.5]));
    let backend = RemoteBackend::http(&url, Duration::from_secs(10));
    let docs = vec![Document::new("a", "hello")];
    match backend.predict_texts(&["x".to_string()]) {
        Err(Error::BackendStatus {
            status: 503,
            endpoint,
            ..
        }) => assert_eq!(endpoint, url),
        other => panic!("{other:?}"),
    }
    let examples = generate(&SyntheticSpec {
        train: 20,
        ..SyntheticSpec::default()
    })
    .train;
    let model = backend
        .train(&examples, None, &TrainConfig::remote_defaults())
        .unwrap();
    assert_eq!(model.predict_proba(&docs).unwrap()[0].0, [0.5, 0.5]);
    service.force_status(SessionStatus::Training);
    match backend.train(&examples, None, &TrainConfig::remote_defaults()) {
        Err(Error::BackendStatus { status: 409, .. }) => {}
        other => panic!("{other:?}"),
    }
}

struct NotJson;

impl Service for NotJson {
    fn handle(&self, _: &Request) -> Response {
        Response::ok(Value::String("ok".into()))
    }
}

#[test]
fn malformed_responses_are_protocol_errors() {
    let (url, _) = serve(NotJson);
    let backend = RemoteBackend::http(&url, Duration::from_secs(10));
    match backend.predict_texts(&["x".to_string()]) {
        Err(e @ Error::Protocol { .. }) => assert!(e.is_backend()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn backtranslation_over_http() {
    let translator = DictionaryTranslator::default()
        .with("en", "de", &[("stupid", "dumm"), ("people", "leute")])
        .with("de", "en", &[("dumm", "dumb"), ("leute", "folks")]);
    let (url, _) = serve(TranslationService(translator));
    let client =
        TransportTranslator::new(Arc::new(HttpTransport::new(&url, Duration::from_secs(10))));
    let texts: Vec<String> = (0..130).map(|i| format!("stupid people {i}")).collect();
    let out = backtranslate(&texts, &client, &LanguagePair::default()).unwrap();
    assert_eq!(out.len(), 130);
    assert_eq!(out[129], "dumb folks 129");
}
