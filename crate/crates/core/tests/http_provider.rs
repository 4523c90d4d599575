mod common;

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use semshift_core::breadth::{EmbedError, Embedder, EmbeddingProvider, HttpProvider, StubProvider};
use semshift_core::report::{run_pipeline, AnalysisConfig, CellStatus, ProviderKind};

#[derive(Clone, Copy, PartialEq)]
enum Fault {
    None,
    WrongDim,
    WrongId,
    DropOne,
}

struct Mock {
    stub: StubProvider,
    max_batch: usize,
    fail_first: AtomicUsize,
    fault: Fault,
    requests: AtomicUsize,
    largest: AtomicUsize,
}

impl Mock {
    fn new(max_batch: usize, fail_first: usize, fault: Fault) -> Arc<Self> {
        Arc::new(Self {
            stub: StubProvider::new(8),
            max_batch,
            fail_first: AtomicUsize::new(fail_first),
            fault,
            requests: AtomicUsize::new(0),
            largest: AtomicUsize::new(0),
        })
    }
}

async fn healthz(State(m): State<Arc<Mock>>) -> Json<Value> {
    Json(json!({"status": "ok", "provider_id": m.stub.provider_id(), "dim": m.stub.dim()}))
}

async fn embed(State(m): State<Arc<Mock>>, Json(req): Json<Value>) -> Response {
    m.requests.fetch_add(1, Ordering::SeqCst);
    let sentences: Vec<String> = serde_json::from_value(req["sentences"].clone()).unwrap();
    if m.fail_first.load(Ordering::SeqCst) > 0 {
        m.fail_first.fetch_sub(1, Ordering::SeqCst);
        return (StatusCode::SERVICE_UNAVAILABLE, "warming up").into_response();
    }
    if sentences.len() > m.max_batch {
        return (StatusCode::PAYLOAD_TOO_LARGE, "batch too large").into_response();
    }
    m.largest.fetch_max(sentences.len(), Ordering::SeqCst);
    let mut vectors: Vec<Vec<f64>> = sentences.iter().map(|s| m.stub.vector(s)).collect();
    let mut id = m.stub.provider_id().to_string();
    match m.fault {
        Fault::WrongDim => vectors[0].push(0.0),
        Fault::WrongId => id.push_str("-other"),
        Fault::DropOne => {
            vectors.pop();
        }
        Fault::None => {}
    }
    Json(json!({"provider_id": id, "dim": m.stub.dim(), "vectors": vectors})).into_response()
}

/// Serves the mock on its own runtime thread; the blocking client runs on
/// the test thread.
fn serve(mock: Arc<Mock>) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
        rt.block_on(async move {
            let app = Router::new().route("/healthz", get(healthz)).route("/embed", post(embed)).with_state(mock);
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

fn connect(mock: &Arc<Mock>) -> HttpProvider {
    let addr = serve(mock.clone());
    HttpProvider::connect(&format!("http://{addr}/"), Duration::from_secs(10)).unwrap()
}

fn sentences(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("sentence number {i} about mental_health")).collect()
}

#[test]
fn health_and_embed_round_trip() {
    let mock = Mock::new(64, 0, Fault::None);
    let p = connect(&mock);
    assert_eq!(p.provider_id(), "stub-gaussian-v1/d8/s0");
    assert_eq!(p.dim(), 8);
    let s = sentences(3);
    let refs: Vec<&str> = s.iter().map(String::as_str).collect();
    let got = p.embed_batch(&refs).unwrap();
    for (v, text) in got.iter().zip(&refs) {
        assert_eq!(v, &mock.stub.vector(text));
    }
}

#[test]
fn oversized_batches_are_halved() {
    let mock = Mock::new(4, 0, Fault::None);
    let p = connect(&mock);
    let mut e = Embedder::new(&p);
    e.batch_size = 16;
    e.max_in_flight = 2;
    let s = sentences(40);
    let refs: Vec<&str> = s.iter().map(String::as_str).collect();
    let got = e.embed(&refs).unwrap();
    assert_eq!(got.len(), 40);
    for (v, text) in got.iter().zip(&refs) {
        assert_eq!(v.values(), mock.stub.vector(text).as_slice());
    }
    assert!(mock.largest.load(Ordering::SeqCst) <= 4);
}

#[test]
fn transient_failures_are_retried() {
    let mock = Mock::new(64, 2, Fault::None);
    let p = connect(&mock);
    let mut e = Embedder::new(&p);
    e.retry_backoff = Duration::from_millis(5);
    let s = sentences(5);
    let refs: Vec<&str> = s.iter().map(String::as_str).collect();
    assert_eq!(e.embed(&refs).unwrap().len(), 5);
    assert_eq!(mock.requests.load(Ordering::SeqCst), 3);

    let mock = Mock::new(64, 10, Fault::None);
    let p = connect(&mock);
    let mut e = Embedder::new(&p);
    e.retry_backoff = Duration::from_millis(1);
    e.retries = 2;
    assert!(matches!(e.embed(&refs), Err(EmbedError::Status { status: 503, .. })));
    assert_eq!(mock.requests.load(Ordering::SeqCst), 3);
}

#[test]
fn malformed_responses_are_rejected() {
    let s = sentences(3);
    let refs: Vec<&str> = s.iter().map(String::as_str).collect();
    let err = |fault| connect(&Mock::new(64, 0, fault)).embed_batch(&refs).unwrap_err();
    assert!(matches!(err(Fault::WrongDim), EmbedError::Dimension { expected: 8, got: 9, .. }));
    assert!(matches!(err(Fault::WrongId), EmbedError::ProviderMismatch { .. }));
    assert!(matches!(err(Fault::DropOne), EmbedError::Count { expected: 3, got: 2 }));
}

#[test]
fn pipeline_over_http_matches_stub() {
    let mock = Mock::new(16, 0, Fault::None);
    let addr = serve(mock.clone());
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = AnalysisConfig::load(common::toy_config()).unwrap();
    cfg.indices = vec!["breadth".parse().unwrap()];
    cfg.embedding.stub_dim = 8;
    cfg.output = a.path().to_path_buf();
    let local = run_pipeline(&cfg).unwrap().manifest;

    cfg.provider = ProviderKind::Http;
    cfg.embedding.url = format!("http://{addr}");
    cfg.embedding.cache_dir = Some(b.path().join("cache"));
    cfg.output = b.path().to_path_buf();
    let remote = run_pipeline(&cfg).unwrap().manifest;
    assert!(remote.cells.iter().all(|c| c.status == CellStatus::Ok));
    for rel in ["series/toy/mental_health/breadth.csv", "series/toy/mental_illness/breadth.csv"] {
        assert_eq!(local.files[rel], remote.files[rel], "{rel}");
    }
    let cache = b.path().join("cache/stub-gaussian-v1_d8_s0.vectors.csv");
    assert!(cache.is_file(), "{}", cache.display());

    // a second run is served from the persistent cache
    let before = mock.requests.load(Ordering::SeqCst);
    cfg.output = b.path().join("again");
    run_pipeline(&cfg).unwrap();
    assert_eq!(mock.requests.load(Ordering::SeqCst), before);
}
