use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lgtm::core::{Backend, GeneratedImage, GenerationRequest, LatentNoise, MockBackend, OutputSize};
use lgtm::formats::mask_png;
use lgtm::service::store::{JobState, JobStore};
use lgtm::service::{start, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(v) => req.body(Body::from(v.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn request(seed: u64) -> Value {
    json!({"prompt": "a cat", "seed": seed, "output_size": {"width": 64, "height": 64},
           "light": {"kind": "point", "ax": 0.0, "ay": 0.5, "radius": 0.8}})
}

async fn wait_done(app: &Router, id: &str) -> Value {
    for _ in 0..500 {
        let (status, body) = call(app, "GET", &format!("/v1/jobs/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        let v = json_of(&body);
        if v["state"] == "done" || v["state"] == "failed" {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("job {id} never finished");
}

/// Blocks every call until the gate opens, so the queue can be filled.
struct Gated {
    gate: Arc<std::sync::Mutex<()>>,
}

impl Backend for Gated {
    fn name(&self) -> &str {
        "gated"
    }

    fn denoise(&self, request: &GenerationRequest, noise: &LatentNoise) -> lgtm::core::Result<GeneratedImage> {
        let _open = self.gate.lock().unwrap();
        MockBackend.denoise(request, noise)
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn preview_returns_the_same_mask_as_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let app = start(ServiceConfig::new(dir.path(), Arc::new(MockBackend))).unwrap();
    let light = json!({"kind": "point", "ax": 0.25, "ay": 0.5, "radius": 0.8});
    let (status, body) =
        call(&app, "POST", "/v1/mask/preview", Some(json!({"light": light, "width": 40, "height": 30}))).await;
    assert_eq!(status, StatusCode::OK);
    let spec = lgtm::spec_json::from_value(light, true).unwrap();
    let expected = lgtm::core::make_light_mask(&spec, 40, 30).unwrap();
    assert_eq!(body, mask_png::encode(&expected).unwrap());
}

#[tokio::test(flavor = "multi_thread")]
async fn malformed_inputs_get_400_and_structured_errors() {
    let dir = tempfile::tempdir().unwrap();
    let app = start(ServiceConfig::new(dir.path(), Arc::new(MockBackend))).unwrap();
    let bad_spec = json!({"light": {"kind": "point", "ax": 0.5, "ay": 0.5, "radius": 0.0}, "width": 8, "height": 8});
    let (status, body) = call(&app, "POST", "/v1/mask/preview", Some(bad_spec)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["code"], "invalid_spec");

    let huge = json!({"light": {"kind": "point", "ax": 0.5, "ay": 0.5, "radius": 1.0}, "width": 4096, "height": 4096});
    assert_eq!(call(&app, "POST", "/v1/mask/preview", Some(huge)).await.0, StatusCode::PAYLOAD_TOO_LARGE);

    let mut req = request(0);
    req["output_size"]["width"] = json!(65);
    let (status, body) = call(&app, "POST", "/v1/generate", Some(req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["code"], "invalid_request");

    let mut req = request(0);
    req["surprise"] = json!(1);
    assert_eq!(call(&app, "POST", "/v1/generate", Some(req)).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn unknown_ids_get_404() {
    let dir = tempfile::tempdir().unwrap();
    let app = start(ServiceConfig::new(dir.path(), Arc::new(MockBackend))).unwrap();
    let (status, body) = call(&app, "GET", "/v1/jobs/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json_of(&body)["code"], "not_found");
    assert_eq!(call(&app, "GET", "/v1/images/nope", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn job_lifecycle_produces_the_cli_image() {
    let dir = tempfile::tempdir().unwrap();
    let app = start(ServiceConfig::new(dir.path(), Arc::new(MockBackend))).unwrap();
    let (status, body) = call(&app, "POST", "/v1/generate", Some(request(7))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = json_of(&body)["job_id"].as_str().unwrap().to_owned();
    let job = wait_done(&app, &id).await;
    assert_eq!(job["state"], "done");
    let (status, png) = call(&app, "GET", job["result"].as_str().unwrap(), None).await;
    assert_eq!(status, StatusCode::OK);

    let req: GenerationRequest = serde_json::from_value(request(7)).unwrap();
    let direct = lgtm::core::generate(&req, &MockBackend).unwrap();
    assert_eq!(png, lgtm::formats::rgb_png::encode(&direct.image).unwrap());
}

#[tokio::test(flavor = "multi_thread")]
#[allow(clippy::await_holding_lock)]
async fn full_queue_gets_503() {
    let dir = tempfile::tempdir().unwrap();
    let gate = Arc::new(std::sync::Mutex::new(()));
    let closed = gate.lock().unwrap();
    let mut config = ServiceConfig::new(dir.path(), Arc::new(Gated { gate: Arc::clone(&gate) }));
    config.queue_capacity = 2;
    let app = start(config).unwrap();

    let mut statuses = Vec::new();
    for seed in 0..6 {
        statuses.push(call(&app, "POST", "/v1/generate", Some(request(seed))).await.0);
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    // One job is taken by the worker, two wait in the queue.
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::ACCEPTED).count(), 3, "{statuses:?}");
    let (status, body) = call(&app, "POST", "/v1/generate", Some(request(9))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(json_of(&body)["code"], "queue_full");
    drop(closed);
}

#[tokio::test(flavor = "multi_thread")]
async fn restart_fails_running_jobs_and_resumes_queued_ones() {
    let dir = tempfile::tempdir().unwrap();
    let (running, queued) = {
        let store = JobStore::open(dir.path()).unwrap();
        let size = OutputSize::new(64, 64);
        let r = store.create(GenerationRequest::new("a", 1, size)).unwrap();
        let q = store.create(GenerationRequest::new("b", 2, size)).unwrap();
        store.mark_running(&r.id).unwrap();
        (r.id, q.id)
    };
    let app = start(ServiceConfig::new(dir.path(), Arc::new(MockBackend))).unwrap();
    let r = json_of(&call(&app, "GET", &format!("/v1/jobs/{running}"), None).await.1);
    assert_eq!(r["state"], "failed");
    assert_eq!(wait_done(&app, &queued).await["state"], "done");
    let store = JobStore::open(dir.path()).unwrap();
    assert_eq!(store.get(&queued).unwrap().state, JobState::Done);
}
