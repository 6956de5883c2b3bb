use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use instructplan::dataset::{load_annotations, load_scenes};
use instructplan::metrics::ade;
use instructplan::runner::PipelineSettings;
use instructplan::vlm_client::{MockBackend, MockScript};
use instructplan_service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn demo(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo").join(name)
}

fn app_with(delay: Duration, k: usize) -> Router {
    let manifest = load_scenes(&demo("manifest.json")).unwrap();
    let annotations = load_annotations(&demo("annotations.csv")).unwrap();
    let script = MockScript::load(&demo("mock_script.json")).unwrap();
    let settings = PipelineSettings::for_manifest(&manifest);
    let backend = Arc::new(MockBackend::new(script).with_delay(delay));
    router(AppState::new(manifest, annotations, backend, settings, k))
}

fn app() -> Router {
    app_with(Duration::ZERO, 1)
}

async fn send(app: Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, body)
}

async fn get_json(app: Router, uri: &str) -> (StatusCode, Value) {
    let (s, _, b) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap())
}

async fn plan(app: Router, scene: &str, body: Option<Value>) -> (StatusCode, Value) {
    let body = body.map(|v| Body::from(v.to_string())).unwrap_or_else(Body::empty);
    let req = Request::post(format!("/api/scenes/{scene}/plan"))
        .header(header::CONTENT_TYPE, "application/json")
        .body(body)
        .unwrap();
    let (s, _, b) = send(app, req).await;
    (s, serde_json::from_slice(&b).unwrap())
}

#[tokio::test]
async fn lists_scenes_sorted() {
    let (status, body) = get_json(app(), "/api/scenes").await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = body.as_array().unwrap().iter().map(|s| s["scene_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["scene-0001", "scene-0002", "scene-0003", "scene-0004", "scene-0005"]);
    assert_eq!(body[0]["frame_count"], 3);
}

#[tokio::test]
async fn scene_detail_and_frames() {
    let app = app();
    let (status, body) = get_json(app.clone(), "/api/scenes/scene-0003").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["horizon"], 10);
    assert_eq!(body["ground_truth"].as_array().unwrap().len(), 10);
    assert!(!body["annotations"].as_array().unwrap().is_empty());
    let url = body["frames"][0]["url"].as_str().unwrap().to_owned();
    assert!(url.starts_with("/frames/"), "{url}");

    let (status, headers, bytes) = send(app, Request::get(&url).body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers[header::CONTENT_TYPE], "image/png");
    assert_eq!(&bytes[..4], b"\x89PNG");
}

#[tokio::test]
async fn unknown_scene_is_404() {
    let (status, body) = get_json(app(), "/api/scenes/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "scene_not_found");
    assert!(body["message"].as_str().unwrap().contains("nope"));

    let (status, body) = plan(app(), "nope", Some(json!({}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "scene_not_found");
}

#[tokio::test]
async fn blank_instruction_is_422() {
    let (status, body) = plan(app(), "scene-0001", Some(json!({"instruction": "   "}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "empty_instruction");
}

#[tokio::test]
async fn malformed_body_is_400() {
    let req = Request::post("/api/scenes/scene-0001/plan").body(Body::from("{not json")).unwrap();
    let (status, _, body) = send(app(), req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let body: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(body["code"], "invalid_body");
}

#[tokio::test]
async fn missing_body_plans_baseline() {
    let (status, body) = plan(app(), "scene-0002", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["condition"], "baseline");
    assert!(body["instruction"].is_null());
    for p in body["prompts"].as_array().unwrap() {
        assert!(!p["text"].as_str().unwrap().contains("The passenger says"));
    }
}

#[tokio::test]
async fn stop_instruction_plans_zero_ade() {
    let text = "Stop at the curb on the right side of the road right before the crosswalk.";
    let (status, body) = plan(app(), "scene-0001", Some(json!({"instruction": text, "seed": 3}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["condition"], "instructed");
    assert_eq!(body["ade"], 0.0);
    assert_eq!(body["seed"], 3);
    assert_eq!(body["word_count"], 15);
    assert_eq!(body["global_waypoints"].as_array().unwrap().len(), 10);
    assert!(body["prompts"][0]["text"].as_str().unwrap().contains(text));
}

#[tokio::test]
async fn reported_ade_matches_waypoints() {
    let (_, detail) = get_json(app(), "/api/scenes/scene-0004").await;
    let (status, body) = plan(app(), "scene-0004", Some(json!({"instruction": "Turn left at the light"}))).await;
    assert_eq!(status, StatusCode::OK);
    let gt: Vec<instructplan::Point2> = serde_json::from_value(detail["ground_truth"].clone()).unwrap();
    let pred: Vec<instructplan::Point2> = serde_json::from_value(body["global_waypoints"].clone()).unwrap();
    let expected = ade(&pred, &gt).unwrap();
    assert!((body["ade"].as_f64().unwrap() - expected).abs() < 1e-12);
}

#[tokio::test]
async fn same_seed_same_plan() {
    let req = json!({"instruction": "Go straight when the stoplight turns green", "seed": 11});
    let (_, mut a) = plan(app(), "scene-0005", Some(req.clone())).await;
    let (_, mut b) = plan(app(), "scene-0005", Some(req)).await;
    a.as_object_mut().unwrap().remove("elapsed_seconds");
    b.as_object_mut().unwrap().remove("elapsed_seconds");
    assert_eq!(a, b);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn second_request_while_busy_is_409() {
    let app = app_with(Duration::from_millis(150), 1);
    let first = tokio::spawn(plan(app.clone(), "scene-0001", None));
    tokio::time::sleep(Duration::from_millis(50)).await;
    let (status, body) = plan(app.clone(), "scene-0002", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "busy");
    assert_eq!(first.await.unwrap().0, StatusCode::OK);
    // slot released
    assert_eq!(plan(app, "scene-0002", None).await.0, StatusCode::OK);
}

#[tokio::test]
async fn cors_is_open() {
    let req = Request::builder()
        .method(Method::OPTIONS)
        .uri("/api/scenes")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .body(Body::empty())
        .unwrap();
    let (status, headers, _) = send(app(), req).await;
    assert!(status.is_success());
    assert!(headers.contains_key(header::ACCESS_CONTROL_ALLOW_ORIGIN));

    let req = Request::get("/api/scenes").header(header::ORIGIN, "http://example.test").body(Body::empty()).unwrap();
    let (_, headers, _) = send(app(), req).await;
    assert_eq!(headers[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");
}
