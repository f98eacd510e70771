use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use cobs_core::data::synthetic;
use cobs_core::{ari, normalize, run_kmeans, Dataset};
use cobs_service::{router, router_with_ui, AppState, Store};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(dir: &std::path::Path) -> Router {
    router(AppState::new(Store::open(dir).unwrap()))
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, req).await
}

async fn upload(app: &Router, query: &str, csv: String) -> (StatusCode, Value) {
    let req = Request::post(format!("/datasets{query}")).body(Body::from(csv)).unwrap();
    send(app, req).await
}

fn to_csv(d: &Dataset) -> String {
    let mut out = String::new();
    let labels = d.labels();
    for i in 0..d.len() {
        let row: Vec<String> = d.raw_row(i).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        if let Some(l) = labels {
            out.push_str(&format!(",{}", l[i]));
        }
        out.push('\n');
    }
    out
}

fn iris() -> String {
    std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/iris.csv")).unwrap()
}

fn kmeans_grid(k_hi: usize, seeds: usize) -> Value {
    json!({
        "kmeans": {"k": {"lo": 2, "hi": k_hi}, "seeds": seeds},
        "dbscan": null,
        "spectral": null
    })
}

async fn wait_ready(app: &Router, id: &str) -> Value {
    let start = Instant::now();
    loop {
        let (status, rec) = get(app, &format!("/sessions/{id}")).await;
        assert_eq!(status, StatusCode::OK);
        if rec["status"] != "generating" {
            return rec;
        }
        assert!(start.elapsed() < Duration::from_secs(300), "generation did not finish");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

async fn blob_session(app: &Router, budget: usize) -> String {
    let d = synthetic::simplex_blobs(2);
    let (status, ds) = upload(app, "?label_col=3", to_csv(&d)).await;
    assert_eq!(status, StatusCode::CREATED, "{ds}");
    let (status, rec) = post_json(
        app,
        "/sessions",
        json!({"dataset_id": ds["id"], "grid": kmeans_grid(5, 5), "budget": budget, "seed": 4}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{rec}");
    let id = rec["id"].as_str().unwrap().to_string();
    wait_ready(app, &id).await;
    id
}

#[tokio::test]
async fn iris_upload_and_default_session() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, ds) = upload(&app, "?label_col=species", iris()).await;
    assert_eq!(status, StatusCode::CREATED, "{ds}");
    assert_eq!(ds["n"], 147);
    assert_eq!(ds["f"], 4);
    assert_eq!(ds["classes"], 3);

    let id = ds["id"].as_str().unwrap();
    let (status, view) = get(&app, &format!("/datasets/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["projection"].as_array().unwrap().len(), 147);
    assert_eq!(view["class_names"], json!(["setosa", "versicolor", "virginica"]));

    let (status, rec) = post_json(&app, "/sessions", json!({"dataset_id": id, "budget": 3})).await;
    assert_eq!(status, StatusCode::CREATED, "{rec}");
    let sid = rec["id"].as_str().unwrap();
    let rec = wait_ready(&app, sid).await;
    assert_eq!(rec["status"], "idle", "{rec}");
    assert_eq!(rec["ensemble_size"], 931);
    assert_eq!(rec["pool_size"], 1000);

    // Same dataset and grid: cached ensemble, ready at once.
    let (status, again) = post_json(&app, "/sessions", json!({"dataset_id": id})).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(again["ensemble_id"], rec["ensemble_id"]);
    assert_eq!(again["status"], "idle");
    assert_ne!(again["id"], rec["id"]);
}

#[tokio::test]
async fn upload_errors() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, body) = upload(&app, "", String::new()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_request");

    let (status, body) = upload(&app, "", "a,b\n1,2\n3,x\n".into()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let msg = body["message"].as_str().unwrap();
    assert!(msg.contains("row") && msg.contains("column"), "{msg}");

    let (status, _) = upload(&app, "?label_col=species", "a,b\n1,2\n3,4\n".into()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = get(&app, "/datasets/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");
    let (status, _) = get(&app, "/datasets/..%2Fsessions").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = post_json(&app, "/sessions", json!({"dataset_id": "missing"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = get(&app, "/sessions/missing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = get(&app, "/sessions/missing/result").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn unlabeled_data_needs_interactive_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let d = synthetic::simplex_blobs(1);
    let csv: String = to_csv(&Dataset::from_rows("u", d.rows().map(|r| r.to_vec()).collect(), None).unwrap());
    let (status, ds) = upload(&app, "", csv).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(ds["classes"], Value::Null);

    let grid = kmeans_grid(4, 2);
    let (status, _) = post_json(
        &app,
        "/sessions",
        json!({"dataset_id": ds["id"], "grid": grid, "oracle": "labels"}),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, rec) = post_json(&app, "/sessions", json!({"dataset_id": ds["id"], "grid": grid})).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(rec["oracle"], "interactive");
    let sid = rec["id"].as_str().unwrap().to_string();
    wait_ready(&app, &sid).await;
    let (status, _) = get(&app, &format!("/sessions/{sid}/query")).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = post_json(&app, &format!("/sessions/{sid}/answer"), json!({})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, ans) = post_json(&app, &format!("/sessions/{sid}/answer"), json!({"kind": "MUST_LINK"})).await;
    assert_eq!(status, StatusCode::OK, "{ans}");
    assert_eq!(ans["kind"], "must_link");
    let (_, result) = get(&app, &format!("/sessions/{sid}/result")).await;
    assert_eq!(result["ari"], Value::Null);
}

#[tokio::test]
async fn query_answer_state_machine() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let sid = blob_session(&app, 2).await;

    let (status, result) = get(&app, &format!("/sessions/{sid}/result")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(result["no_constraints"], true);
    let (_, again) = get(&app, &format!("/sessions/{sid}/result")).await;
    assert_eq!(again["index"], result["index"]);

    let (status, _) = post_json(&app, &format!("/sessions/{sid}/answer"), json!({"kind": "must_link"})).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, q) = get(&app, &format!("/sessions/{sid}/query")).await;
    assert_eq!(status, StatusCode::OK, "{q}");
    assert_eq!(q["progress"], json!({"used": 0, "budget": 2}));
    assert_eq!(q["instances"][0]["values"].as_array().unwrap().len(), 3);
    let (_, rec) = get(&app, &format!("/sessions/{sid}")).await;
    assert_eq!(rec["status"], "awaiting_answer");

    let (status, body) = get(&app, &format!("/sessions/{sid}/query")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "conflict");

    let (status, _) = post_json(&app, &format!("/sessions/{sid}/answer"), json!({"pair": [0, 0]})).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, ans) = post_json(&app, &format!("/sessions/{sid}/answer"), json!({"pair": q["pair"]})).await;
    assert_eq!(status, StatusCode::OK, "{ans}");
    assert_eq!(ans["progress"]["used"], 1);
    assert_eq!(ans["status"], "idle");
    let top = ans["top"].as_array().unwrap();
    assert_eq!(top.len(), 5);
    let weights: Vec<f64> = top.iter().map(|t| t["weight"].as_f64().unwrap()).collect();
    assert!(weights.windows(2).all(|w| w[0] >= w[1]));
    let (_, result) = get(&app, &format!("/sessions/{sid}/result")).await;
    assert_eq!(result["index"], top[0]["index"]);
    assert_eq!(result["no_constraints"], false);

    get(&app, &format!("/sessions/{sid}/query")).await;
    let (_, ans) = post_json(&app, &format!("/sessions/{sid}/answer"), Value::Null).await;
    assert_eq!(ans["status"], "done");
    let (status, body) = get(&app, &format!("/sessions/{sid}/query")).await;
    assert_eq!(status, StatusCode::GONE);
    assert_eq!(body["result"], format!("/sessions/{sid}/result"));
}

#[tokio::test]
async fn zero_budget_session_has_a_result() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let sid = blob_session(&app, 0).await;
    let (_, rec) = get(&app, &format!("/sessions/{sid}")).await;
    assert_eq!(rec["status"], "done");
    let (status, _) = get(&app, &format!("/sessions/{sid}/query")).await;
    assert_eq!(status, StatusCode::GONE);
    let (status, result) = get(&app, &format!("/sessions/{sid}/result")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(result["no_constraints"], true);
}

/// The blobs are separable by K-means at K = 3 (checked directly), so a
/// label-driven session over a K-means sweep ends on a perfect clustering.
#[tokio::test]
async fn blob_smoke_session_recovers_classes() {
    let d = normalize(&synthetic::simplex_blobs(2));
    let truth: Vec<i32> = d.labels().unwrap().iter().map(|&l| l as i32).collect();
    assert_eq!(ari(&run_kmeans(&d, 3, 0).unwrap().assignment, &truth), 1.0);

    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let sid = blob_session(&app, 25).await;
    loop {
        let (status, _) = get(&app, &format!("/sessions/{sid}/query")).await;
        if status == StatusCode::GONE {
            break;
        }
        assert_eq!(status, StatusCode::OK);
        let (status, _) = post_json(&app, &format!("/sessions/{sid}/answer"), json!({})).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, result) = get(&app, &format!("/sessions/{sid}/result")).await;
    assert_eq!(result["progress"]["used"], 25);
    assert_eq!(result["ari"], 1.0);
    assert_eq!(result["cluster_sizes"], json!([30, 30, 30]));
}

#[tokio::test]
async fn sessions_replay_from_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let first = app(dir.path());
    let sid = blob_session(&first, 10).await;
    for kind in ["cannot_link", "must_link", "cannot_link", "cannot_link"] {
        get(&first, &format!("/sessions/{sid}/query")).await;
        let (status, _) = post_json(&first, &format!("/sessions/{sid}/answer"), json!({"kind": kind})).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, q1) = get(&first, &format!("/sessions/{sid}/query")).await;
    let (_, r1) = get(&first, &format!("/sessions/{sid}/result")).await;

    // A fresh process over the same store rebuilds the session from its log.
    let second = app(dir.path());
    let (status, rec) = get(&second, &format!("/sessions/{sid}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rec["progress"]["used"], 4);
    assert_eq!(rec["status"], "idle");
    let (_, q2) = get(&second, &format!("/sessions/{sid}/query")).await;
    let (_, r2) = get(&second, &format!("/sessions/{sid}/result")).await;
    assert_eq!(q1["pair"], q2["pair"]);
    assert_eq!(r1, r2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_generation_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let d = synthetic::mixture(900, 6, 4, 0.1, 3);
    let (_, ds) = upload(&app, "?label_col=6", to_csv(&d)).await;
    let (status, a) = post_json(&app, "/sessions", json!({"dataset_id": ds["id"]})).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(a["status"], "generating");
    let (status, b) = post_json(&app, "/sessions", json!({"dataset_id": ds["id"]})).await;
    assert_eq!(status, StatusCode::CONFLICT, "{b}");
    let (status, _) = get(&app, &format!("/sessions/{}/query", a["id"].as_str().unwrap())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let rec = wait_ready(&app, a["id"].as_str().unwrap()).await;
    assert_eq!(rec["status"], "idle");
    let (status, _) = post_json(&app, "/sessions", json!({"dataset_id": ds["id"]})).await;
    assert_eq!(status, StatusCode::CREATED);
}

#[tokio::test]
async fn static_ui_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<html>ui</html>").unwrap();
    let app = router_with_ui(
        AppState::new(Store::open(dir.path()).unwrap()),
        Some(ui.path().to_path_buf()),
    );
    let (status, body) = get(&app, "/ui/index.html").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, Value::String("<html>ui</html>".into()));
}
