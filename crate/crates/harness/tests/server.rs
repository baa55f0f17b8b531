use axum::body::Body;
use axum::http::{Request, StatusCode};
use blicket_core::trajectory::{import_dataset, Trajectory};
use blicket_harness::server::{bind, router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn create(app: &axum::Router, body: Value) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

fn act_body(bits: &[u8]) -> Value {
    json!({ "bits": bits.iter().map(|b| *b == 1).collect::<Vec<_>>() })
}

/// Labels of hypotheses with nonzero debug posterior weight.
fn live(v: &Value) -> Vec<String> {
    v["debug"]["posterior"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["weight"].as_f64().unwrap() > 0.0)
        .map(|e| e["label"].as_str().unwrap().to_string())
        .collect()
}

#[tokio::test]
async fn create_returns_initial_observation() {
    let app = router(AppState::default());
    let (status, v) = call(&app, "POST", "/sessions", Some(json!({}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(v["session_id"].is_string());
    assert_eq!(
        v["observation"],
        json!({ "placed": [false, false, false], "lit": false, "phase": false, "quiz_query": [false, false, false] })
    );
    assert!(v.get("debug").is_none());
}

#[tokio::test]
async fn full_episode_under_conjunctive_pair() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("sessions.jsonl");
    let app = router(AppState::new(Some(store.clone())));
    let id = create(&app, json!({ "preset": "conj-ab", "owner": "agent" })).await;
    let act = format!("/sessions/{id}/act");

    let (s, v) = call(&app, "POST", &act, Some(act_body(&[1, 1, 0, 0]))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["observation"]["lit"], json!(true));
    assert_eq!(v["reward"], json!(0.0));
    assert_eq!(v["done"], json!(false));

    let (_, v) = call(&app, "POST", &act, Some(act_body(&[0, 0, 0, 1]))).await;
    assert_eq!(v["phase"], json!("quiz"));
    assert_eq!(v["observation"]["quiz_query"], json!([true, false, false]));

    for yes in [1, 1, 0] {
        let (s, v) = call(&app, "POST", &act, Some(act_body(&[yes, 0, 0, 0]))).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v["reward"], json!(1.0));
    }
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["cumulative_reward"], json!(3.0));
    assert_eq!(v["done"], json!(true));
    assert_eq!(v["phase"], json!("done"));

    let (s, _) = call(&app, "POST", &act, Some(act_body(&[1, 0, 0, 0]))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let stored = import_dataset(&store).unwrap();
    assert_eq!(stored.len(), 1);
    let t = &stored[0];
    assert_eq!(t.header.owner.as_deref(), Some("agent"));
    assert_eq!(t.total_reward(), 3.0);
    assert_eq!(t.len(), 5);
    t.replay().unwrap();

    let (_, transcript) = call(&app, "GET", &format!("/sessions/{id}/transcript"), None).await;
    assert_eq!(transcript["steps"].as_array().unwrap().len(), 5);
    assert_eq!(transcript["header"]["hidden_hypothesis"], Value::Null);
}

#[tokio::test]
async fn hidden_hypothesis_only_in_debug() {
    let app = router(AppState::default());
    let id = create(&app, json!({ "preset": "conj-ab" })).await;
    let (_, v) = call(&app, "POST", &format!("/sessions/{id}/act"), Some(act_body(&[1, 0, 0, 0]))).await;
    assert!(!v.to_string().contains("conjunctive"));
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert!(v.get("debug").is_none());

    let (status, v) = call(&app, "POST", "/sessions", Some(json!({ "preset": "conj-ab", "debug": true }))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v["debug"]["hidden_hypothesis"], json!({ "form": "conjunctive", "blickets": [0, 1] }));
    let id = v["session_id"].as_str().unwrap();
    let (_, v) = call(&app, "POST", &format!("/sessions/{id}/act"), Some(act_body(&[1, 1, 0, 0]))).await;
    assert_eq!(live(&v), ["Conj{A,B}"]);

    let (_, v) = call(&app, "POST", "/sessions", Some(json!({ "debug": true, "seed": 4 }))).await;
    let id = v["session_id"].as_str().unwrap();
    let (_, v) = call(&app, "POST", &format!("/sessions/{id}/act"), Some(act_body(&[1, 1, 0, 0]))).await;
    assert_eq!(v["debug"]["posterior"].as_array().unwrap().len(), 6);
    if v["observation"]["lit"] == json!(true) {
        assert_eq!(live(&v), ["Disj{A}", "Disj{B}", "Conj{A,B}"]);
    } else {
        assert_eq!(live(&v), ["Disj{C}", "Conj{A,C}", "Conj{B,C}"]);
    }
    let (_, t) = call(&app, "GET", &format!("/sessions/{id}/transcript"), None).await;
    let t: Trajectory = serde_json::from_value(t).unwrap();
    t.replay().unwrap();
}

#[tokio::test]
async fn error_statuses() {
    let app = router(AppState::default());
    let (s, _) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "POST", "/sessions/nope/act", Some(act_body(&[0, 0, 0, 0]))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let id = create(&app, json!({})).await;
    let act = format!("/sessions/{id}/act");
    let (s, _) = call(&app, "POST", &act, Some(act_body(&[1, 0]))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", &act, Some(json!({ "bits": "1010" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", &act, None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    for body in [
        json!({ "preset": "nope" }),
        json!({ "preset": "default", "config": {} }),
        json!({ "config": { "max_steps": 2 } }),
        json!({ "colour": "red" }),
    ] {
        let (s, _) = call(&app, "POST", "/sessions", Some(body.clone())).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{body}");
    }
}

#[tokio::test]
async fn presets_listing() {
    let app = router(AppState::default());
    let (s, v) = call(&app, "GET", "/presets", None).await;
    assert_eq!(s, StatusCode::OK);
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"default") && names.contains(&"conj-ab"));
}

#[tokio::test]
async fn concurrent_sessions_store_whole_episodes() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.jsonl");
    let app = router(AppState::new(Some(store.clone())));
    let mut handles = Vec::new();
    for seed in 0..16u64 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let id = create(&app, json!({ "seed": seed, "config": { "space": "extended" } })).await;
            let act = format!("/sessions/{id}/act");
            loop {
                let (s, v) = call(&app, "POST", &act, Some(act_body(&[0, 1, 0, 1]))).await;
                assert_eq!(s, StatusCode::OK);
                if v["done"] == json!(true) {
                    break;
                }
            }
        }));
    }
    for h in handles {
        h.await.unwrap();
    }
    let stored = import_dataset(&store).unwrap();
    assert_eq!(stored.len(), 16);
    for t in &stored {
        assert_eq!(t.header.owner.as_deref(), Some("human"));
        t.replay().unwrap();
    }
}

#[tokio::test]
async fn busy_port_is_a_startup_error() {
    let first = bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    let addr = first.local_addr().unwrap();
    let err = bind(addr).await.unwrap_err();
    assert!(err.to_string().contains("cannot listen"));
}
