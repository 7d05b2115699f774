use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use seqtrial_core::beta_math::quad_oracle;
use seqtrial_core::posterior::{tail_efficacy, tail_futility, ArmPairPosterior, TailMethod};
use seqtrial_core::trial_engine::TrialDesign;
use seqtrial_service::api::{router, ApiConfig, AppState, SCHEMA_HEADER};
use seqtrial_service::document::DesignDocument;
use seqtrial_service::store::Store;
use tower::ServiceExt;

fn app_with(store: Store, config: ApiConfig) -> axum::Router {
    router(AppState::new(store, config).unwrap())
}

fn app() -> axum::Router {
    app_with(Store::memory(), ApiConfig::default())
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, _, v) = call_full(app, method, uri, body, None).await;
    (status, v)
}

async fn call_full(
    app: &axum::Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
    token: Option<&str>,
) -> (StatusCode, axum::http::HeaderMap, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, headers, v)
}

fn standard_doc() -> Value {
    serde_json::to_value(DesignDocument::new(TrialDesign::standard())).unwrap()
}

async fn create(app: &axum::Router, doc: Value) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(doc)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

fn outcome(seq: u64, arm: &str, outcome: &str) -> Value {
    json!({ "seq": seq, "arm": arm, "outcome": outcome, "recorded_by": "nurse", "timestamp_ms": 1 })
}

#[tokio::test]
async fn ten_versus_zero_reaches_efficacy() {
    let app = app();
    let id = create(&app, standard_doc()).await;
    let mut seq = 1;
    let mut stopped_at = None;
    let plan = std::iter::repeat(("experimental", "success"))
        .take(10)
        .chain(std::iter::repeat(("control", "failure")).take(10));
    for (arm, out) in plan {
        let (status, v) = call(&app, "POST", &format!("/sessions/{id}/outcomes"), Some(outcome(seq, arm, out))).await;
        if stopped_at.is_some() {
            assert_eq!(status, StatusCode::CONFLICT, "{v}");
            continue;
        }
        assert_eq!(status, StatusCode::OK, "{v}");
        if v["status"] == "stopped" {
            stopped_at = Some(seq);
        }
        seq += 1;
    }
    assert!(stopped_at.is_some());
    let (status, v) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "stopped");
    assert_eq!(v["decision"], "efficacy");
    assert_eq!(v["eps_e"], 0.05);
    assert_eq!(v["delta"], 0.05);

    let c = &v["counts"];
    let get = |k: &str| c[k].as_u64().unwrap() as u32;
    let post = ArmPairPosterior::from_counts(
        seqtrial_core::beta_math::BetaParams::uniform(),
        seqtrial_core::beta_math::BetaParams::uniform(),
        (get("n0"), get("s0")),
        (get("n1"), get("s1")),
    )
    .unwrap();
    let te = tail_efficacy(&post, 0.05, TailMethod::Quadrature).unwrap();
    let tf = tail_futility(&post, TailMethod::Quadrature).unwrap();
    assert!((v["tail_efficacy"].as_f64().unwrap() - te).abs() <= 1e-12);
    assert!((v["tail_futility"].as_f64().unwrap() - tf).abs() <= 1e-12);
    let oracle = quad_oracle(post.control(), post.experimental(), 0.05).unwrap();
    assert!((te - oracle).abs() < 1e-8);
    assert!(te < 0.05);
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let app = app();
    let (status, v) = call(&app, "GET", "/sessions/nope/state", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "not_found");

    let id = create(&app, standard_doc()).await;
    let bad = json!({ "seq": 1, "arm": "placebo", "outcome": "success" });
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/outcomes"), Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["path"], "arm");

    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/outcomes"), Some(outcome(1, "control", "success"))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/outcomes"), Some(outcome(1, "control", "success"))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{v}");
    let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["n"], 1);

    let mut doc = standard_doc();
    doc["design"]["eps_e"] = json!(1.5);
    let (status, v) = call(&app, "POST", "/sessions", Some(doc)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["path"], "design.eps_e");

    let mut doc = standard_doc();
    doc["design"]["utilities"]["gain_efficacy"] = json!("lots");
    let (status, v) = call(&app, "POST", "/sessions", Some(doc)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["path"], "design.utilities.gain_efficacy");
}

#[tokio::test]
async fn log_and_headers() {
    let app = app();
    let id = create(&app, standard_doc()).await;
    let arms = ["control", "experimental", "experimental", "control", "control"];
    for (i, arm) in arms.iter().enumerate() {
        let (status, _) = call(&app, "POST", &format!("/sessions/{id}/outcomes"), Some(outcome(i as u64 + 1, arm, "failure"))).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (status, headers, v) = call_full(&app, "GET", &format!("/sessions/{id}/log"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers[SCHEMA_HEADER], "1");
    let events = v["events"].as_array().unwrap();
    assert_eq!(events.len(), 5);
    for (i, e) in events.iter().enumerate() {
        assert_eq!(e["seq"], i as u64 + 1);
        assert_eq!(e["arm"], arms[i]);
    }
    let (_, headers, _) = call_full(&app, "GET", "/sessions/missing/log", None, None).await;
    assert_eq!(headers[SCHEMA_HEADER], "1");
}

#[tokio::test]
async fn whatif_on_fresh_session() {
    let app = app();
    let id = create(&app, standard_doc()).await;
    let body = json!({ "seed": 17, "horizon": 500, "forward_reps": 200 });
    let (status, a) = call(&app, "POST", &format!("/sessions/{id}/whatif"), Some(body.clone())).await;
    assert_eq!(status, StatusCode::OK, "{a}");
    assert!(a["value"].as_f64().unwrap() > 0.0);
    assert_eq!(a["verdict"], "continue");
    assert_eq!(a["eps_f"], 0.05);
    let (_, b) = call(&app, "POST", &format!("/sessions/{id}/whatif"), Some(body)).await;
    assert_eq!(a, b);

    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/whatif"), Some(json!({ "seed": 1, "forward_reps": 5000 }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["path"], "forward_reps");
}

#[tokio::test]
async fn pure_cost_whatif_says_stop() {
    let app = app();
    let mut doc = standard_doc();
    for k in ["gain_efficacy", "gain_futility", "loss_efficacy", "loss_futility"] {
        doc["design"]["utilities"][k] = json!(0.0);
    }
    let id = create(&app, doc).await;
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/whatif"), Some(json!({ "seed": 3, "forward_reps": 50 }))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(v["value"].as_f64().unwrap() < 0.0);
    assert_eq!(v["verdict"], "stop_inconclusive");
}

#[tokio::test]
async fn bearer_token_enforced() {
    let app = app_with(
        Store::memory(),
        ApiConfig {
            token: Some("s3cret".into()),
            ..ApiConfig::default()
        },
    );
    let (status, _, _) = call_full(&app, "POST", "/sessions", Some(standard_doc()), None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _, _) = call_full(&app, "POST", "/sessions", Some(standard_doc()), Some("wrong")).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _, _) = call_full(&app, "POST", "/sessions", Some(standard_doc()), Some("s3cret")).await;
    assert_eq!(status, StatusCode::CREATED);
}

#[tokio::test]
async fn server_side_assignment() {
    let app = app();
    let mut doc = standard_doc();
    doc["assignment_seed"] = json!(99);
    let id = create(&app, doc).await;
    let mut arms = Vec::new();
    for seq in 1..=6u64 {
        let (status, a) = call(&app, "GET", &format!("/sessions/{id}/next-assignment"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(a["patient_index"], seq - 1);
        let arm = a["arm"].as_str().unwrap().to_string();
        let wrong = if arm == "control" { "experimental" } else { "control" };
        let (status, _) = call(&app, "POST", &format!("/sessions/{id}/outcomes"), Some(outcome(seq, wrong, "failure"))).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
        let mut ev = outcome(seq, &arm, "failure");
        ev["patient_index"] = json!(seq - 1);
        let (status, _) = call(&app, "POST", &format!("/sessions/{id}/outcomes"), Some(ev)).await;
        assert_eq!(status, StatusCode::OK);
        arms.push(arm);
    }
    for pair in arms.chunks(2) {
        assert_ne!(pair[0], pair[1]);
    }
    let plain = create(&app, standard_doc()).await;
    let (status, _) = call(&app, "GET", &format!("/sessions/{plain}/next-assignment"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn restart_replays_logs() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(Store::at(dir.path()).unwrap(), ApiConfig::default());
    let mut doc = standard_doc();
    doc["design"]["burn_in"] = json!(20);
    let id = create(&app, doc).await;
    for seq in 1..=30u64 {
        let arm = if seq % 2 == 0 { "control" } else { "experimental" };
        let out = if seq % 3 == 0 { "success" } else { "failure" };
        let (status, _) = call(&app, "POST", &format!("/sessions/{id}/outcomes"), Some(outcome(seq, arm, out))).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, before) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    let (_, log_before) = call(&app, "GET", &format!("/sessions/{id}/log"), None).await;
    // trajectory only starts at the burn-in
    assert_eq!(before["trajectory"][0]["n"], 20);

    let again = app_with(Store::at(dir.path()).unwrap(), ApiConfig::default());
    let (status, after) = call(&again, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(before, after);
    let (_, log_after) = call(&again, "GET", &format!("/sessions/{id}/log"), None).await;
    assert_eq!(log_before, log_after);
}
