mod common;

use std::fs;
use std::path::Path;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use common::*;
use http_body_util::BodyExt;
use labelwise::api::{router, AppState, Role, TokenMap, SCHEMA_HEADER};
use labelwise::cli::{run, Cli};
use labelwise::store::Store;
use labelwise_core::Label;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

struct Fixture {
    _dir: TempDir,
    store_dir: std::path::PathBuf,
    app: Router,
}

fn tokens() -> TokenMap {
    let mut t = TokenMap::default();
    for i in 1..=3 {
        t.insert(format!("t-ann{i}"), format!("ann{i}"), Role::Annotator);
    }
    t.insert("t-coord", "ann1", Role::Coordinator);
    t.insert("t-mod", "moderator", Role::Moderator);
    t
}

/// Ten postings in one calibration round for ann1..ann3.
fn fixture_with(setup: impl FnOnce(&mut Store), static_dir: Option<&Path>) -> Fixture {
    let (dir, mut store) = store_with(12, 3);
    calibration(&mut store, ids(0..10));
    setup(&mut store);
    let store_dir = store.dir().to_path_buf();
    Fixture {
        app: router(AppState::new(store, tokens()), static_dir),
        store_dir,
        _dir: dir,
    }
}

fn fixture() -> Fixture {
    fixture_with(|_| {}, None)
}

struct Reply {
    status: StatusCode,
    schema: Option<String>,
    body: Value,
}

async fn call(app: &Router, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> Reply {
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
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let schema = resp
        .headers()
        .get(SCHEMA_HEADER)
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let body = serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()));
    Reply { status, schema, body }
}

async fn get(app: &Router, uri: &str, token: &str) -> Reply {
    call(app, Method::GET, uri, Some(token), None).await
}

async fn post(app: &Router, uri: &str, token: &str, body: Value) -> Reply {
    call(app, Method::POST, uri, Some(token), Some(body)).await
}

#[tokio::test]
async fn missing_or_unknown_tokens_are_unauthorized() {
    let f = fixture();
    let r = call(&f.app, Method::GET, "/api/stats", None, None).await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    assert_eq!(r.schema.as_deref(), Some("1"));
    assert_eq!(get(&f.app, "/api/stats", "forged").await.status, StatusCode::UNAUTHORIZED);
    let r = post(&f.app, "/api/annotations", "forged", json!({"posting_id": "p0000", "label": 1})).await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn assignments_carry_the_scale_and_progress() {
    let f = fixture();
    let r = get(&f.app, "/api/assignments", "t-ann2").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.schema.as_deref(), Some("1"));
    let captions: Vec<(u64, &str)> = r.body["scale"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["value"].as_u64().unwrap(), e["caption"].as_str().unwrap()))
        .collect();
    assert_eq!(captions, [(0, "none"), (1, "mild"), (2, "present"), (3, "strong"), (4, "extreme")]);
    assert_eq!(r.body["open"].as_array().unwrap().len(), 10);
    assert_eq!(r.body["open"][0]["text"], "comment number 0");
    assert_eq!((r.body["done"].as_u64(), r.body["total"].as_u64()), (Some(0), Some(10)));

    post(&f.app, "/api/annotations", "t-ann2", json!({"posting_id": "p0000", "label": 2})).await;
    let r = get(&f.app, "/api/assignments", "t-ann2").await;
    assert_eq!(r.body["open"].as_array().unwrap().len(), 9);
    assert_eq!(r.body["done"], 1);
}

#[tokio::test]
async fn invalid_labels_are_unprocessable_with_an_explanation() {
    let f = fixture();
    let r = post(&f.app, "/api/annotations", "t-ann1", json!({"posting_id": "p0000", "label": 5})).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(r.body["error"].as_str().unwrap().contains("0..=4"), "{}", r.body);
    for bad in [json!({"posting_id": "p0000", "label": "x"}), json!({"posting_id": "p0000"})] {
        let r = post(&f.app, "/api/annotations", "t-ann1", bad).await;
        assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
        assert!(r.body["error"].is_string());
    }
}

#[tokio::test]
async fn repeated_annotation_posts_echo_the_same_record() {
    let f = fixture();
    let body = json!({"posting_id": "p0003", "label": 3});
    let first = post(&f.app, "/api/annotations", "t-ann1", body.clone()).await;
    assert_eq!(first.status, StatusCode::OK);
    assert_eq!(first.body["label"], 3);
    assert_eq!(first.body["round_id"], "round-001");
    let bytes = fs::read(f.store_dir.join("annotations.jsonl")).unwrap();
    let second = post(&f.app, "/api/annotations", "t-ann1", body).await;
    assert_eq!(second.status, StatusCode::OK);
    assert_eq!(first.body, second.body);
    assert_eq!(fs::read(f.store_dir.join("annotations.jsonl")).unwrap(), bytes);
}

#[tokio::test]
async fn unknown_and_unassigned_postings() {
    let f = fixture();
    let r = post(&f.app, "/api/annotations", "t-ann1", json!({"posting_id": "ghost", "label": 1})).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = post(&f.app, "/api/annotations", "t-ann1", json!({"posting_id": "p0011", "label": 1})).await;
    assert_eq!(r.status, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn disagreements_are_for_coordinators() {
    let f = fixture();
    for (token, posting, label) in [
        ("t-ann1", "p0000", 0),
        ("t-ann2", "p0000", 4),
        ("t-ann3", "p0000", 4),
        ("t-ann1", "p0001", 2),
        ("t-ann2", "p0001", 2),
    ] {
        let r = post(&f.app, "/api/annotations", token, json!({"posting_id": posting, "label": label})).await;
        assert_eq!(r.status, StatusCode::OK);
    }
    assert_eq!(
        get(&f.app, "/api/rounds/round-001/disagreements", "t-ann1").await.status,
        StatusCode::FORBIDDEN
    );
    let r = get(&f.app, "/api/rounds/round-001/disagreements", "t-coord").await;
    assert_eq!(r.status, StatusCode::OK);
    let rows = r.body.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["posting_id"], "p0000");
    assert!((rows[0]["score"].as_f64().unwrap() - 8.0 / 3.0).abs() < 1e-12);
    assert_eq!(rows[0]["labels"], json!([0, 4, 4]));
    assert_eq!(rows[1]["score"], 0.0);
    assert_eq!(
        get(&f.app, "/api/rounds/nope/disagreements", "t-coord").await.status,
        StatusCode::NOT_FOUND
    );
}

fn perfect_agreement(store: &mut Store) {
    for i in 0..10 {
        let label = Label::new((i % 5) as i64).unwrap();
        for a in ["ann1", "ann2", "ann3"] {
            store.submit_annotation(&format!("p{i:04}"), a, label, 1).unwrap();
        }
    }
}

#[tokio::test]
async fn stats_on_perfect_agreement_are_all_one() {
    let f = fixture_with(perfect_agreement, None);
    let r = get(&f.app, "/api/stats", "t-ann3").await;
    assert_eq!(r.status, StatusCode::OK);
    let agreement = &r.body["agreement"];
    for field in [
        "alpha_nominal",
        "alpha_ordinal",
        "alpha_binary",
        "pct_micro",
        "pct_macro",
        "pct_micro_binary",
        "pct_macro_binary",
        "kappa_macro",
        "kappa_macro_binary",
        "f1_macro_pairs",
        "f1_macro_pairs_binary",
    ] {
        assert_eq!(agreement[field]["value"], 1.0, "{field}: {}", agreement[field]);
    }
    assert_eq!(agreement["n_annotations"], 30);
    assert_eq!(agreement["n_pairs"], 30);
    assert_eq!(r.body["n_rounds"], 1);
    assert_eq!(r.body["label_distribution"]["total"], 30);
    assert_eq!(r.body["open_assignments"]["ann1"], 0);
}

#[tokio::test]
async fn api_and_cli_report_identical_statistics() {
    let f = fixture_with(
        |store| {
            for (i, a, l) in [(0, "ann1", 0), (0, "ann2", 1), (0, "ann3", 1), (1, "ann1", 3), (1, "ann2", 4), (2, "ann1", 0), (2, "ann3", 0), (3, "ann2", 2), (3, "ann3", 2)] {
                store.submit_annotation(&format!("p{i:04}"), a, Label::new(l).unwrap(), 1).unwrap();
            }
        },
        None,
    );
    let api = get(&f.app, "/api/stats", "t-ann1").await.body["agreement"].clone();
    let mut out = Vec::new();
    let cli = <Cli as clap::Parser>::try_parse_from([
        "labelwise",
        "--store",
        f.store_dir.to_str().unwrap(),
        "stats",
        "--format",
        "json",
    ])
    .unwrap();
    run(cli, &mut out).unwrap();
    let from_cli: Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(serde_json::to_string(&api).unwrap(), serde_json::to_string(&from_cli).unwrap());
}

#[tokio::test]
async fn flags_follow_the_forum_threshold() {
    let f = fixture_with(|s| { s.ingest_scores(six_forum_scores()).unwrap(); }, None);
    assert_eq!(get(&f.app, "/api/flags", "t-ann1").await.status, StatusCode::FORBIDDEN);
    let r = get(&f.app, "/api/flags", "t-mod").await;
    assert_eq!(r.status, StatusCode::OK);
    let rows: Vec<(&str, f64, bool)> = r
        .body
        .as_array()
        .unwrap()
        .iter()
        .map(|x| (x["forum_id"].as_str().unwrap(), x["positive_rate"].as_f64().unwrap(), x["flagged"].as_bool().unwrap()))
        .collect();
    assert_eq!(
        rows,
        [
            ("f3", 0.27, true),
            ("f1", 0.23, true),
            ("f2", 0.17, true),
            ("f6", 0.07, false),
            ("f5", 0.02, false),
            ("f4", 0.01, false)
        ]
    );
    assert_eq!(r.body[0]["tau_forum"], 0.1);
    for (tau, flagged) in [("0", 6), ("0.05", 4), ("0.10", 3), ("0.30", 0), ("1.0", 0)] {
        let r = get(&f.app, &format!("/api/flags?tau_forum={tau}"), "t-coord").await;
        let n = r.body.as_array().unwrap().iter().filter(|x| x["flagged"] == true).count();
        assert_eq!(n, flagged, "tau_forum={tau}");
    }
    for bad in ["/api/flags?tau_forum=1.5", "/api/flags?tau_forum=abc", "/api/flags?tau_post=-1"] {
        assert_eq!(get(&f.app, bad, "t-mod").await.status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
    }
}

#[tokio::test]
async fn rounds_are_created_by_coordinators() {
    let f = fixture();
    let body = json!({"id": "r2", "kind": "regular", "posting_ids": ["p0010", "p0011"], "k": 2, "seed": 4});
    assert_eq!(post(&f.app, "/api/rounds", "t-ann1", body.clone()).await.status, StatusCode::FORBIDDEN);
    let first = post(&f.app, "/api/rounds", "t-coord", body.clone()).await;
    assert_eq!(first.status, StatusCode::OK, "{}", first.body);
    assert_eq!(first.body["assigned_annotator_ids"].as_array().unwrap().len(), 2);
    assert_eq!(first.body["status"], "open");
    let again = post(&f.app, "/api/rounds", "t-coord", body).await;
    assert_eq!(again.body, first.body);

    let taken = post(&f.app, "/api/rounds", "t-coord", json!({"posting_ids": ["p0000"]})).await;
    assert_eq!(taken.status, StatusCode::UNPROCESSABLE_ENTITY);
    let unknown = post(&f.app, "/api/rounds", "t-coord", json!({"posting_ids": ["ghost"]})).await;
    assert_eq!(unknown.status, StatusCode::NOT_FOUND);
    let too_many = post(&f.app, "/api/rounds", "t-coord", json!({"sampler": {"mode": "random", "n": 5}})).await;
    assert_eq!(too_many.status, StatusCode::UNPROCESSABLE_ENTITY);
    let bad_kind = post(&f.app, "/api/rounds", "t-coord", json!({"kind": "weekly", "posting_ids": []})).await;
    assert_eq!(bad_kind.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn sampled_calibration_round_over_the_api() {
    let (dir, mut store) = store_with(30, 8);
    store.upsert_annotators(vec![annotator("ann9", false)]).unwrap();
    let app = router(AppState::new(store, tokens()), None);
    let r = post(&app, "/api/rounds", "t-coord", json!({"kind": "calibration", "sampler": {"mode": "random", "n": 20}, "seed": 1})).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    assert_eq!(r.body["posting_ids"].as_array().unwrap().len(), 20);
    assert_eq!(r.body["assigned_annotator_ids"].as_array().unwrap().len(), 8);
    drop(dir);
}

#[tokio::test]
async fn retried_requests_leave_the_same_state_as_single_requests() {
    let sequence: Vec<(&str, &str, i64)> = vec![
        ("t-ann1", "p0000", 1),
        ("t-ann2", "p0000", 0),
        ("t-ann1", "p0001", 4),
        ("t-ann1", "p0000", 2),
        ("t-ann3", "p0005", 3),
        ("t-ann2", "p0009", 0),
    ];
    let once = fixture();
    let retried = fixture();
    for (i, (token, posting, label)) in sequence.iter().enumerate() {
        let body = json!({"posting_id": posting, "label": label});
        post(&once.app, "/api/annotations", token, body.clone()).await;
        for _ in 0..=(i % 3) {
            post(&retried.app, "/api/annotations", token, body.clone()).await;
        }
    }
    let state = |dir: &Path| {
        let store = Store::open(dir).unwrap();
        store
            .state()
            .annotations()
            .map(|a| (a.posting_id.clone(), a.annotator_id.clone(), a.round_id.clone(), a.label))
            .collect::<Vec<_>>()
    };
    assert_eq!(state(&once.store_dir), state(&retried.store_dir));
    assert_eq!(state(&once.store_dir).len(), 5);
}

#[tokio::test]
async fn concurrent_submissions_are_all_stored() {
    let f = fixture();
    let mut handles = Vec::new();
    for i in 0..10 {
        for a in 1..=3 {
            let app = f.app.clone();
            handles.push(tokio::spawn(async move {
                post(&app, "/api/annotations", &format!("t-ann{a}"), json!({"posting_id": format!("p{i:04}"), "label": a})).await.status
            }));
        }
    }
    for h in handles {
        assert_eq!(h.await.unwrap(), StatusCode::OK);
    }
    let r = get(&f.app, "/api/stats", "t-ann1").await;
    assert_eq!(r.body["n_annotations"], 30);
    assert_eq!(Store::open(&f.store_dir).unwrap().state().annotations().count(), 30);
}

#[tokio::test]
async fn static_bundle_is_served_at_the_root() {
    let web = TempDir::new().unwrap();
    fs::write(web.path().join("index.html"), "<h1>annotate</h1>").unwrap();
    let f = fixture_with(|_| {}, Some(web.path()));
    let r = call(&f.app, Method::GET, "/index.html", None, None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body, Value::String("<h1>annotate</h1>".into()));
    let r = call(&f.app, Method::GET, "/", None, None).await;
    assert_eq!(r.status, StatusCode::OK);
    let api = call(&f.app, Method::GET, "/api/stats", None, None).await;
    assert_eq!(api.status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn token_file_loads_from_json() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("tokens.json");
    fs::write(&path, r#"{"abc": {"annotator_id": "ann1", "role": "coordinator"}}"#).unwrap();
    let map = TokenMap::load(&path).unwrap();
    assert_eq!(map.get("abc").unwrap().role, Role::Coordinator);
    fs::write(&path, r#"{"abc": {"annotator_id": "ann1", "role": "admin"}}"#).unwrap();
    assert!(TokenMap::load(&path).is_err());
}
