use std::collections::BTreeMap;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use serde_json::{json, Value};
use tower::ServiceExt;

use toxens::serve::{router, AppState, Shared};
use toxens_core::features::SwearLexicon;
use toxens_core::triage::{ErrorKind, ErrorTaxonomy, TriageItem, TriageSession};

fn session(n: usize) -> TriageSession {
    let items = (0..n)
        .map(|i| TriageItem {
            id: format!("c{i}"),
            text: format!("comment {i} you idiot"),
            gold: vec!["insult".into()],
            score: 0.1,
        })
        .collect();
    TriageSession {
        session_id: "insult-fn-1".into(),
        focal_class: "insult".into(),
        kind: ErrorKind::Fn,
        producer: "ensemble".into(),
        seed: 1,
        population: n + 3,
        requested: n,
        taxonomy: ErrorTaxonomy::default(),
        items,
        annotations: BTreeMap::new(),
        audit: Vec::new(),
    }
}

fn state(path: Option<std::path::PathBuf>) -> Shared {
    AppState::new(session(4), path, Some(SwearLexicon::from_words(&["idiot"])))
}

async fn call(st: &Shared, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = router(st.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn session_summary() {
    let st = state(None);
    let (s, v) = call(&st, "GET", "/api/session", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["session_id"], "insult-fn-1");
    assert_eq!(v["kind"], "fn");
    assert_eq!(v["total"], 4);
    assert_eq!(v["annotated"], 0);
    assert_eq!(v["population"], 7);
    assert!(v["tags"].as_array().unwrap().iter().any(|t| t["id"] == "doubtful_label"));
}

#[tokio::test]
async fn items_paginate_and_highlight() {
    let st = state(None);
    let (s, v) = call(&st, "GET", "/api/items?offset=1&limit=2", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["total"], 4);
    let items = v["items"].as_array().unwrap();
    assert_eq!(items.len(), 2);
    assert_eq!(items[0]["id"], "c1");
    assert_eq!(items[0]["state"], "unannotated");
    let text = items[0]["text"].as_str().unwrap();
    let span = &items[0]["highlights"][0];
    let (a, b) = (span[0].as_u64().unwrap() as usize, span[1].as_u64().unwrap() as usize);
    assert_eq!(&text[a..b], "idiot");
    let (s, v) = call(&st, "GET", "/api/items", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["items"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn bad_queries_are_rejected() {
    let st = state(None);
    for q in ["limit=0", "limit=1001", "offset=-1", "limit=abc"] {
        let (s, v) = call(&st, "GET", &format!("/api/items?{q}"), None).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{q}");
        assert_eq!(v["code"], "bad_request");
    }
}

#[tokio::test]
async fn annotation_round_trip_and_persistence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let st = state(Some(path.clone()));
    let (s, v) = call(&st, "POST", "/api/items/c0/annotation", Some(json!(["sarcasm_irony"]))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["state"], "tagged");
    assert_eq!(v["tags"], json!(["sarcasm_irony"]));
    let (s, v) = call(&st, "POST", "/api/items/c1/annotation", Some(json!({"tags": []}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["state"], "empty");
    let saved = TriageSession::load(&path).unwrap();
    assert_eq!(saved.progress(), (2, 4));
    assert_eq!(saved.audit.len(), 2);
    let (_, v) = call(&st, "POST", "/api/items/c0/annotation", Some(json!(["doubtful_label"]))).await;
    assert_eq!(v["tags"], json!(["doubtful_label"]));
    let saved = TriageSession::load(&path).unwrap();
    assert_eq!(saved.audit[2].previous, Some(vec!["sarcasm_irony".to_string()]));
    assert_eq!(st.snapshot(), saved);
}

#[tokio::test]
async fn annotation_errors() {
    let st = state(None);
    let (s, v) = call(&st, "POST", "/api/items/nope/annotation", Some(json!([]))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));
    let (s, v) = call(&st, "POST", "/api/items/c0/annotation", Some(json!(["made_up"]))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("validation_error")));
    let (s, v) = call(&st, "POST", "/api/items/c0/annotation", Some(json!({"tag": 3}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));
    let (s, _) = call(&st, "GET", "/api/nothing", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(st.snapshot().progress(), (0, 4), "rejected writes leave no trace");
    assert!(st.snapshot().audit.is_empty());
}

#[tokio::test]
async fn report_counts_tags() {
    let st = state(None);
    let (s, v) = call(&st, "GET", "/api/report", None).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("nothing_annotated")));
    call(&st, "POST", "/api/items/c0/annotation", Some(json!(["rare_words"]))).await;
    call(&st, "POST", "/api/items/c1/annotation", Some(json!(["rare_words", "metaphor_comparison"]))).await;
    call(&st, "POST", "/api/items/c2/annotation", Some(json!(["doubtful_label"]))).await;
    let (s, v) = call(&st, "GET", "/api/report", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["annotated"], 3);
    assert_eq!(v["doubtful"]["count"], 1);
    assert_eq!(v["undoubtful"], 2);
    let rare = v["tags"].as_array().unwrap().iter().find(|t| t["tag"] == "rare_words").unwrap();
    assert_eq!(rare["count"], 2);
    assert_eq!(rare["denominator"], 2);
    assert_eq!(rare["percent"], 100.0);
}
