use axum::http::{Method, StatusCode};
use serde_json::{json, Value};

use seqlens::service::router;

mod common;
use common::fixture;
use common::http::{check_schema, get, post, put, send};

fn app() -> axum::Router {
    router(fixture::state())
}

#[tokio::test]
async fn every_endpoint_matches_its_schema() {
    let app = app();
    let cases = [
        ("Overview", "/api/overview"),
        ("Vocabulary", "/api/vocabulary"),
        ("AnomalyList", "/api/anomalies"),
        ("AnomalyList", "/api/anomalies?anomaly_score=0.2&support_rate=0.5"),
        ("AnomalyDetail", "/api/anomalies/q"),
        ("AnomalyDetail", "/api/anomalies/n1?anomaly_score=0"),
        ("Reconstruction", "/api/anomalies/q/reconstruction"),
        ("Similar", "/api/anomalies/q/similar"),
        ("Similar", "/api/anomalies/q/similar?max_distance=1&limit=3"),
        ("Thresholds", "/api/thresholds"),
        ("RawSequence", "/api/sequences/n2/raw"),
    ];
    for (schema, uri) in cases {
        let (status, body) = get(&app, uri).await;
        assert_eq!(status, StatusCode::OK, "{uri}: {body}");
        check_schema(schema, &body).unwrap();
    }
    for g in ["sequence", "flow", "summary"] {
        let (status, body) = post(
            &app,
            "/api/anomalies/q/comparison",
            json!({"cohort": ["n1", "n2", "n3"], "granularity": g, "merged": [[1, 2]]}),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        check_schema("Comparison", &body).unwrap();
    }
    let (status, body) = put(&app, "/api/thresholds", json!({"anomaly_score": 0.5, "support_rate": 0.1})).await;
    assert_eq!(status, StatusCode::OK);
    check_schema("ThresholdUpdate", &body).unwrap();
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let app = app();
    for uri in [
        "/api/anomalies/nope",
        "/api/anomalies/nope/reconstruction",
        "/api/anomalies/nope/similar",
        "/api/sequences/nope/raw",
        "/api/does/not/exist",
    ] {
        let (status, body) = get(&app, uri).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        check_schema("Error", &body).unwrap();
    }
    let (status, body) = post(
        &app,
        "/api/anomalies/q/comparison",
        json!({"cohort": ["n1", "ghost"], "granularity": "flow"}),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_id");
}

#[tokio::test]
async fn malformed_requests_are_400() {
    let app = app();
    for uri in [
        "/api/anomalies?anomaly_score=2",
        "/api/anomalies?anomaly_score=abc",
        "/api/anomalies?bogus=1",
        "/api/anomalies/q/similar?limit=-1",
    ] {
        let (status, body) = get(&app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        check_schema("Error", &body).unwrap();
    }
    let bad_bodies = [
        json!({"cohort": ["n1"], "granularity": "tree"}),
        json!({"cohort": ["n1"], "granularity": "flow", "extra": 1}),
        json!({"granularity": "flow"}),
        json!({"cohort": [], "granularity": "flow"}),
        json!({"cohort": ["q", "n1"], "granularity": "flow"}),
        json!({"cohort": ["n1"], "granularity": "flow", "merged": [[2, 1]]}),
        json!({"cohort": ["n1"], "granularity": "flow", "thresholds": {"anomaly_score": 1.5, "support_rate": 0}}),
    ];
    for b in bad_bodies {
        let (status, body) = post(&app, "/api/anomalies/q/comparison", b.clone()).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{b}: {body}");
        check_schema("Error", &body).unwrap();
    }
    let (status, _) = send(&app, Method::PUT, "/api/thresholds", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = put(&app, "/api/thresholds", json!({"anomaly_score": -0.1, "support_rate": 0})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn empty_cohort_rejected() {
    let (status, body) = post(&app(), "/api/anomalies/q/comparison", json!({"cohort": [], "granularity": "sequence"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["message"].as_str().unwrap().contains("cohort"));
}

fn entries(report: &Value) -> Vec<(u64, u64, f64)> {
    report["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["slot"].as_u64().unwrap(), e["event"].as_u64().unwrap(), e["score"].as_f64().unwrap()))
        .collect()
}

#[tokio::test]
async fn threshold_update_filters_reports() {
    let app = app();
    let (_, all) = put(&app, "/api/thresholds", json!({"anomaly_score": 0.0, "support_rate": 0.0})).await;
    let full = entries(&all["reports"][0]);
    // every cell of q
    assert_eq!(full.len(), 3 * fixture::EVENTS.len());

    let (status, body) = put(&app, "/api/thresholds", json!({"anomaly_score": 0.9, "support_rate": 0.0})).await;
    assert_eq!(status, StatusCode::OK);
    let expected: Vec<_> = full.iter().copied().filter(|e| e.2 >= 0.9).collect();
    assert_eq!(entries(&body["reports"][0]), expected);
    assert_eq!(body["thresholds"], json!({"anomaly_score": 0.9, "support_rate": 0.0}));

    let (_, current) = get(&app, "/api/thresholds").await;
    assert_eq!(current, body["thresholds"]);
    let (_, list) = get(&app, "/api/anomalies").await;
    assert_eq!(list["anomalies"][0]["entry_count"].as_u64().unwrap() as usize, expected.len());
    let (_, detail) = get(&app, "/api/anomalies/q").await;
    assert_eq!(entries(&detail["report"]), expected);
    // a query override does not change the stored thresholds
    let (_, lower) = get(&app, "/api/anomalies/q?anomaly_score=0").await;
    assert_eq!(entries(&lower["report"]), full);
    assert_eq!(get(&app, "/api/thresholds").await.1, body["thresholds"]);
}

#[tokio::test]
async fn flow_matches_hand_count() {
    let (status, body) = post(
        &app(),
        "/api/anomalies/q/comparison",
        json!({"cohort": ["n3", "n1", "n2"], "granularity": "flow", "thresholds": {"anomaly_score": 0.0, "support_rate": 0.0}}),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["cohort"], json!(["n1", "n2", "n3"]));
    let flow = &body["flow"];
    assert_eq!(flow["cohort_size"], 3);
    let nodes: Vec<(u64, u64, u64)> = flow["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| (n["slot"].as_u64().unwrap(), n["event"].as_u64().unwrap(), n["population"].as_u64().unwrap()))
        .collect();
    assert_eq!(nodes, vec![(0, 0, 3), (1, 1, 2), (1, 2, 1), (2, 3, 3)]);
    let node_key = |id: &Value| {
        let n = &flow["nodes"][id.as_u64().unwrap() as usize];
        (n["slot"].as_u64().unwrap(), n["event"].as_u64().unwrap())
    };
    let mut links: Vec<((u64, u64), (u64, u64), u64, f64)> = flow["links"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| {
            (
                node_key(&l["source"]),
                node_key(&l["target"]),
                l["population"].as_u64().unwrap(),
                l["mean_gap"].as_f64().unwrap(),
            )
        })
        .collect();
    links.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    assert_eq!(
        links,
        vec![
            ((0, 0), (1, 1), 2, 1.5),
            ((0, 0), (1, 2), 1, 1.0),
            ((1, 1), (2, 3), 2, 1.0),
            ((1, 2), (2, 3), 1, 4.0),
        ]
    );
    // a@0 is shared by every member, x@1 by none, c@1 by n3 only
    let support = |slot: usize, event: u64| {
        let g = body["glyphs"][slot]["events"].as_array().unwrap();
        let e = &g.iter().find(|g| g["entry"]["event"] == event).unwrap()["entry"];
        (e["kind"].as_str().unwrap().to_string(), e["support_rate"].as_f64().unwrap())
    };
    assert_eq!(support(0, 0), ("redundant".into(), 0.0));
    assert_eq!(support(1, 4), ("redundant".into(), 1.0));
    let (kind, rate) = support(1, 2);
    assert_eq!(kind, "missing");
    assert!((rate - 1.0 / 3.0).abs() < 1e-12);
}

#[tokio::test]
async fn repeated_reads_are_byte_identical() {
    let app = app();
    for uri in [
        "/api/overview",
        "/api/vocabulary",
        "/api/anomalies",
        "/api/anomalies/q",
        "/api/anomalies/q/reconstruction",
        "/api/anomalies/q/similar?max_distance=1",
        "/api/sequences/q/raw",
        "/api/thresholds",
    ] {
        let a = send(&app, Method::GET, uri, None).await;
        let b = send(&app, Method::GET, uri, None).await;
        assert_eq!(a.0, StatusCode::OK);
        assert_eq!(a, b, "{uri}");
    }
    let body = json!({"cohort": ["n1", "n2", "n3", "f0"], "granularity": "sequence"});
    let a = send(&app, Method::POST, "/api/anomalies/q/comparison", Some(body.clone())).await;
    let b = send(&app, Method::POST, "/api/anomalies/q/comparison", Some(body)).await;
    assert_eq!(a.0, StatusCode::OK);
    assert_eq!(a, b);
    // independent state built the same way answers identically
    let other = router(fixture::state());
    assert_eq!(send(&other, Method::GET, "/api/anomalies/q", None).await, send(&app, Method::GET, "/api/anomalies/q", None).await);
}

#[tokio::test]
async fn threshold_update_leaves_scores_alone() {
    let app = app();
    let before = send(&app, Method::GET, "/api/overview", None).await;
    let recon = send(&app, Method::GET, "/api/anomalies/q/reconstruction", None).await;
    let (status, _) = put(&app, "/api/thresholds", json!({"anomaly_score": 0.2, "support_rate": 0.7})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(send(&app, Method::GET, "/api/overview", None).await, before);
    assert_eq!(send(&app, Method::GET, "/api/anomalies/q/reconstruction", None).await, recon);
}
