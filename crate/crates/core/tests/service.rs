mod common;

use axum::http::StatusCode;
use depkg::config::Config;
use depkg::service::{self, ServiceState};

#[tokio::test(flavor = "multi_thread")]
async fn golden_exchanges() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    match common::run_golden(update).await {
        Ok(n) => assert!(n > 20),
        Err(diff) => panic!("golden mismatch (rerun with UPDATE_GOLDEN=1 to accept):\n{diff}"),
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn golden_exchanges_are_repeatable() {
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        return;
    }
    for _ in 0..2 {
        common::run_golden(false).await.unwrap();
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn busy_session_is_refused() {
    assert_eq!(
        common::single_flight().await,
        [StatusCode::CONFLICT, StatusCode::CONFLICT, StatusCode::OK, StatusCode::OK]
    );
}

#[tokio::test(flavor = "multi_thread")]
async fn session_builds_graph_and_stores_it() {
    let server = common::fixture_server();
    let state = ServiceState::new(
        common::config_for(&server),
        common::scripted_factory(common::script("vulnerable-hubs.json")),
    );
    let app = service::router(state.clone(), false);
    let (status, body) = common::send(&app, "POST", "/api/sessions", Some(r#"{"critic": false}"#)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["graph_id"], serde_json::Value::Null);
    let (status, body) = common::send(
        &app,
        "POST",
        "/api/sessions/s1/messages",
        Some(r#"{"text": "Which packages are most depended on, and are they vulnerable?"}"#),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["graph_id"], "g1");
    assert_eq!(body["report"]["top_in_degree"][0]["package"], "D@1.0.0");
    assert_eq!(body["report"]["top_in_degree"][0]["vulnerabilities"][0], "GHSA-TEST-0001");
    assert_eq!(body["transcript_ref"], "/api/sessions/s1/transcript?from=0");
    let (status, metrics) = common::send(&app, "GET", "/api/graphs/g1/metrics", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(metrics["metrics"]["node_count"], 4);
    assert_eq!(state.graphs().len(), 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn cors_headers_follow_the_toggle() {
    use axum::body::Body;
    use axum::http::Request;
    use tower::ServiceExt;
    let state = ServiceState::new(Config::default(), common::scripted_factory(Default::default()));
    for (cors, expected) in [(true, true), (false, false)] {
        let request = Request::get("/healthz").header("origin", "http://example.invalid").body(Body::empty()).unwrap();
        let response = service::router(state.clone(), cors).oneshot(request).await.unwrap();
        assert_eq!(response.headers().contains_key("access-control-allow-origin"), expected);
    }
}
