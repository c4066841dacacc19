use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use proptest::prelude::*;
use serde_json::Value;
use tower::ServiceExt;

use super::*;
use crate::evidence::tests::fixture_store;

fn service() -> SearchService {
    SearchService::new(fixture_store(), None)
}

#[test]
fn search_examples() {
    let svc = service();
    let hits = svc.search_agents("ginkgo", 10);
    assert_eq!(hits[0].cui.as_str(), "C0330205");
    assert_eq!(hits[0].interactions_count, 2);
    assert!(hits[0].exact);
    let prozac = svc.search_agents("Prozac", 10);
    assert_eq!(prozac[0].name, "fluoxetine");
    assert_eq!(prozac[0].matched_via, MatchKind::TradeName);
    assert!(svc.search_agents("zzzz-no-such", 10).is_empty());
    assert!(svc.search_agents("", 10).is_empty());
}

#[test]
fn search_dedups_cluster_members() {
    let svc = service();
    let hits = svc.search_agents("calcium", 10);
    let canon: Vec<&str> = hits.iter().map(|h| h.cui.as_str()).collect();
    assert_eq!(canon.iter().filter(|c| **c == "C3540037").count(), 1);
    assert!(!canon.contains(&"C0006675"));
}

#[test]
fn agent_detail_orders_partners() {
    let svc = service();
    let d = svc.get_agent("C0330205").unwrap();
    let partners: Vec<_> = d.interactions.iter().map(|i| (i.partner.name.as_str(), i.evidence_count)).collect();
    assert_eq!(partners, [("warfarin", 3), ("nitric oxide", 1)]);
    assert_eq!(d.redirected_from, None);
}

#[test]
fn member_cui_redirects_to_canonical() {
    let svc = service();
    let d = svc.get_agent("C0596235").unwrap();
    assert_eq!(d.cui.as_str(), "C3540037");
    assert_eq!(d.redirected_from.as_ref().map(Cui::as_str), Some("C0596235"));
    assert_eq!(d.members.len(), 3);
    assert!(matches!(svc.get_agent("C9999999"), Err(ServiceError::NotFound(_))));
    assert!(matches!(svc.get_agent("warfarin"), Err(ServiceError::BadRequest(_))));
}

#[test]
fn interaction_pagination() {
    let svc = service();
    let p = svc.get_interaction("C0043031-C0330205", Pagination::new(1, 2).unwrap()).unwrap();
    assert_eq!((p.items.len(), p.total), (2, 3));
    let p5 = svc.get_interaction("C0043031-C0330205", Pagination::new(5, 2).unwrap()).unwrap();
    assert_eq!((p5.items.len(), p5.total), (0, 3));
    match svc.get_interaction("C0330205-C0043031", Pagination::default()) {
        Err(ServiceError::BadRequest(msg)) => assert!(msg.contains("C0043031-C0330205")),
        other => panic!("{other:?}"),
    }
    assert!(matches!(svc.get_interaction("C0017102-C0043031", Pagination::default()), Err(ServiceError::NotFound(_))));
    assert!(Pagination::new(0, 10).is_err());
    assert!(Pagination::new(1, 0).is_err());
    assert!(Pagination::new(1, 101).is_err());
}

#[test]
fn pages_concatenate_to_full_list() {
    let svc = service();
    let id = "C0043031-C0330205";
    let full = svc.get_interaction(id, Pagination::new(1, 100).unwrap()).unwrap().items;
    for per_page in 1..=4 {
        let mut joined = Vec::new();
        for page in 1..=4 {
            joined.extend(svc.get_interaction(id, Pagination::new(page, per_page).unwrap()).unwrap().items);
        }
        assert_eq!(joined, full);
    }
}

proptest! {
    #[test]
    fn search_limit_is_prefix(q in "(ca|gi|vit|war|ni)[a-z ]{0,6}", k in 1usize..6) {
        let svc = service();
        let short = svc.search_agents(&q, k);
        let long = svc.search_agents(&q, k + 1);
        prop_assert!(long.starts_with(&short));
    }
}

async fn get(path: &str) -> (StatusCode, Value) {
    let app = router(Arc::new(service()));
    let resp = app.oneshot(Request::get(path).body(Body::empty()).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn http_routes() {
    let (s, body) = get("/api/agent/search?q=ginkgo&limit=5").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["results"][0]["cui"], "C0330205");

    let (s, body) = get("/api/agent/C0330205").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["interactions"][0]["partner"]["cui"], "C0043031");

    let (s, body) = get("/api/agent/C0330205/interactions?page=1&per_page=1").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["total"], 2);
    assert_eq!(body["items"].as_array().unwrap().len(), 1);

    let (s, body) = get("/api/interaction/C0043031-C0330205?per_page=2").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["total"], 3);
    assert_eq!(body["items"][0]["arg1"]["surface"], "Ginkgo");
    assert_eq!(body["items"][0]["paper"]["title"], "Title p2");

    let (s, body) = get("/api/interaction/C0330205-C0043031").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("C0043031-C0330205"));

    assert_eq!(get("/api/agent/C9999999").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get("/api/interaction/C0043031-C0330205?per_page=0").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get("/api/interaction/C0043031-C0330205?page=x").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get("/api/agent/search?q=x&limit=0").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get("/api/nowhere").await.0, StatusCode::NOT_FOUND);

    let (s, body) = get("/api/meta").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["api_version"], 1);
}

#[tokio::test]
async fn identical_requests_identical_bodies() {
    let a = get("/api/agent/C0330205").await;
    let b = get("/api/agent/C0330205").await;
    assert_eq!(a, b);
}
