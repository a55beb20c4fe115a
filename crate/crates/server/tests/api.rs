//! The HTTP surface, driven in-process on a virtual clock.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{DateTime, TimeDelta, TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use wedo_core::scheduler::{Clock, VirtualClock};
use wedo_core::EngineConfig;
use wedo_server::{router, Service, ServiceOptions, TransportKind};

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 5, 2, 9, 0, 0).unwrap()
}

struct Server {
    _dir: tempfile::TempDir,
    clock: VirtualClock,
    service: Service,
}

impl Server {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let clock = VirtualClock::new(t0());
        let service = open(dir.path(), &clock);
        Self {
            _dir: dir,
            clock,
            service,
        }
    }

    fn app(&self) -> Router {
        router(self.service.state.clone(), None)
    }

    /// Moves the clock and lets the scheduler catch up.
    fn advance(&self, by: TimeDelta) {
        self.clock.advance(by);
        let engine = &self.service.state.engine;
        engine.ingest(self.clock.now()).unwrap();
        engine.tick(self.clock.now()).unwrap();
    }

    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()));
        (status, value)
    }

    async fn create_park(&self) -> String {
        let (status, body) = self.call("POST", "/missions", Some(park())).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["mission_id"].as_str().unwrap().to_string()
    }
}

fn open(root: &std::path::Path, clock: &VirtualClock) -> Service {
    let opts = ServiceOptions {
        data_dir: root.to_path_buf(),
        config: EngineConfig::default(),
        transport: TransportKind::Sim,
        webhook_url: None,
    };
    Service::open(opts, Arc::new(clock.clone()), false).unwrap()
}

fn park() -> Value {
    json!({
        "name": "Park cleanup",
        "rationale": "the pond is full of litter",
        "hashtag": "#parkday",
        "selection_deadline": (t0() + TimeDelta::hours(24)).to_rfc3339(),
        "execution_time": (t0() + TimeDelta::hours(48)).to_rfc3339(),
        "creator": "ana",
    })
}

#[tokio::test]
async fn creating_the_park_mission() {
    let s = Server::new();
    let (status, body) = s.call("POST", "/missions", Some(park())).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["phase"], "Ideation");
    let kickoff = body["suggested_kickoff"].as_str().unwrap();
    assert!(kickoff.chars().count() <= 140);
    assert!(kickoff.contains("#parkday") && kickoff.contains("idea:"));
    assert_eq!(body["seconds_to_next_stage"], 4 * 3600);

    let (status, list) = s.call("GET", "/missions", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn dry_run_only_suggests() {
    let s = Server::new();
    let mut req = park();
    req["dry_run"] = json!(true);
    let (status, body) = s.call("POST", "/missions", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["length"].as_u64().unwrap() <= 140);
    let (_, list) = s.call("GET", "/missions", None).await;
    assert!(list.as_array().unwrap().is_empty());
}

#[tokio::test]
async fn kickoff_edits_are_bounded() {
    let s = Server::new();
    let mut req = park();
    req["kickoff_text"] = json!(format!("idea: {} #parkday", "x".repeat(141)));
    let (status, body) = s.call("POST", "/missions", Some(req.clone())).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(body["error"], "KickoffTooLong");

    req["kickoff_text"] = json!("Clean the park with us!");
    let (status, body) = s.call("POST", "/missions", Some(req.clone())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "InvalidKickoff");

    req["kickoff_text"] = json!("idea: how should we clean the park? #parkday");
    let (status, _) = s.call("POST", "/missions", Some(req)).await;
    assert_eq!(status, StatusCode::CREATED);
}

#[tokio::test]
async fn validation_errors_map_to_400() {
    let s = Server::new();
    let mut req = park();
    req["execution_time"] = req["selection_deadline"].clone();
    let (status, body) = s.call("POST", "/missions", Some(req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "InvalidSchedule");

    let mut req = park();
    req["hashtag"] = json!("park day");
    let (status, body) = s.call("POST", "/missions", Some(req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "InvalidHashtag");

    let id = s.create_park().await;
    let (status, body) = s
        .call("POST", &format!("/missions/{id}/ideas"), Some(json!({"author": "bo", "text": "#parkday"})))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "EmptyAfterCanonicalization");

    let (status, body) = s
        .call("POST", &format!("/missions/{id}/votes"), Some(json!({"author": "bo", "idea_id": "i9"})))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "UnknownIdea");

    let (status, body) = s.call("POST", &format!("/missions/{id}/ideas"), Some(json!({"text": 3}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "MalformedRequest");
}

#[tokio::test]
async fn duplicate_active_hashtag_conflicts() {
    let s = Server::new();
    s.create_park().await;
    let (status, body) = s.call("POST", "/missions", Some(park())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "DuplicateHashtag");
}

#[tokio::test]
async fn unknown_missions_are_404() {
    let s = Server::new();
    for uri in ["/missions/m000999", "/missions/nonsense", "/missions/m000001/timeline"] {
        let (status, body) = s.call("GET", uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(body["error"], "NotFound");
    }
}

#[tokio::test]
async fn mission_lifecycle_over_http() {
    let s = Server::new();
    let id = s.create_park().await;
    let base = format!("/missions/{id}");
    for (author, text) in [("bo", "Pick up litter by the pond!"), ("cy", "Plant flowers"), ("dee", "paint benches")] {
        let (status, _) = s
            .call("POST", &format!("{base}/ideas"), Some(json!({"author": author, "text": text})))
            .await;
        assert_eq!(status, StatusCode::OK);
    }
    for voter in ["cy", "eve"] {
        let (status, _) = s
            .call(
                "POST",
                &format!("{base}/votes"),
                Some(json!({"author": voter, "idea_id": "i1", "kind": "repost"})),
            )
            .await;
        assert_eq!(status, StatusCode::OK);
    }
    let (status, view) = s
        .call("POST", &format!("{base}/subscribe"), Some(json!({"author": "zed", "phases": ["ActionPending"]})))
        .await;
    assert_eq!(status, StatusCode::OK);
    let ranks: Vec<_> = view["ideas"].as_array().unwrap().iter().map(|i| i["idea_id"].clone()).collect();
    assert_eq!(ranks[0], "i1");
    assert_eq!(view["ideas"][0]["votes"], 3);

    // 90 minutes before the selection deadline, in Voting
    s.advance(TimeDelta::minutes(24 * 60 - 90));
    let (_, view) = s.call("GET", &base, None).await;
    assert_eq!(view["phase"], "Voting");
    assert_eq!(view["seconds_to_next_stage"], 5400);

    s.advance(TimeDelta::minutes(90));
    let (_, view) = s.call("GET", &base, None).await;
    assert_eq!(view["phase"], "Planning");
    assert_eq!(view["winner"], "i1");
    let (status, body) = s
        .call("POST", &format!("{base}/votes"), Some(json!({"author": "fay", "idea_id": "i2"})))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "IllegalInPhase");
    let (status, _) = s
        .call("POST", &format!("{base}/details"), Some(json!({"author": "bo", "text": "bring gloves"})))
        .await;
    assert_eq!(status, StatusCode::OK);

    s.advance(TimeDelta::hours(25));
    let (_, view) = s.call("GET", &base, None).await;
    assert_eq!(view["phase"], "Completed");
    assert!(view.get("seconds_to_next_stage").is_none_or(Value::is_null));

    let (_, timeline) = s.call("GET", &format!("{base}/timeline"), None).await;
    let phases: Vec<_> = timeline.as_array().unwrap().iter().map(|g| g["phase"].as_str().unwrap()).collect();
    assert_eq!(phases, ["Ideation", "Voting", "Planning", "ActionPending", "Completed"]);

    let (_, leaders) = s.call("GET", &format!("{base}/leaders"), None).await;
    assert_eq!(leaders[0]["participant"], "bo");
    assert_eq!(leaders[0]["score"], 5);

    let (status, _) = s.call("POST", &format!("{base}/cancel"), Some(json!({"author": "ana"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn cancel_stops_the_schedule() {
    let s = Server::new();
    let id = s.create_park().await;
    let (status, view) = s
        .call("POST", &format!("/missions/{id}/cancel"), Some(json!({"author": "ana"})))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["phase"], "Cancelled");
    s.advance(TimeDelta::hours(30));
    let (_, view) = s.call("GET", &format!("/missions/{id}"), None).await;
    assert_eq!(view["phase"], "Cancelled");
}

#[tokio::test]
async fn inbound_posts_become_ideas() {
    let s = Server::new();
    let id = s.create_park().await;
    let post = json!({
        "v": 1,
        "kind": "PostObserved",
        "payload": {
            "post_id": "p1",
            "author": "bo",
            "text": "Pick up litter #parkday",
            "at": (t0() + TimeDelta::minutes(5)).to_rfc3339(),
        }
    });
    let (status, body) = s.call("POST", "/inbound", Some(post)).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{body}");
    assert_eq!(body["position"], 1);
    s.advance(TimeDelta::minutes(5));
    let (_, view) = s.call("GET", &format!("/missions/{id}"), None).await;
    assert_eq!(view["ideas"][0]["display_text"], "Pick up litter #parkday");

    let (status, _) = s.call("POST", "/inbound", Some(json!({"kind": "Nope"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn views_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let clock = VirtualClock::new(t0());
    let (id, before) = {
        let s = Server {
            _dir: tempfile::tempdir().unwrap(),
            clock: clock.clone(),
            service: open(dir.path(), &clock),
        };
        let id = s.create_park().await;
        s.call("POST", &format!("/missions/{id}/ideas"), Some(json!({"author": "bo", "text": "litter"})))
            .await;
        s.advance(TimeDelta::hours(5));
        let view = s.call("GET", &format!("/missions/{id}"), None).await.1;
        (id, view)
    };
    let s = Server {
        _dir: tempfile::tempdir().unwrap(),
        clock: clock.clone(),
        service: open(dir.path(), &clock),
    };
    let after = s.call("GET", &format!("/missions/{id}"), None).await.1;
    assert_eq!(before, after);
}

#[tokio::test]
async fn health_and_static_root() {
    let s = Server::new();
    let (status, body) = s.call("GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["transport"], "sim");

    let (status, body) = s.call("GET", "/", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.as_str().unwrap().contains("<html"));

    let assets = tempfile::tempdir().unwrap();
    std::fs::write(assets.path().join("index.html"), "<html>client</html>").unwrap();
    let app = router(s.service.state.clone(), Some(assets.path().to_path_buf()));
    let resp = app
        .oneshot(Request::builder().uri("/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..], b"<html>client</html>");
}
