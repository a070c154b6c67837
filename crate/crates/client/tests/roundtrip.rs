use std::sync::Arc;

use activediag_client::Client;
use activediag_core::harness::Outcome;
use activediag_core::policies::Policy;
use activediag_core::wire::{Assignment, CreateSession, Mode, ObserveRequest};
use activediag_service::{serve, Catalog, Store};

async fn spawn() -> Client {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, Arc::new(Store::new(Catalog::builtin()))));
    Client::new(format!("http://{addr}/"))
}

fn assignment(pairs: &[(&str, u8)]) -> Assignment {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

#[tokio::test]
async fn simulated_session_over_http() {
    let client = spawn().await;
    let models = client.models().await.unwrap();
    assert!(models.iter().any(|m| m.name == "demux" && m.controls == ["a", "b"]));

    let mut req = CreateSession::new("demux", assignment(&[("i", 1), ("a", 0), ("b", 0)]), Mode::Simulated, Policy::Greedy);
    req.injected = Some(vec!["h1".into(), "h7".into(), "h8".into()]);
    let created = client.create(&req).await.unwrap();
    assert_eq!(created.remaining, 5);

    let mut outcome = created.outcome;
    while outcome == Outcome::Active {
        let s = client.suggest(&created.id).await.unwrap();
        assert!(s.control.is_some());
        outcome = client.observe(&created.id, &ObserveRequest { observation: Assignment::new(), control: None }).await.unwrap().outcome;
    }
    assert_eq!(outcome, Outcome::Isolated);
    let snap = client.snapshot(&created.id).await.unwrap();
    assert_eq!(snap.grid.rows.len(), 1);
    let csv = client.trace_csv(&created.id).await.unwrap();
    assert_eq!(csv.lines().count(), snap.history.len() + 1);
}

#[tokio::test]
async fn service_errors_surface_with_codes() {
    let client = spawn().await;
    let req = CreateSession::new("demux", assignment(&[("nope", 1)]), Mode::Operator, Policy::Greedy);
    let err = client.create(&req).await.unwrap_err();
    assert_eq!(err.code(), Some("bad_observation"));
    let err = client.snapshot("s42").await.unwrap_err();
    assert_eq!(err.code(), Some("unknown_session"));
    assert!(err.to_string().starts_with("404"));

    let dead = Client::new("http://127.0.0.1:1");
    assert_eq!(dead.models().await.unwrap_err().code(), None);
}
