use fedbridge::harness::mocks::{IdpEvent, Tamper};
use fedbridge::harness::trace::Verdict;
use fedbridge::harness::{Lab, Scenario, ScenarioOptions};
use fedbridge::model::ProtocolDocument;
use fedbridge::signing;

#[tokio::test]
async fn flow_a_passes_and_preserves_the_assertion() {
    let lab = Lab::ephemeral().await.unwrap();
    let trace = lab
        .run(Scenario::SamlSpToWsfedIp, ScenarioOptions::default())
        .await
        .unwrap();
    assert_eq!(trace.verdict, Verdict::Pass, "{}", trace.to_json());
    trace.check_passive_client().unwrap();
    trace.check_order().unwrap();

    let mocks = lab.mocks().unwrap();
    let issued = mocks.wsfed_ip.issued();
    let accepted: Vec<_> = mocks
        .saml_sp
        .outcomes()
        .into_iter()
        .filter(|o| o.established)
        .collect();
    assert_eq!((issued.len(), accepted.len()), (1, 1));
    let received = accepted[0].assertion.clone().unwrap();
    assert_eq!(received.canonical_bytes(), issued[0].canonical_bytes());
    let broker_id = &lab.config().broker.entity_id;
    assert_eq!(
        &signing::verify(&received, &mocks.saml_sp.trust_store()).unwrap(),
        broker_id
    );
}

#[tokio::test]
async fn flow_b_passes() {
    let lab = Lab::ephemeral().await.unwrap();
    let trace = lab
        .run(Scenario::WsfedSpToSamlIp, ScenarioOptions::default())
        .await
        .unwrap();
    assert_eq!(trace.verdict, Verdict::Pass, "{}", trace.to_json());
    trace.check_passive_client().unwrap();
    trace.check_order().unwrap();
}

#[tokio::test]
async fn distrusted_broker_fails_at_the_sp() {
    let lab = Lab::ephemeral().await.unwrap();
    let options = ScenarioOptions {
        distrust_broker: true,
        ..Default::default()
    };
    let trace = lab.run(Scenario::SamlSpToWsfedIp, options).await.unwrap();
    assert_eq!(trace.verdict, Verdict::Fail("SignatureInvalid".into()));
    let again = lab
        .run(Scenario::SamlSpToWsfedIp, ScenarioOptions::default())
        .await
        .unwrap();
    assert_eq!(again.verdict, Verdict::Pass);
}

#[tokio::test]
async fn force_authn_logs_in_again() {
    let lab = Lab::ephemeral().await.unwrap();
    let options = ScenarioOptions {
        force_authn: true,
        ..Default::default()
    };
    let trace = lab.run(Scenario::WsfedSpToSamlIp, options).await.unwrap();
    assert!(trace.verdict.is_pass());
    let events = lab.mocks().unwrap().saml_idp.events();
    assert!(matches!(events[0], IdpEvent::Authenticated { .. }));
    assert!(matches!(
        events[1],
        IdpEvent::Issued {
            fresh_login: true,
            ..
        }
    ));

    let forced_with_session = ScenarioOptions {
        force_authn: true,
        pre_login: true,
        ..Default::default()
    };
    lab.run(Scenario::SamlSpToWsfedIp, forced_with_session)
        .await
        .unwrap();
    let events = lab.mocks().unwrap().wsfed_ip.events();
    assert_eq!(events.len(), 3, "{events:?}");
    assert!(matches!(
        events[2],
        IdpEvent::Issued {
            fresh_login: true,
            ..
        }
    ));
}

#[tokio::test]
async fn existing_session_skips_login() {
    let lab = Lab::ephemeral().await.unwrap();
    let options = ScenarioOptions {
        pre_login: true,
        ..Default::default()
    };
    let trace = lab.run(Scenario::SamlSpToWsfedIp, options).await.unwrap();
    assert!(trace.verdict.is_pass());
    trace.check_passive_client().unwrap();
    let events = lab.mocks().unwrap().wsfed_ip.events();
    assert_eq!(events.len(), 2);
    assert!(matches!(
        events[1],
        IdpEvent::Issued {
            fresh_login: false,
            ..
        }
    ));
}

#[tokio::test]
async fn tampered_assertions_stop_at_the_broker() {
    let lab = Lab::ephemeral().await.unwrap();
    for tamper in Tamper::ALL {
        for scenario in Scenario::ALL {
            let options = ScenarioOptions {
                tamper: Some(tamper),
                ..Default::default()
            };
            let trace = lab.run(scenario, options).await.unwrap();
            assert_eq!(
                trace.verdict,
                Verdict::Fail("SignatureInvalid".into()),
                "{tamper:?} {scenario:?}"
            );
            let last = trace.steps.last().unwrap();
            assert_eq!(last.actor, "broker");
            assert!(trace
                .steps
                .iter()
                .all(|s| !(s.actor.ends_with("_sp") && s.method == "POST")));
        }
    }
    let mocks = lab.mocks().unwrap();
    assert!(mocks.saml_sp.outcomes().is_empty());
    assert!(mocks.wsfed_sp.outcomes().is_empty());
}

#[tokio::test]
async fn concurrent_flows_and_duplicate_delivery() {
    let lab = Lab::ephemeral().await.unwrap();
    let traces = lab
        .run_concurrent(Scenario::SamlSpToWsfedIp, 20)
        .await
        .unwrap();
    assert!(traces.iter().all(|t| t.verdict.is_pass()));
    let dup = lab.duplicate_wresult_delivery().await.unwrap();
    assert_eq!(
        (dup.successes, dup.unknown_correlation),
        (1, 1),
        "{:?}",
        dup.other
    );
    assert!(dup.completed);
    dup.trace.check_passive_client().unwrap();
}

#[tokio::test]
async fn trace_serializes_as_json() {
    let lab = Lab::ephemeral().await.unwrap();
    let trace = lab
        .run(Scenario::SamlSpToWsfedIp, ScenarioOptions::default())
        .await
        .unwrap();
    let value: serde_json::Value = serde_json::from_str(&trace.to_json()).unwrap();
    assert_eq!(value["scenario"], "SamlSpToWsfedIp");
    assert_eq!(value["verdict"], "pass");
    assert!(value["steps"].as_array().unwrap().len() >= 6);
    let text = trace.to_json();
    assert!(!text.contains("alice-password"));
}
