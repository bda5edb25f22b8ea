//! The inverse flow: a WS-Federation SP relying on a SAML identity provider,
//! with re-authentication forced, and the JSON trace it leaves.

use std::error::Error;

use fedbridge::harness::mocks::IdpEvent;
use fedbridge::harness::{Lab, Scenario, ScenarioOptions};

pub async fn run_example() -> Result<(), Box<dyn Error>> {
    let lab = Lab::ephemeral().await?;
    let options = ScenarioOptions {
        force_authn: true,
        pre_login: true,
        ..Default::default()
    };
    let trace = lab.run(Scenario::WsfedSpToSamlIp, options).await?;
    println!("documents: {:?}", trace.protocol_sequence());
    println!("verdict: {:?}", trace.verdict);
    for event in lab.mocks()?.saml_idp.events() {
        match event {
            IdpEvent::Authenticated { subject } => println!("idp: {subject} logged in"),
            IdpEvent::Issued {
                subject,
                fresh_login,
                ..
            } => {
                println!("idp: assertion for {subject}, fresh login: {fresh_login}")
            }
        }
    }
    let json = trace.to_json();
    println!(
        "trace: {} steps, {} bytes of JSON",
        trace.steps.len(),
        json.len()
    );
    if !trace.verdict.is_pass() {
        return Err(format!("{:?}", trace.verdict).into());
    }
    Ok(())
}

#[allow(dead_code)]
#[tokio::main]
async fn main() -> Result<(), Box<dyn Error>> {
    run_example().await
}
