//! Signs a user in at a SAML service provider with a WS-Federation identity
//! provider, through the broker, and prints the browser's path.

use std::error::Error;

use fedbridge::harness::{Lab, Scenario, ScenarioOptions};
use fedbridge::model::ProtocolDocument;
use fedbridge::signing;

pub async fn run_example() -> Result<(), Box<dyn Error>> {
    let lab = Lab::ephemeral().await?;
    let trace = lab
        .run(Scenario::SamlSpToWsfedIp, ScenarioOptions::default())
        .await?;
    for step in &trace.steps {
        println!(
            "{:>2} {:<4} {:<45} {}",
            step.index, step.method, step.url, step.outcome
        );
    }
    println!("verdict: {:?}", trace.verdict);
    trace.check_passive_client()?;
    trace.check_order()?;

    let mocks = lab.mocks()?;
    let issued = mocks.wsfed_ip.issued().pop().ok_or("nothing issued")?;
    let outcome = mocks.saml_sp.outcomes().pop().ok_or("no outcome")?;
    let received = outcome.assertion.ok_or("no assertion")?;
    println!("subject at the SP: {}", received.subject_name);
    println!(
        "signed by: {}",
        signing::verify(&received, &mocks.saml_sp.trust_store())?
    );
    println!(
        "same content as issued: {}",
        received.canonical_bytes() == issued.canonical_bytes()
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
