//! A broker verifies an identity provider's assertion and signs it with its
//! own key. Content stays byte-identical; any edit breaks the signature.

use std::error::Error;

use fedbridge::model::{Attribute, EntityId, ProtocolDocument, SamlAssertion, Timestamp};
use fedbridge::ns;
use fedbridge::signing::{self, KeyRecord, KeyStore};
use fedbridge::translation::{self, AttributeNameMapping, Direction};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let ip = EntityId::new("https://sts.example.org")?;
    let broker = EntityId::new("https://broker.example.org")?;
    let ip_key = KeyRecord::generate("sts-signing", ip.clone());
    let broker_key = KeyRecord::generate("broker-signing", broker.clone());

    let now = Timestamp::now();
    let issued = signing::sign(
        &SamlAssertion {
            id: translation::new_id(),
            issuer: ip.clone(),
            subject_name: "alice@example.org".into(),
            subject_name_format: ns::NAMEID_EMAIL.into(),
            authn_context_class: ns::AC_PASSWORD_PROTECTED.into(),
            authn_instant: now,
            attributes: vec![Attribute::new("displayName", "Alice")],
            not_before: now.plus_secs(-60),
            not_on_or_after: now.plus_secs(300),
            signature: None,
        },
        &ip_key,
    )?;

    let broker_trusts = KeyStore::new().with(&ip_key.public()?)?;
    let sp_trusts = KeyStore::new().with(&broker_key.public()?)?;
    let relayed = translation::relay_assertion(
        &issued,
        &broker_trusts,
        &broker_key,
        &AttributeNameMapping::identity(),
        Direction::WstToSaml,
        None,
    )?;
    println!("signed by {}", signing::verify(&relayed, &sp_trusts)?);
    println!(
        "content unchanged: {}",
        relayed.canonical_bytes() == issued.canonical_bytes()
    );

    let mut forged = issued.clone();
    forged.subject_name = "mallory@example.org".into();
    let err = translation::relay_assertion(
        &forged,
        &broker_trusts,
        &broker_key,
        &AttributeNameMapping::identity(),
        Direction::WstToSaml,
        None,
    )
    .unwrap_err();
    println!("forged subject: {err}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
