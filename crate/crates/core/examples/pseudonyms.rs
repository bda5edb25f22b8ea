//! Pair-wise pseudonyms: stable per (subject, SP) when persistent, fresh per
//! session when transient, and kept across restarts through a snapshot.

use std::error::Error;

use fedbridge::model::EntityId;
use fedbridge::pseudonym::PseudonymRegistry;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let secret = b"an example master secret, 32 by";
    let sp_a = EntityId::new("https://sp-a.example.org")?;
    let sp_b = EntityId::new("https://sp-b.example.org")?;
    let registry = PseudonymRegistry::new();

    let at_a = registry.register_persistent("alice", &sp_a, secret)?;
    let at_b = registry.register_persistent("alice", &sp_b, secret)?;
    println!("alice at A: {}", at_a.pseudonym);
    println!("alice at B: {}", at_b.pseudonym);
    assert_ne!(at_a.pseudonym, at_b.pseudonym);
    assert_eq!(registry.register_persistent("alice", &sp_a, secret)?, at_a);

    let s1 = registry.issue_transient("alice", &sp_a, "session-1");
    let s2 = registry.issue_transient("alice", &sp_a, "session-2");
    println!("transient: {} / {}", s1.pseudonym, s2.pseudonym);

    registry.link_account(&at_a.pseudonym, "local-account-17")?;
    let path =
        std::env::temp_dir().join(format!("fedbridge-pseudonyms-{}.json", std::process::id()));
    registry.save(&path)?;
    let restored = PseudonymRegistry::load(&path)?;
    std::fs::remove_file(&path)?;
    println!(
        "after reload {} -> {:?}",
        at_a.pseudonym,
        restored.resolve(&at_a.pseudonym)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
