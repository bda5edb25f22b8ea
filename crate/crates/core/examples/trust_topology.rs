//! Who translates between an SP and an IP of different dialects, for each
//! arrangement of trust links.

use std::error::Error;

use fedbridge::trust_registry::canned;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    for c in [
        canned::authority_centered(),
        canned::service_provider_centered(),
        canned::brokered(),
        canned::dual_hub(),
    ] {
        match c.topology.resolve_responsible(&c.sp, &c.ip) {
            Ok(responsible) => {
                let path = c.topology.resolve_path(&c.sp, &c.ip)?;
                let hops: Vec<_> = path.iter().map(|h| h.as_str()).collect();
                println!(
                    "{:<19} responsible {responsible}  path {}",
                    c.name,
                    hops.join(" -> ")
                );
            }
            Err(e) => println!("{:<19} {e}", c.name),
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
