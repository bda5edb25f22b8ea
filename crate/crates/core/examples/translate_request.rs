//! Turns a SAML AuthnRequest into a WS-Trust RequestSecurityToken and back.

use std::error::Error;

use fedbridge::model::{EntityId, ProtocolDocument, SamlAuthnRequest, Timestamp};
use fedbridge::ns;
use fedbridge::translation::{self, AuthnContextMapping};
use url::Url;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let request = SamlAuthnRequest {
        id: translation::new_id(),
        issue_instant: Timestamp::now(),
        issuer: EntityId::new("https://sp.example.org")?,
        destination: Url::parse("https://broker.example.org/saml/sso")?,
        acs_url: Url::parse("https://sp.example.org/acs")?,
        name_id_policy_format: Some(ns::NAMEID_EMAIL.to_string()),
        requested_authn_context: vec![ns::AC_PASSWORD_PROTECTED.to_string()],
        force_authn: true,
    };
    let ctx_map = AuthnContextMapping::default();

    let rst = translation::authn_request_to_rst(&request, &ctx_map, "ctx-1")?;
    println!("{}\n", rst.to_xml());

    let back = translation::rst_to_authn_request(
        &rst,
        &ctx_map,
        &EntityId::new("https://broker.example.org")?,
        &Url::parse("https://idp.example.org/sso")?,
    )?;
    println!("{}", back.to_xml());
    assert_eq!(back.name_id_policy_format, request.name_id_policy_format);
    assert_eq!(
        back.requested_authn_context,
        request.requested_authn_context
    );
    assert_eq!(back.force_authn, request.force_authn);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
