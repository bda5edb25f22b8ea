//! The browser-facing encodings: SAML redirect and POST, WS-Federation
//! `wsignin1.0` redirect and result form.

use std::error::Error;

use fedbridge::bindings::{self, PostMessage, RedirectMessage};
use fedbridge::model::{EntityId, SamlAuthnRequest, Timestamp, WstRequestSecurityTokenResponse};
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
        name_id_policy_format: Some(ns::NAMEID_EMAIL.into()),
        requested_authn_context: Vec::new(),
        force_authn: false,
    };

    let redirect = bindings::encode_saml_redirect(&request, "state-42", &request.destination);
    let location = redirect.location();
    println!("SAML redirect: {}...", &location.as_str()[..100]);
    let received = RedirectMessage::from_location(&location);
    let (decoded, relay) = bindings::decode_saml_redirect(&received.params)?;
    assert_eq!(decoded, request);
    assert_eq!(relay.as_deref(), Some("state-42"));

    let rst =
        translation::authn_request_to_rst(&request, &AuthnContextMapping::default(), "ctx-7")?;
    let signin = bindings::encode_wsfed_signin(
        &rst,
        "ctx-7",
        &Url::parse("https://sts.example.org/signin")?,
    )?;
    let names: Vec<_> = signin.params.iter().map(|(k, _)| k.as_str()).collect();
    println!("WS-Fed redirect parameters: {names:?}");
    let (back, wctx) =
        bindings::decode_wsfed_signin(&RedirectMessage::from_location(&signin.location()).params)?;
    assert_eq!((back, wctx.as_str()), (rst, "ctx-7"));

    let failed = WstRequestSecurityTokenResponse::failed("ctx-7", "login cancelled");
    let form = bindings::encode_wsfed_signin_response_post(
        &failed,
        "ctx-7",
        &Url::parse("https://sp.example.org/return")?,
    );
    let html = form.to_html();
    println!(
        "auto-submit page: {} bytes, auto-submits: {}",
        html.len(),
        bindings::is_auto_submit(&html)
    );
    let posted = PostMessage::from_html(&html).ok_or("form not found")?;
    match bindings::decode_wsfed_signin_response_post(&posted.fields) {
        Err(e) => println!("token-less result rejected: {e}"),
        Ok(_) => return Err("a result without a token was accepted".into()),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
