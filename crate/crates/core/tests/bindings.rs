mod common;

use common::*;
use fedbridge::bindings::{self, BindingError, PostMessage, RedirectMessage, MAX_WREQ_BYTES};
use fedbridge::model::WstRequestSecurityTokenResponse;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use url::Url;

fn through_the_browser(redirect: &RedirectMessage) -> Vec<(String, String)> {
    let location = Url::parse(redirect.location().as_str()).unwrap();
    RedirectMessage::from_location(&location).params
}

fn through_a_form(post: &PostMessage) -> Vec<(String, String)> {
    let page = PostMessage::from_html(&post.to_html()).expect("auto-submit form");
    assert_eq!(page.target, post.target);
    let body = PostMessage::from_form_body(page.target.clone(), &page.to_form_body());
    body.fields
}

proptest! {
    #[test]
    fn saml_redirect_inverts(req in authn_request(), relay in "[ -~]{0,40}", target in url()) {
        let params = through_the_browser(&bindings::encode_saml_redirect(&req, &relay, &target));
        let (back, got_relay) = bindings::decode_saml_redirect(&params).unwrap();
        prop_assert_eq!(back, req);
        prop_assert_eq!(got_relay.unwrap_or_default(), relay);
    }

    #[test]
    fn wsfed_signin_inverts(rst in rst(), wctx in "[ -~]{0,40}", target in url()) {
        let redirect = bindings::encode_wsfed_signin(&rst, &wctx, &target).unwrap();
        let (back, got_wctx) = bindings::decode_wsfed_signin(&through_the_browser(&redirect)).unwrap();
        prop_assert_eq!(back, rst);
        prop_assert_eq!(got_wctx, wctx);
    }

    #[test]
    fn saml_response_post_inverts(resp in saml_response(), relay in "[ -~]{0,40}", target in url()) {
        let fields = through_a_form(&bindings::encode_saml_response_post(&resp, &relay, &target));
        let (back, got_relay) = bindings::decode_saml_response_post(&fields).unwrap();
        prop_assert_eq!(back, resp);
        prop_assert_eq!(got_relay.unwrap_or_default(), relay);
    }

    #[test]
    fn wsfed_result_post_inverts(token in assertion(), wctx in "\\PC{0,40}", target in url()) {
        let rstr = WstRequestSecurityTokenResponse::issued("ctx", token);
        let fields = through_a_form(&bindings::encode_wsfed_signin_response_post(&rstr, &wctx, &target));
        let (back, got_wctx) = bindings::decode_wsfed_signin_response_post(&fields).unwrap();
        prop_assert_eq!(back, rstr);
        prop_assert_eq!(got_wctx, wctx);
    }
}

#[test]
fn oversized_wreq_is_refused() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let mut rst = rst().new_tree(&mut runner).unwrap().current();
    rst.claims_dialect = Some("urn:dialect".into());
    rst.claim_types = (0..200)
        .map(|i| format!("urn:claim:{i:04}:with:a:long:tail"))
        .collect();
    let target = Url::parse("https://sts.example.org/signin").unwrap();
    match bindings::encode_wsfed_signin(&rst, "c", &target) {
        Err(BindingError::RequestTooLarge { size, limit }) => {
            assert!(size > limit && limit == MAX_WREQ_BYTES)
        }
        other => panic!("expected RequestTooLarge, got {other:?}"),
    }
}

#[test]
fn parameter_names_are_exact() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let req = authn_request().new_tree(&mut runner).unwrap().current();
    let target = Url::parse("https://idp.example.org/sso").unwrap();
    let names = |p: &[(String, String)]| p.iter().map(|(k, _)| k.clone()).collect::<Vec<_>>();

    let r = bindings::encode_saml_redirect(&req, "rs", &target);
    assert_eq!(names(&r.params), ["SAMLRequest", "RelayState"]);
    let mut map = fedbridge::translation::AuthnContextMapping::default();
    map.pass_through = true;
    let rst = fedbridge::translation::authn_request_to_rst(&req, &map, "c").unwrap();
    let w = bindings::encode_wsfed_signin(&rst, "c", &target).unwrap();
    assert_eq!(names(&w.params), ["wa", "wreq", "wctx"]);
    assert_eq!(w.param("wa"), Some("wsignin1.0"));
    let a = assertion().new_tree(&mut runner).unwrap().current();
    let resp = fedbridge::translation::wrap_saml_response(a.clone(), &a.issuer, "_r");
    assert_eq!(
        names(&bindings::encode_saml_response_post(&resp, "rs", &target).fields),
        ["SAMLResponse", "RelayState"]
    );
    let rstr = WstRequestSecurityTokenResponse::issued("c", a);
    let p = bindings::encode_wsfed_signin_response_post(&rstr, "c", &target);
    assert_eq!(names(&p.fields), ["wa", "wresult", "wctx"]);
    assert_eq!(p.field("wa"), Some("wsignin1.0"));
}
