mod common;

use std::collections::BTreeSet;

use common::*;
use fedbridge::model::{Attribute, EntityId, ProtocolDocument, SamlAuthnRequest};
use fedbridge::ns;
use fedbridge::signing::{self, KeyRecord, KeyStore};
use fedbridge::translation::{
    self, AttributeNameMapping, AttributePair, AuthnContextMapping, ContextPair, Direction,
    TranslationError,
};
use proptest::prelude::*;
use url::Url;

fn broker() -> EntityId {
    EntityId::new("https://broker.example.org").unwrap()
}

fn idp_sso() -> Url {
    Url::parse("https://idp.example.org/sso").unwrap()
}

/// A random bijection and a request using zero or one of its classes.
fn table_and_request() -> impl Strategy<Value = (AuthnContextMapping, SamlAuthnRequest)> {
    prop::collection::btree_set("[a-z]{1,10}", 1..8)
        .prop_flat_map(|names: BTreeSet<String>| {
            let n = names.len();
            (Just(names), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
        })
        .prop_map(|(names, perm)| {
            let names: Vec<_> = names.into_iter().collect();
            let entries = names
                .iter()
                .zip(&perm)
                .map(|(s, &w)| ContextPair {
                    saml: format!("urn:test:ac:{s}"),
                    wst: format!("https://authn.example.org/types/{}", names[w]),
                })
                .collect();
            AuthnContextMapping::new(entries, false).unwrap()
        })
        .prop_flat_map(|table| {
            let classes: Vec<String> = table.entries().iter().map(|p| p.saml.clone()).collect();
            let pick = proptest::option::of(prop::sample::select(classes))
                .prop_map(|c| c.into_iter().collect());
            (Just(table), authn_request_with(pick))
        })
}

proptest! {
    #[test]
    fn saml_wst_saml_preserves_the_request(req in authn_request_with(mapped_classes())) {
        let map = AuthnContextMapping::default();
        let rst = translation::authn_request_to_rst(&req, &map, &req.id).unwrap();
        let back = translation::rst_to_authn_request(&rst, &map, &broker(), &idp_sso()).unwrap();
        prop_assert_eq!(&back.name_id_policy_format, &req.name_id_policy_format);
        prop_assert_eq!(&back.requested_authn_context, &req.requested_authn_context);
        prop_assert_eq!(back.force_authn, req.force_authn);
        prop_assert_eq!(&back.acs_url, &req.acs_url);
    }

    #[test]
    fn round_trip_holds_for_any_bijection((map, req) in table_and_request()) {
        let rst = translation::authn_request_to_rst(&req, &map, "ctx").unwrap();
        let back = translation::rst_to_authn_request(&rst, &map, &broker(), &idp_sso()).unwrap();
        prop_assert_eq!(back.requested_authn_context, req.requested_authn_context);
    }

    #[test]
    fn produced_rst_carries_the_issue_constants(req in authn_request_with(mapped_classes())) {
        let xml = translation::authn_request_to_rst(&req, &AuthnContextMapping::default(), "c").unwrap().to_xml();
        prop_assert!(xml.contains("<wst:RequestType>http://docs.oasis-open.org/ws-sx/ws-trust/200512/Issue</wst:RequestType>"));
        prop_assert!(xml.contains("<wst:TokenType>urn:oasis:names:tc:SAML:2.0:assertion</wst:TokenType>"));
    }

    #[test]
    fn identity_relay_keeps_content(a in unsigned_assertion(), seed in any::<[u8; 32]>()) {
        let ip_key = KeyRecord::from_seed("ip", a.issuer.clone(), seed);
        let broker_key = KeyRecord::generate("broker", broker());
        let issued = signing::sign(&a, &ip_key).unwrap();
        let trusted = KeyStore::new().with(&ip_key.public().unwrap()).unwrap();
        let relayed = translation::relay_assertion(&issued, &trusted, &broker_key, &AttributeNameMapping::identity(), Direction::WstToSaml, None).unwrap();
        prop_assert_eq!(relayed.canonical_bytes(), issued.canonical_bytes());
        prop_assert_eq!(relayed.signature.as_ref().unwrap().key_id.as_str(), "broker");
    }
}

#[test]
fn email_format_becomes_an_authclaims_claim_and_back() {
    let (dialect, types) = translation::name_id_policy_to_claims(ns::NAMEID_EMAIL);
    assert_eq!(
        dialect,
        "http://schemas.xmlsoap.org/ws/2006/12/authorization/authclaims"
    );
    assert_eq!(
        types,
        vec!["urn:oasis:names:tc:SAML:1.1:nameid-format:emailAddress".to_string()]
    );
    assert_eq!(
        translation::claims_to_name_id_policy(Some(&dialect), &types).as_deref(),
        Some(ns::NAMEID_EMAIL)
    );
    assert_eq!(
        translation::claims_to_name_id_policy(Some("urn:other"), &types),
        None
    );
}

fn request(classes: &[&str]) -> SamlAuthnRequest {
    SamlAuthnRequest {
        id: "_req".into(),
        issue_instant: fedbridge::model::Timestamp::from_unix(1_900_000_000),
        issuer: EntityId::new("https://sp.example.org").unwrap(),
        destination: Url::parse("https://broker.example.org/saml/sso").unwrap(),
        acs_url: Url::parse("https://sp.example.org/acs").unwrap(),
        name_id_policy_format: None,
        requested_authn_context: classes.iter().map(|c| c.to_string()).collect(),
        force_authn: false,
    }
}

#[test]
fn unmapped_context_fails_unless_passed_through() {
    let unmapped = "urn:example:ac:RetinaScan";
    let mut map = AuthnContextMapping::default();
    assert_eq!(
        translation::authn_request_to_rst(&request(&[unmapped]), &map, "c"),
        Err(TranslationError::UnmappedAuthnContext(vec![
            unmapped.to_string()
        ]))
    );
    map.pass_through = true;
    let rst = translation::authn_request_to_rst(&request(&[unmapped]), &map, "c").unwrap();
    assert_eq!(rst.authentication_type.as_deref(), Some(unmapped));
}

#[test]
fn several_classes_collapse_to_the_first_mapped() {
    let map = AuthnContextMapping::default();
    let req = request(&[
        "urn:example:ac:Unknown",
        ns::AC_PASSWORD_PROTECTED,
        "urn:oasis:names:tc:SAML:2.0:ac:classes:Password",
    ]);
    let rst = translation::authn_request_to_rst(&req, &map, "c").unwrap();
    assert_eq!(
        rst.authentication_type.as_deref(),
        map.to_wst(ns::AC_PASSWORD_PROTECTED)
    );
}

#[test]
fn renew_requests_are_refused() {
    let mut rst =
        translation::authn_request_to_rst(&request(&[]), &AuthnContextMapping::default(), "c")
            .unwrap();
    rst.request_type = ns::WST_RENEW.to_string();
    assert_eq!(
        translation::rst_to_authn_request(
            &rst,
            &AuthnContextMapping::default(),
            &broker(),
            &idp_sso()
        ),
        Err(TranslationError::UnsupportedRequestType(
            ns::WST_RENEW.to_string()
        ))
    );
}

#[test]
fn mapping_tables_must_be_bijections() {
    let dup = vec![
        ContextPair {
            saml: "urn:a".into(),
            wst: "urn:x".into(),
        },
        ContextPair {
            saml: "urn:b".into(),
            wst: "urn:x".into(),
        },
    ];
    assert!(AuthnContextMapping::new(dup, false).is_err());
    let dup = vec![
        AttributePair {
            saml: "mail".into(),
            claim: "urn:email".into(),
        },
        AttributePair {
            saml: "mail".into(),
            claim: "urn:mail".into(),
        },
    ];
    assert!(AttributeNameMapping::new(dup).is_err());
}

#[test]
fn attribute_renaming_changes_only_names() {
    let ip = EntityId::new("https://sts.example.org").unwrap();
    let ip_key = KeyRecord::generate("sts", ip.clone());
    let broker_key = KeyRecord::generate("broker", broker());
    let now = fedbridge::model::Timestamp::now();
    let issued = signing::sign(
        &fedbridge::model::SamlAssertion {
            id: "_a".into(),
            issuer: ip,
            subject_name: "alice".into(),
            subject_name_format: ns::NAMEID_UNSPECIFIED.into(),
            authn_context_class: ns::AC_PASSWORD_PROTECTED.into(),
            authn_instant: now,
            attributes: vec![
                Attribute::new("http://claims.example.org/email", "a@example.org"),
                Attribute::new("role", "x"),
            ],
            not_before: now,
            not_on_or_after: now.plus_secs(60),
            signature: None,
        },
        &ip_key,
    )
    .unwrap();
    let map = AttributeNameMapping::new(vec![AttributePair {
        saml: "urn:oid:0.9.2342.19200300.100.1.3".into(),
        claim: "http://claims.example.org/email".into(),
    }])
    .unwrap();
    let trusted = KeyStore::new().with(&ip_key.public().unwrap()).unwrap();
    let relayed = translation::relay_assertion(
        &issued,
        &trusted,
        &broker_key,
        &map,
        Direction::WstToSaml,
        None,
    )
    .unwrap();
    assert_eq!(
        relayed.attributes,
        vec![
            Attribute::new("urn:oid:0.9.2342.19200300.100.1.3", "a@example.org"),
            Attribute::new("role", "x")
        ]
    );
    assert_eq!(relayed.subject_name, issued.subject_name);
}
