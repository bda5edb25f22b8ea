//! Generators and fixtures shared by the integration tests.
#![allow(dead_code)]

pub mod oracle;

use fedbridge::model::{
    Attribute, EntityId, Lifetime, SamlAssertion, SamlAuthnRequest, SamlResponse, Signature,
    StatusCode, Timestamp, WstRequestSecurityToken, WstRequestSecurityTokenResponse,
};
use fedbridge::ns;
use fedbridge::translation::AuthnContextMapping;
use proptest::collection::vec;
use proptest::option;
use proptest::prelude::*;
use url::Url;

pub const NAMEID_FORMATS: [&str; 4] = [
    ns::NAMEID_EMAIL,
    ns::NAMEID_UNSPECIFIED,
    ns::NAMEID_PERSISTENT,
    ns::NAMEID_TRANSIENT,
];

pub fn entity_id() -> impl Strategy<Value = EntityId> {
    "https://[a-z]{1,10}\\.example\\.(org|net)(/[a-z0-9]{1,8}){0,2}"
        .prop_map(|s| EntityId::new(s).unwrap())
}

pub fn url() -> impl Strategy<Value = Url> {
    "https://[a-z]{1,10}\\.example\\.org(:[1-9][0-9]{3})?(/[a-z0-9]{1,8}){0,3}(\\?q=[a-z0-9]{1,6})?"
        .prop_map(|s| Url::parse(&s).unwrap())
}

pub fn protocol_id() -> impl Strategy<Value = String> {
    "_[0-9a-f]{8,32}"
}

/// Printable text, including markup characters.
pub fn text() -> impl Strategy<Value = String> {
    "\\PC{1,24}"
}

pub fn uri() -> impl Strategy<Value = String> {
    "urn:[a-z]{1,8}:[a-zA-Z0-9:.&<>\"-]{1,24}"
}

pub fn timestamp() -> impl Strategy<Value = Timestamp> {
    (1_000_000_000i64..2_500_000_000).prop_map(Timestamp::from_unix)
}

pub fn nameid_format() -> impl Strategy<Value = String> {
    prop::sample::select(NAMEID_FORMATS.to_vec()).prop_map(str::to_string)
}

pub fn saml_classes() -> Vec<String> {
    AuthnContextMapping::default()
        .entries()
        .iter()
        .map(|p| p.saml.clone())
        .collect()
}

/// Zero or one context class from the default table.
pub fn mapped_classes() -> impl Strategy<Value = Vec<String>> {
    option::of(prop::sample::select(saml_classes())).prop_map(|c| c.into_iter().collect())
}

pub fn authn_request_with(
    classes: impl Strategy<Value = Vec<String>>,
) -> impl Strategy<Value = SamlAuthnRequest> {
    (
        protocol_id(),
        timestamp(),
        entity_id(),
        url(),
        url(),
        option::of(nameid_format()),
        classes,
        any::<bool>(),
    )
        .prop_map(
            |(
                id,
                issue_instant,
                issuer,
                destination,
                acs_url,
                name_id_policy_format,
                requested_authn_context,
                force_authn,
            )| {
                SamlAuthnRequest {
                    id,
                    issue_instant,
                    issuer,
                    destination,
                    acs_url,
                    name_id_policy_format,
                    requested_authn_context,
                    force_authn,
                }
            },
        )
}

pub fn authn_request() -> impl Strategy<Value = SamlAuthnRequest> {
    authn_request_with(vec(uri(), 0..3))
}

pub fn signature() -> impl Strategy<Value = Signature> {
    ("[a-z-]{1,12}", uri(), vec(any::<u8>(), 64)).prop_map(|(key_id, algorithm_id, value)| {
        Signature {
            key_id,
            algorithm_id,
            value,
        }
    })
}

pub fn attribute() -> impl Strategy<Value = Attribute> {
    ("[a-zA-Z][a-zA-Z0-9:.]{0,15}", "\\PC{0,24}").prop_map(|(n, v)| Attribute::new(n, v))
}

pub fn assertion_with(
    signature: impl Strategy<Value = Option<Signature>>,
) -> impl Strategy<Value = SamlAssertion> {
    (
        (protocol_id(), entity_id(), text(), nameid_format(), uri()),
        (
            timestamp(),
            vec(attribute(), 0..5),
            timestamp(),
            1i64..100_000,
            signature,
        ),
    )
        .prop_map(
            |(
                (id, issuer, subject_name, subject_name_format, authn_context_class),
                (authn_instant, attributes, not_before, window, signature),
            )| SamlAssertion {
                id,
                issuer,
                subject_name,
                subject_name_format,
                authn_context_class,
                authn_instant,
                attributes,
                not_before,
                not_on_or_after: not_before.plus_secs(window),
                signature,
            },
        )
}

pub fn assertion() -> impl Strategy<Value = SamlAssertion> {
    assertion_with(option::of(signature()))
}

pub fn unsigned_assertion() -> impl Strategy<Value = SamlAssertion> {
    assertion_with(Just(None))
}

pub fn saml_response() -> impl Strategy<Value = SamlResponse> {
    (
        protocol_id(),
        protocol_id(),
        entity_id(),
        option::of(assertion()),
        prop::sample::select(vec![StatusCode::Requester, StatusCode::Responder]),
    )
        .prop_map(
            |(id, in_response_to, issuer, assertion, failure)| SamlResponse {
                id,
                in_response_to,
                issuer,
                status: if assertion.is_some() {
                    StatusCode::Success
                } else {
                    failure
                },
                assertion,
            },
        )
}

pub fn rst() -> impl Strategy<Value = WstRequestSecurityToken> {
    (
        text(),
        prop::sample::select(vec![ns::WST_ISSUE, ns::WST_RENEW]),
        option::of((uri(), vec(uri(), 0..3))),
        option::of(uri()),
        url(),
        any::<bool>(),
    )
        .prop_map(
            |(context, request_type, claims, authentication_type, reply_to, force_authn)| {
                let (claims_dialect, claim_types) = match claims {
                    Some((d, t)) => (Some(d), t),
                    None => (None, Vec::new()),
                };
                WstRequestSecurityToken {
                    context,
                    request_type: request_type.to_string(),
                    token_type: ns::SAML2_TOKEN_TYPE.to_string(),
                    claims_dialect,
                    claim_types,
                    authentication_type,
                    reply_to,
                    force_authn,
                }
            },
        )
}

pub fn rstr() -> impl Strategy<Value = WstRequestSecurityTokenResponse> {
    (
        text(),
        prop_oneof![assertion().prop_map(Ok), text().prop_map(Err)],
    )
        .prop_map(|(context, body)| match body {
            Ok(token) => WstRequestSecurityTokenResponse::issued(context, token),
            Err(reason) => WstRequestSecurityTokenResponse::failed(context, reason),
        })
}

pub fn lifetime_of(a: &SamlAssertion) -> Lifetime {
    Lifetime {
        created: a.not_before,
        expires: a.not_on_or_after,
    }
}
