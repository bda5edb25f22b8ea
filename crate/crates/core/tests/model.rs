mod common;

use common::*;
use fedbridge::error::ParseError;
use fedbridge::model::{
    AnyDocument, ProtocolDocument, SamlAssertion, SamlAuthnRequest, SamlResponse,
    WstRequestSecurityToken, WstRequestSecurityTokenResponse,
};
use proptest::prelude::*;

fn round_trips<D: ProtocolDocument + PartialEq + std::fmt::Debug>(
    doc: &D,
) -> Result<(), TestCaseError> {
    let xml = doc.to_xml();
    let back = D::from_xml(&xml).map_err(|e| TestCaseError::fail(format!("{e}\n{xml}")))?;
    prop_assert_eq!(&back, doc);
    prop_assert_eq!(back.to_xml(), xml);
    Ok(())
}

proptest! {
    #[test]
    fn authn_request_round_trip(doc in authn_request()) {
        round_trips(&doc)?;
    }

    #[test]
    fn assertion_round_trip(doc in assertion()) {
        round_trips(&doc)?;
    }

    #[test]
    fn response_round_trip(doc in saml_response()) {
        round_trips(&doc)?;
    }

    #[test]
    fn rst_round_trip(doc in rst()) {
        round_trips(&doc)?;
    }

    #[test]
    fn rstr_round_trip(doc in rstr()) {
        round_trips(&doc)?;
    }

    #[test]
    fn distinct_assertions_have_distinct_canonical_bytes(a in unsigned_assertion(), b in unsigned_assertion()) {
        prop_assume!(a != b);
        prop_assert_ne!(a.canonical_bytes(), b.canonical_bytes());
    }

    #[test]
    fn canonical_bytes_ignore_the_signature(a in unsigned_assertion(), sig in signature()) {
        let mut signed = a.clone();
        signed.signature = Some(sig);
        prop_assert_eq!(signed.canonical_bytes(), a.canonical_bytes());
    }

    #[test]
    fn truncated_documents_are_malformed(doc in assertion(), cut in any::<prop::sample::Index>()) {
        let xml = doc.to_xml();
        let boundaries: Vec<usize> = xml.char_indices().map(|(i, _)| i).collect();
        let at = boundaries[cut.index(boundaries.len())];
        let result = SamlAssertion::from_xml(&xml[..at]);
        prop_assert!(matches!(result, Err(ParseError::MalformedXml { .. })), "{:?}", result);
    }

    #[test]
    fn detect_finds_the_kind(doc in rstr()) {
        let found = AnyDocument::detect(&doc.to_xml()).unwrap();
        prop_assert_eq!(found, AnyDocument::RequestSecurityTokenResponse(doc));
    }
}

const REQUEST_A: &str = r#"<samlp:AuthnRequest xmlns:samlp="urn:oasis:names:tc:SAML:2.0:protocol" xmlns:saml="urn:oasis:names:tc:SAML:2.0:assertion" ID="_r1" Version="2.0" IssueInstant="2030-01-02T03:04:05Z" Destination="https://broker.example.org/saml/sso" AssertionConsumerServiceURL="https://sp.example.org/acs" ForceAuthn="true">
  <saml:Issuer>https://sp.example.org</saml:Issuer>
  <samlp:NameIDPolicy Format="urn:oasis:names:tc:SAML:1.1:nameid-format:emailAddress" AllowCreate="true"/>
</samlp:AuthnRequest>"#;

const REQUEST_B: &str = r#"<p:AuthnRequest ForceAuthn="true" AssertionConsumerServiceURL="https://sp.example.org/acs" Destination="https://broker.example.org/saml/sso" IssueInstant="2030-01-02T03:04:05Z" Version="2.0" ID="_r1" xmlns:p="urn:oasis:names:tc:SAML:2.0:protocol"><a:Issuer xmlns:a="urn:oasis:names:tc:SAML:2.0:assertion">https://sp.example.org</a:Issuer><p:NameIDPolicy AllowCreate="true" Format="urn:oasis:names:tc:SAML:1.1:nameid-format:emailAddress"/></p:AuthnRequest>"#;

#[test]
fn attribute_order_and_prefixes_do_not_change_the_document() {
    let a = SamlAuthnRequest::from_xml(REQUEST_A).unwrap();
    let b = SamlAuthnRequest::from_xml(REQUEST_B).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.canonical_bytes(), b.canonical_bytes());
    assert_eq!(a.to_xml(), b.to_xml());
}

#[test]
fn saml1_protocol_namespace_is_rejected() {
    let saml1 = REQUEST_A.replace(
        r#"xmlns:samlp="urn:oasis:names:tc:SAML:2.0:protocol""#,
        r#"xmlns:samlp="urn:oasis:names:tc:SAML:1.0:protocol""#,
    );
    match SamlAuthnRequest::from_xml(&saml1) {
        Err(ParseError::WrongNamespace { found, .. }) => {
            assert_eq!(found, "urn:oasis:names:tc:SAML:1.0:protocol")
        }
        other => panic!("expected WrongNamespace, got {other:?}"),
    }
}

#[test]
fn wrong_trust_namespace_is_rejected() {
    let rst = r#"<wst:RequestSecurityToken xmlns:wst="http://schemas.xmlsoap.org/ws/2005/02/trust"><wst:RequestType>http://schemas.xmlsoap.org/ws/2005/02/trust/Issue</wst:RequestType></wst:RequestSecurityToken>"#;
    assert!(matches!(
        WstRequestSecurityToken::from_xml(rst),
        Err(ParseError::WrongNamespace { .. })
    ));
}

#[test]
fn response_and_rstr_invariants() {
    let bad_response = r#"<samlp:Response xmlns:samlp="urn:oasis:names:tc:SAML:2.0:protocol" xmlns:saml="urn:oasis:names:tc:SAML:2.0:assertion" ID="_x" InResponseTo="_r" Version="2.0" IssueInstant="2030-01-01T00:00:00Z"><saml:Issuer>https://idp.example.org</saml:Issuer><samlp:Status><samlp:StatusCode Value="urn:oasis:names:tc:SAML:2.0:status:Success"/></samlp:Status></samlp:Response>"#;
    assert!(matches!(
        SamlResponse::from_xml(bad_response),
        Err(ParseError::InvariantViolation { .. })
    ));
    let empty_rstr = r#"<wst:RequestSecurityTokenResponse xmlns:wst="http://docs.oasis-open.org/ws-sx/ws-trust/200512" Context="c"><wst:TokenType>urn:oasis:names:tc:SAML:2.0:assertion</wst:TokenType></wst:RequestSecurityTokenResponse>"#;
    assert!(matches!(
        WstRequestSecurityTokenResponse::from_xml(empty_rstr),
        Err(ParseError::InvariantViolation { .. })
    ));
}
