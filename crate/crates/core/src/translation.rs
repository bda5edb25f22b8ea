//! Conversion between SAML2 and WS-Trust protocol documents.
//!
//! Requests: a `samlp:AuthnRequest` becomes an Issue `wst:RequestSecurityToken`
//! for a SAML 2.0 assertion. The NameID policy travels as an authorization
//! claim of the same type, and requested authentication context classes are
//! mapped through a configurable table.
//!
//! Responses: the assertion is extracted from the source document, verified
//! against its issuer's key, optionally renamed attribute by attribute,
//! re-signed with the broker key and wrapped in the target dialect.

use std::collections::HashSet;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::model::{
    EntityId, SamlAssertion, SamlAuthnRequest, SamlResponse, StatusCode, Timestamp,
    WstRequestSecurityToken, WstRequestSecurityTokenResponse,
};
use crate::ns;
use crate::signing::{self, KeyRecord, KeyStore, SigningError};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TranslationError {
    #[error("no mapping for authentication context {0:?}")]
    UnmappedAuthnContext(Vec<String>),
    #[error("unsupported WS-Trust request type {0}")]
    UnsupportedRequestType(String),
    #[error("unsupported token type {0}")]
    UnsupportedTokenType(String),
    #[error("assertion signature is invalid")]
    SignatureInvalid,
    #[error("no security token in response{}", .0.as_deref().map(|r| format!(": {r}")).unwrap_or_default())]
    TokenMissing(Option<String>),
    #[error("assertion issued by {issuer} is not backed by a trusted key of that issuer")]
    UntrustedIssuer { issuer: String },
    #[error("response status is {0:?}")]
    NonSuccessStatus(StatusCode),
    #[error(transparent)]
    Signing(SigningError),
}

impl TranslationError {
    pub(crate) fn from_verify(err: SigningError, issuer: &EntityId) -> Self {
        match err {
            SigningError::SignatureInvalid | SigningError::MissingSignature => {
                TranslationError::SignatureInvalid
            }
            SigningError::UnknownKeyId(_) => TranslationError::UntrustedIssuer {
                issuer: issuer.to_string(),
            },
            other => TranslationError::Signing(other),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MappingError {
    #[error("{side} URI {uri} appears more than once")]
    Duplicate { side: &'static str, uri: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextPair {
    pub saml: String,
    pub wst: String,
}

/// Partial bijection between SAML authentication context classes and
/// WS-Federation authentication types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawContextMapping")]
pub struct AuthnContextMapping {
    entries: Vec<ContextPair>,
    /// Forward unmapped URIs verbatim instead of failing.
    pub pass_through: bool,
}

#[derive(Deserialize)]
struct RawContextMapping {
    #[serde(default)]
    entries: Vec<ContextPair>,
    #[serde(default)]
    pass_through: bool,
}

impl TryFrom<RawContextMapping> for AuthnContextMapping {
    type Error = MappingError;
    fn try_from(raw: RawContextMapping) -> Result<Self, Self::Error> {
        AuthnContextMapping::new(raw.entries, raw.pass_through)
    }
}

const WSFED_AUTHNTYPES: &str = "http://docs.oasis-open.org/wsfed/authorization/200706/authntypes";

impl AuthnContextMapping {
    pub fn new(entries: Vec<ContextPair>, pass_through: bool) -> Result<Self, MappingError> {
        check_bijection(
            entries.iter().map(|p| (p.saml.as_str(), p.wst.as_str())),
            "SAML",
            "WS-Trust",
        )?;
        Ok(AuthnContextMapping {
            entries,
            pass_through,
        })
    }

    pub fn entries(&self) -> &[ContextPair] {
        &self.entries
    }

    pub fn to_wst(&self, saml_class: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|p| p.saml == saml_class)
            .map(|p| p.wst.as_str())
    }

    pub fn to_saml(&self, wst_type: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|p| p.wst == wst_type)
            .map(|p| p.saml.as_str())
    }
}

impl Default for AuthnContextMapping {
    /// A small table of common pairings, pass-through disabled.
    fn default() -> Self {
        let pair = |saml: &str, wst: &str| ContextPair {
            saml: format!("urn:oasis:names:tc:SAML:2.0:ac:classes:{saml}"),
            wst: format!("{WSFED_AUTHNTYPES}/{wst}"),
        };
        AuthnContextMapping::new(
            vec![
                pair("PasswordProtectedTransport", "SslAndStrongPassword"),
                pair("Password", "Password"),
                pair("TLSClient", "SslAndKey"),
                pair("Smartcard", "Smartcard"),
                pair("SmartcardPKI", "SmartcardAndPin"),
            ],
            false,
        )
        .expect("default table is a bijection")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributePair {
    pub saml: String,
    pub claim: String,
}

/// Partial bijection between SAML attribute names and WS-Federation claim
/// types. Names without an entry pass through unchanged, so an empty table is
/// the identity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawAttributeMapping")]
pub struct AttributeNameMapping {
    entries: Vec<AttributePair>,
}

#[derive(Deserialize)]
struct RawAttributeMapping {
    #[serde(default)]
    entries: Vec<AttributePair>,
}

impl TryFrom<RawAttributeMapping> for AttributeNameMapping {
    type Error = MappingError;
    fn try_from(raw: RawAttributeMapping) -> Result<Self, Self::Error> {
        AttributeNameMapping::new(raw.entries)
    }
}

impl AttributeNameMapping {
    pub fn new(entries: Vec<AttributePair>) -> Result<Self, MappingError> {
        check_bijection(
            entries.iter().map(|p| (p.saml.as_str(), p.claim.as_str())),
            "SAML",
            "claim",
        )?;
        Ok(AttributeNameMapping { entries })
    }

    pub fn identity() -> Self {
        AttributeNameMapping::default()
    }

    pub fn entries(&self) -> &[AttributePair] {
        &self.entries
    }

    pub fn rename(&self, name: &str, direction: Direction) -> String {
        let found = self.entries.iter().find_map(|p| match direction {
            Direction::SamlToWst if p.saml == name => Some(&p.claim),
            Direction::WstToSaml if p.claim == name => Some(&p.saml),
            _ => None,
        });
        found.cloned().unwrap_or_else(|| name.to_string())
    }
}

fn check_bijection<'a>(
    pairs: impl Iterator<Item = (&'a str, &'a str)>,
    left: &'static str,
    right: &'static str,
) -> Result<(), MappingError> {
    let mut lhs = HashSet::new();
    let mut rhs = HashSet::new();
    for (l, r) in pairs {
        if !lhs.insert(l) {
            return Err(MappingError::Duplicate {
                side: left,
                uri: l.to_string(),
            });
        }
        if !rhs.insert(r) {
            return Err(MappingError::Duplicate {
                side: right,
                uri: r.to_string(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    SamlToWst,
    WstToSaml,
}

/// Maps authentication context identifiers across dialects.
///
/// `SamlToWst` returns the first class (in SAML preference order) that maps,
/// or the first class itself under pass-through. `WstToSaml` expects at most
/// one authentication type. The result is empty when nothing was requested.
pub fn map_authn_context(
    classes: &[String],
    ctx_map: &AuthnContextMapping,
    direction: Direction,
) -> Result<Vec<String>, TranslationError> {
    let Some(first) = classes.first() else {
        return Ok(Vec::new());
    };
    let lookup = |c: &str| match direction {
        Direction::SamlToWst => ctx_map.to_wst(c),
        Direction::WstToSaml => ctx_map.to_saml(c),
    };
    if let Some(mapped) = classes.iter().find_map(|c| lookup(c)) {
        return Ok(vec![mapped.to_string()]);
    }
    if ctx_map.pass_through {
        Ok(vec![first.clone()])
    } else {
        Err(TranslationError::UnmappedAuthnContext(classes.to_vec()))
    }
}

/// A NameID policy format expressed as an authorization claim of the same type.
pub fn name_id_policy_to_claims(format: &str) -> (String, Vec<String>) {
    (ns::AUTHCLAIMS_DIALECT.to_string(), vec![format.to_string()])
}

pub fn claims_to_name_id_policy(dialect: Option<&str>, claim_types: &[String]) -> Option<String> {
    if dialect != Some(ns::AUTHCLAIMS_DIALECT) {
        return None;
    }
    claim_types
        .first()
        .filter(|c| ns::is_nameid_format(c))
        .cloned()
}

/// The token is requested for the SP's assertion consumer URL; callers
/// relaying through a broker replace `reply_to` with their own endpoint.
pub fn authn_request_to_rst(
    req: &SamlAuthnRequest,
    ctx_map: &AuthnContextMapping,
    context: &str,
) -> Result<WstRequestSecurityToken, TranslationError> {
    let (claims_dialect, claim_types) = match &req.name_id_policy_format {
        Some(format) => {
            let (dialect, types) = name_id_policy_to_claims(format);
            (Some(dialect), types)
        }
        None => (None, Vec::new()),
    };
    let authentication_type =
        map_authn_context(&req.requested_authn_context, ctx_map, Direction::SamlToWst)?
            .into_iter()
            .next();
    Ok(WstRequestSecurityToken {
        context: context.to_string(),
        request_type: ns::WST_ISSUE.to_string(),
        token_type: ns::SAML2_TOKEN_TYPE.to_string(),
        claims_dialect,
        claim_types,
        authentication_type,
        reply_to: req.acs_url.clone(),
        force_authn: req.force_authn,
    })
}

/// Builds a fresh AuthnRequest from an Issue RST. The RST's reply address
/// becomes the assertion consumer URL.
pub fn rst_to_authn_request(
    rst: &WstRequestSecurityToken,
    ctx_map: &AuthnContextMapping,
    issuer: &EntityId,
    destination: &Url,
) -> Result<SamlAuthnRequest, TranslationError> {
    if rst.request_type != ns::WST_ISSUE {
        return Err(TranslationError::UnsupportedRequestType(
            rst.request_type.clone(),
        ));
    }
    if rst.token_type != ns::SAML2_TOKEN_TYPE {
        return Err(TranslationError::UnsupportedTokenType(
            rst.token_type.clone(),
        ));
    }
    let requested: Vec<String> = rst.authentication_type.iter().cloned().collect();
    let requested_authn_context = map_authn_context(&requested, ctx_map, Direction::WstToSaml)?;
    Ok(SamlAuthnRequest {
        id: new_id(),
        issue_instant: Timestamp::now(),
        issuer: issuer.clone(),
        destination: destination.clone(),
        acs_url: rst.reply_to.clone(),
        name_id_policy_format: claims_to_name_id_policy(
            rst.claims_dialect.as_deref(),
            &rst.claim_types,
        ),
        requested_authn_context,
        force_authn: rst.force_authn,
    })
}

/// Subject replacement applied before re-signing (pseudonymous relaying).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectRewrite {
    pub name: String,
    pub format: String,
}

/// Verifies an assertion against its issuer's key, renames attributes and
/// signs it with the broker key. Everything else is kept as issued.
pub fn relay_assertion(
    assertion: &SamlAssertion,
    verifier_keys: &KeyStore,
    broker_signer: &KeyRecord,
    attr_map: &AttributeNameMapping,
    direction: Direction,
    rewrite: Option<&SubjectRewrite>,
) -> Result<SamlAssertion, TranslationError> {
    let signer = signing::verify(assertion, verifier_keys)
        .map_err(|e| TranslationError::from_verify(e, &assertion.issuer))?;
    if signer != assertion.issuer {
        return Err(TranslationError::UntrustedIssuer {
            issuer: assertion.issuer.to_string(),
        });
    }
    let mut relayed = assertion.clone();
    for attr in &mut relayed.attributes {
        attr.name = attr_map.rename(&attr.name, direction);
    }
    if let Some(rw) = rewrite {
        relayed.subject_name = rw.name.clone();
        relayed.subject_name_format = rw.format.clone();
    }
    signing::sign(&relayed, broker_signer).map_err(TranslationError::Signing)
}

pub fn rstr_to_saml_response(
    rstr: &WstRequestSecurityTokenResponse,
    verifier_keys: &KeyStore,
    broker_signer: &KeyRecord,
    in_response_to: &str,
    attr_map: &AttributeNameMapping,
) -> Result<SamlResponse, TranslationError> {
    let token = extract_token(rstr)?;
    let relayed = relay_assertion(
        token,
        verifier_keys,
        broker_signer,
        attr_map,
        Direction::WstToSaml,
        None,
    )?;
    Ok(wrap_saml_response(
        relayed,
        &broker_signer.owner,
        in_response_to,
    ))
}

pub fn saml_response_to_rstr(
    resp: &SamlResponse,
    verifier_keys: &KeyStore,
    broker_signer: &KeyRecord,
    context: &str,
    attr_map: &AttributeNameMapping,
) -> Result<WstRequestSecurityTokenResponse, TranslationError> {
    let token = extract_assertion(resp)?;
    let relayed = relay_assertion(
        token,
        verifier_keys,
        broker_signer,
        attr_map,
        Direction::SamlToWst,
        None,
    )?;
    Ok(WstRequestSecurityTokenResponse::issued(context, relayed))
}

pub fn extract_token(
    rstr: &WstRequestSecurityTokenResponse,
) -> Result<&SamlAssertion, TranslationError> {
    let token = rstr.requested_token.as_ref().ok_or_else(|| {
        TranslationError::TokenMissing(rstr.status.as_ref().map(|s| s.reason.clone()))
    })?;
    if rstr.token_type != ns::SAML2_TOKEN_TYPE {
        return Err(TranslationError::UnsupportedTokenType(
            rstr.token_type.clone(),
        ));
    }
    Ok(token)
}

pub fn extract_assertion(resp: &SamlResponse) -> Result<&SamlAssertion, TranslationError> {
    if resp.status != StatusCode::Success {
        return Err(TranslationError::NonSuccessStatus(resp.status));
    }
    resp.assertion
        .as_ref()
        .ok_or(TranslationError::TokenMissing(None))
}

pub fn wrap_saml_response(
    assertion: SamlAssertion,
    issuer: &EntityId,
    in_response_to: &str,
) -> SamlResponse {
    SamlResponse {
        id: new_id(),
        in_response_to: in_response_to.to_string(),
        issuer: issuer.clone(),
        status: StatusCode::Success,
        assertion: Some(assertion),
    }
}

/// Fresh protocol identifier: `_` followed by 128 random bits in hex.
pub fn new_id() -> String {
    let mut bytes = [0u8; 16];
    rand::thread_rng().fill_bytes(&mut bytes);
    format!("_{}", hex::encode(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Attribute, ProtocolDocument};

    fn entity(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn url(s: &str) -> Url {
        Url::parse(s).unwrap()
    }

    fn request() -> SamlAuthnRequest {
        SamlAuthnRequest {
            id: "_req1".into(),
            issue_instant: Timestamp::from_unix(1_800_000_000),
            issuer: entity("https://sp.example.org"),
            destination: url("https://broker.example.org/saml/sso"),
            acs_url: url("https://sp.example.org/acs"),
            name_id_policy_format: Some(ns::NAMEID_EMAIL.into()),
            requested_authn_context: vec![ns::AC_PASSWORD_PROTECTED.into()],
            force_authn: false,
        }
    }

    fn ctx_pair(saml: &str, wst: &str) -> ContextPair {
        ContextPair {
            saml: saml.into(),
            wst: wst.into(),
        }
    }

    #[test]
    fn rst_carries_issue_and_token_type() {
        let rst = authn_request_to_rst(&request(), &AuthnContextMapping::default(), "c1").unwrap();
        assert_eq!(
            rst.request_type,
            "http://docs.oasis-open.org/ws-sx/ws-trust/200512/Issue"
        );
        assert_eq!(rst.token_type, "urn:oasis:names:tc:SAML:2.0:assertion");
        assert_eq!(rst.context, "c1");
        let xml = rst.to_xml();
        assert!(xml.contains(
            "<wst:RequestType>http://docs.oasis-open.org/ws-sx/ws-trust/200512/Issue</wst:RequestType>"
        ));
        assert!(
            xml.contains("<wst:TokenType>urn:oasis:names:tc:SAML:2.0:assertion</wst:TokenType>")
        );
    }

    #[test]
    fn absent_optionals_stay_absent() {
        let mut req = request();
        req.name_id_policy_format = None;
        req.requested_authn_context.clear();
        let rst = authn_request_to_rst(&req, &AuthnContextMapping::default(), "c").unwrap();
        assert!(rst.claim_types.is_empty());
        assert_eq!(rst.claims_dialect, None);
        assert_eq!(rst.authentication_type, None);
    }

    #[test]
    fn email_format_becomes_authclaim() {
        let (dialect, types) = name_id_policy_to_claims(ns::NAMEID_EMAIL);
        assert_eq!(
            dialect,
            "http://schemas.xmlsoap.org/ws/2006/12/authorization/authclaims"
        );
        assert_eq!(
            types,
            vec!["urn:oasis:names:tc:SAML:1.1:nameid-format:emailAddress".to_string()]
        );
        assert_eq!(
            claims_to_name_id_policy(Some(&dialect), &types).as_deref(),
            Some(ns::NAMEID_EMAIL)
        );
    }

    #[test]
    fn claims_inverse_gates() {
        let email = vec![ns::NAMEID_EMAIL.to_string()];
        assert_eq!(
            claims_to_name_id_policy(Some(ns::AUTHCLAIMS_DIALECT), &[]),
            None
        );
        assert_eq!(
            claims_to_name_id_policy(Some("http://example.org/other"), &email),
            None
        );
        assert_eq!(claims_to_name_id_policy(None, &email), None);
        assert_eq!(
            claims_to_name_id_policy(
                Some(ns::AUTHCLAIMS_DIALECT),
                &["http://example.org/claims/role".to_string()]
            ),
            None
        );
    }

    #[test]
    fn context_lookup_and_pass_through() {
        let strict =
            AuthnContextMapping::new(vec![ctx_pair("urn:ctx:a", "urn:auth:a")], false).unwrap();
        assert_eq!(
            map_authn_context(&["urn:ctx:a".into()], &strict, Direction::SamlToWst).unwrap(),
            vec!["urn:auth:a".to_string()]
        );
        assert_eq!(
            map_authn_context(&["urn:auth:a".into()], &strict, Direction::WstToSaml).unwrap(),
            vec!["urn:ctx:a".to_string()]
        );
        assert!(map_authn_context(&[], &strict, Direction::SamlToWst)
            .unwrap()
            .is_empty());
        assert_eq!(
            map_authn_context(&["urn:ctx:b".into()], &strict, Direction::SamlToWst),
            Err(TranslationError::UnmappedAuthnContext(vec![
                "urn:ctx:b".into()
            ]))
        );
        let lenient = AuthnContextMapping::new(strict.entries().to_vec(), true).unwrap();
        assert_eq!(
            map_authn_context(&["urn:ctx:b".into()], &lenient, Direction::SamlToWst).unwrap(),
            vec!["urn:ctx:b".to_string()]
        );
    }

    #[test]
    fn first_mappable_class_wins() {
        let m = AuthnContextMapping::new(
            vec![
                ctx_pair("urn:ctx:a", "urn:auth:a"),
                ctx_pair("urn:ctx:b", "urn:auth:b"),
            ],
            false,
        )
        .unwrap();
        let classes = vec!["urn:ctx:x".into(), "urn:ctx:b".into(), "urn:ctx:a".into()];
        assert_eq!(
            map_authn_context(&classes, &m, Direction::SamlToWst).unwrap(),
            vec!["urn:auth:b".to_string()]
        );
    }

    #[test]
    fn mappings_reject_non_bijections() {
        assert!(AuthnContextMapping::new(
            vec![ctx_pair("urn:a", "urn:x"), ctx_pair("urn:a", "urn:y")],
            false
        )
        .is_err());
        assert!(AuthnContextMapping::new(
            vec![ctx_pair("urn:a", "urn:x"), ctx_pair("urn:b", "urn:x")],
            false
        )
        .is_err());
        let json =
            r#"{"entries":[{"saml":"urn:a","claim":"urn:x"},{"saml":"urn:b","claim":"urn:x"}]}"#;
        assert!(serde_json::from_str::<AttributeNameMapping>(json).is_err());
    }

    #[test]
    fn rst_back_to_request() {
        let ctx = AuthnContextMapping::default();
        let mut req = request();
        req.force_authn = true;
        let rst = authn_request_to_rst(&req, &ctx, "ctx-9").unwrap();
        let back = rst_to_authn_request(
            &rst,
            &ctx,
            &entity("https://broker.example.org"),
            &url("https://idp.example.org/sso"),
        )
        .unwrap();
        assert_eq!(back.name_id_policy_format, req.name_id_policy_format);
        assert_eq!(back.requested_authn_context, req.requested_authn_context);
        assert!(back.force_authn);
        assert_eq!(back.acs_url, req.acs_url);
        assert_ne!(back.id, req.id);
    }

    #[test]
    fn rst_preconditions() {
        let ctx = AuthnContextMapping::default();
        let mut rst = authn_request_to_rst(&request(), &ctx, "c").unwrap();
        let issuer = entity("https://broker.example.org");
        let dest = url("https://idp.example.org/sso");
        rst.request_type = ns::WST_RENEW.into();
        assert_eq!(
            rst_to_authn_request(&rst, &ctx, &issuer, &dest),
            Err(TranslationError::UnsupportedRequestType(
                ns::WST_RENEW.into()
            ))
        );
        rst.request_type = ns::WST_ISSUE.into();
        rst.token_type = "urn:oasis:names:tc:SAML:1.0:assertion".into();
        assert!(matches!(
            rst_to_authn_request(&rst, &ctx, &issuer, &dest),
            Err(TranslationError::UnsupportedTokenType(_))
        ));
        rst.token_type = ns::SAML2_TOKEN_TYPE.into();
        rst.claims_dialect = None;
        rst.claim_types.clear();
        assert_eq!(
            rst_to_authn_request(&rst, &ctx, &issuer, &dest)
                .unwrap()
                .name_id_policy_format,
            None
        );
    }

    struct Keys {
        ip: KeyRecord,
        broker: KeyRecord,
        trusted: KeyStore,
    }

    fn keys() -> Keys {
        let ip = KeyRecord::from_seed("sts", entity("https://sts.example.org"), [1; 32]);
        let broker = KeyRecord::from_seed("broker", entity("https://broker.example.org"), [2; 32]);
        let trusted = KeyStore::new().with(&ip).unwrap();
        Keys {
            ip,
            broker,
            trusted,
        }
    }

    fn issued(k: &Keys) -> SamlAssertion {
        let a = SamlAssertion {
            id: "_as1".into(),
            issuer: entity("https://sts.example.org"),
            subject_name: "alice@example.org".into(),
            subject_name_format: ns::NAMEID_EMAIL.into(),
            authn_context_class: ns::AC_PASSWORD_PROTECTED.into(),
            authn_instant: Timestamp::from_unix(1_800_000_000),
            attributes: vec![Attribute::new(
                "http://example.org/claims/givenname",
                "Alice",
            )],
            not_before: Timestamp::from_unix(1_800_000_000),
            not_on_or_after: Timestamp::from_unix(1_800_000_300),
            signature: None,
        };
        signing::sign(&a, &k.ip).unwrap()
    }

    #[test]
    fn rstr_becomes_broker_signed_response() {
        let k = keys();
        let token = issued(&k);
        let rstr = WstRequestSecurityTokenResponse::issued("ctx", token.clone());
        let resp = rstr_to_saml_response(
            &rstr,
            &k.trusted,
            &k.broker,
            "_req1",
            &AttributeNameMapping::identity(),
        )
        .unwrap();
        assert_eq!(resp.status, StatusCode::Success);
        assert_eq!(resp.in_response_to, "_req1");
        assert_eq!(resp.issuer, k.broker.owner);
        let inner = resp.assertion.unwrap();
        assert_eq!(inner.canonical_bytes(), token.canonical_bytes());
        assert_eq!(inner.signature.unwrap().key_id, "broker");
    }

    #[test]
    fn tampered_token_rejected() {
        let k = keys();
        let mut token = issued(&k);
        token.subject_name.replace_range(0..1, "b");
        let rstr = WstRequestSecurityTokenResponse::issued("ctx", token);
        assert_eq!(
            rstr_to_saml_response(
                &rstr,
                &k.trusted,
                &k.broker,
                "_r",
                &AttributeNameMapping::identity()
            ),
            Err(TranslationError::SignatureInvalid)
        );
    }

    #[test]
    fn missing_token_and_untrusted_issuer() {
        let k = keys();
        let failed = WstRequestSecurityTokenResponse::failed("ctx", "no session");
        assert_eq!(
            rstr_to_saml_response(
                &failed,
                &k.trusted,
                &k.broker,
                "_r",
                &AttributeNameMapping::identity()
            ),
            Err(TranslationError::TokenMissing(Some("no session".into())))
        );
        let rogue = KeyRecord::from_seed("sts", entity("https://rogue.example.org"), [1; 32]);
        let rogue_store = KeyStore::new().with(&rogue).unwrap();
        let rstr = WstRequestSecurityTokenResponse::issued("ctx", issued(&k));
        assert!(matches!(
            rstr_to_saml_response(
                &rstr,
                &rogue_store,
                &k.broker,
                "_r",
                &AttributeNameMapping::identity()
            ),
            Err(TranslationError::UntrustedIssuer { .. })
        ));
        let empty = KeyStore::new();
        assert!(matches!(
            rstr_to_saml_response(
                &rstr,
                &empty,
                &k.broker,
                "_r",
                &AttributeNameMapping::identity()
            ),
            Err(TranslationError::UntrustedIssuer { .. })
        ));
    }

    #[test]
    fn response_to_rstr() {
        let k = keys();
        let token = issued(&k);
        let resp = wrap_saml_response(token.clone(), &entity("https://sts.example.org"), "_x");
        let attr_map = AttributeNameMapping::new(vec![AttributePair {
            saml: "urn:oid:2.5.4.42".into(),
            claim: "http://example.org/claims/givenname".into(),
        }])
        .unwrap();
        let rstr = saml_response_to_rstr(
            &resp,
            &k.trusted,
            &k.broker,
            "wctx-1",
            &AttributeNameMapping::identity(),
        )
        .unwrap();
        assert_eq!(rstr.token_type, "urn:oasis:names:tc:SAML:2.0:assertion");
        assert_eq!(rstr.context, "wctx-1");
        let lifetime = rstr.lifetime.unwrap();
        assert_eq!(
            (lifetime.created, lifetime.expires),
            (token.not_before, token.not_on_or_after)
        );

        // Renaming goes claim -> SAML on the WS-Trust side and back.
        let renamed = rstr_to_saml_response(
            &WstRequestSecurityTokenResponse::issued("c", token.clone()),
            &k.trusted,
            &k.broker,
            "_r",
            &attr_map,
        )
        .unwrap();
        assert_eq!(
            renamed.assertion.unwrap().attributes[0].name,
            "urn:oid:2.5.4.42"
        );

        let mut failed = resp.clone();
        failed.status = StatusCode::Requester;
        failed.assertion = None;
        assert_eq!(
            saml_response_to_rstr(
                &failed,
                &k.trusted,
                &k.broker,
                "c",
                &AttributeNameMapping::identity()
            ),
            Err(TranslationError::NonSuccessStatus(StatusCode::Requester))
        );
    }
}
