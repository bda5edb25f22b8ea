//! Typed SAML2 and WS-Trust protocol documents.
//!
//! Every document converts to and from an [`Element`] tree. Serialization
//! writes that tree in normal form, and [`canonical_bytes`] writes the same
//! tree with every signature removed, so the signing input depends only on a
//! document's semantic fields.

mod saml;
mod wstrust;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

pub use saml::{Attribute, SamlAssertion, SamlAuthnRequest, SamlResponse, StatusCode};
pub use wstrust::{
    Lifetime, TrustStatus, WstRequestSecurityToken, WstRequestSecurityTokenResponse,
};

use crate::error::ParseError;
use crate::ns;
use crate::xml::{self, Element};

/// Absolute URI naming a federation entity (issuer, relying party, broker).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EntityId(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid entity id {value:?}: {reason}")]
pub struct InvalidEntityId {
    pub value: String,
    pub reason: String,
}

impl EntityId {
    pub fn new(value: impl Into<String>) -> Result<Self, InvalidEntityId> {
        let value = value.into();
        if value.is_empty() {
            return Err(InvalidEntityId {
                value,
                reason: "empty".into(),
            });
        }
        if value.chars().any(char::is_whitespace) {
            return Err(InvalidEntityId {
                value,
                reason: "contains whitespace".into(),
            });
        }
        match url::Url::parse(&value) {
            Ok(_) => Ok(EntityId(value)),
            Err(e) => Err(InvalidEntityId {
                value,
                reason: format!("not an absolute URI ({e})"),
            }),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for EntityId {
    type Err = InvalidEntityId;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityId::new(s)
    }
}

impl TryFrom<String> for EntityId {
    type Error = InvalidEntityId;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        EntityId::new(value)
    }
}

impl From<EntityId> for String {
    fn from(id: EntityId) -> String {
        id.0
    }
}

/// UTC instant with whole-second precision, written as `YYYY-MM-DDTHH:MM:SSZ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Timestamp(i64);

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

impl Timestamp {
    pub fn now() -> Self {
        Timestamp(Utc::now().timestamp())
    }

    pub fn from_unix(secs: i64) -> Self {
        Timestamp(secs)
    }

    pub fn unix(self) -> i64 {
        self.0
    }

    pub fn plus_secs(self, secs: i64) -> Self {
        Timestamp(self.0 + secs)
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        DateTime::from_timestamp(self.0, 0).expect("timestamp within chrono range")
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let naive = NaiveDateTime::parse_from_str(text, TIMESTAMP_FORMAT)
            .map_err(|e| format!("bad timestamp {text:?}: {e}"))?;
        let ts = Timestamp(naive.and_utc().timestamp());
        // Reject lenient forms (e.g. unpadded fields) so text round-trips.
        if ts.to_string() != text {
            return Err(format!("non-canonical timestamp {text:?}"));
        }
        Ok(ts)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_datetime().format(TIMESTAMP_FORMAT))
    }
}

impl TryFrom<String> for Timestamp {
    type Error = String;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Timestamp::parse(&value)
    }
}

impl From<Timestamp> for String {
    fn from(t: Timestamp) -> String {
        t.to_string()
    }
}

/// Detached signature over the canonical bytes of the signed element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub key_id: String,
    pub algorithm_id: String,
    pub value: Vec<u8>,
}

impl Signature {
    pub(crate) fn to_element(&self) -> Element {
        use base64::Engine;
        Element::new(ns::DSIG, "Signature")
            .child(
                Element::new(ns::DSIG, "SignedInfo").child(
                    Element::new(ns::DSIG, "SignatureMethod")
                        .attr("Algorithm", self.algorithm_id.clone()),
                ),
            )
            .child(
                Element::new(ns::DSIG, "SignatureValue")
                    .text(base64::engine::general_purpose::STANDARD.encode(&self.value)),
            )
            .child(
                Element::new(ns::DSIG, "KeyInfo")
                    .child(Element::new(ns::DSIG, "KeyName").text(self.key_id.clone())),
            )
    }

    pub(crate) fn from_element(el: &Element) -> Result<Self, ParseError> {
        use base64::Engine;
        el.expect(ns::DSIG, "Signature")?;
        let algorithm_id = el
            .require(ns::DSIG, "SignedInfo")?
            .require(ns::DSIG, "SignatureMethod")?
            .require_attr("Algorithm")?
            .to_string();
        let raw = el.require(ns::DSIG, "SignatureValue")?.text_content();
        let value = base64::engine::general_purpose::STANDARD
            .decode(raw.trim())
            .map_err(|e| ParseError::invalid("SignatureValue", format!("not base64: {e}")))?;
        let key_id = el
            .require(ns::DSIG, "KeyInfo")?
            .require(ns::DSIG, "KeyName")?
            .text_content();
        if key_id.is_empty() {
            return Err(ParseError::invalid("KeyName", "empty key name"));
        }
        Ok(Signature {
            key_id,
            algorithm_id,
            value,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DocumentKind {
    AuthnRequest,
    Response,
    Assertion,
    RequestSecurityToken,
    RequestSecurityTokenResponse,
}

impl DocumentKind {
    pub fn namespace(self) -> &'static str {
        match self {
            DocumentKind::AuthnRequest | DocumentKind::Response => ns::SAMLP,
            DocumentKind::Assertion => ns::SAML,
            DocumentKind::RequestSecurityToken | DocumentKind::RequestSecurityTokenResponse => {
                ns::WST
            }
        }
    }

    pub fn element_name(self) -> &'static str {
        match self {
            DocumentKind::AuthnRequest => "AuthnRequest",
            DocumentKind::Response => "Response",
            DocumentKind::Assertion => "Assertion",
            DocumentKind::RequestSecurityToken => "RequestSecurityToken",
            DocumentKind::RequestSecurityTokenResponse => "RequestSecurityTokenResponse",
        }
    }
}

/// A protocol document with a fixed root element and XML mapping.
pub trait ProtocolDocument: Sized {
    const KIND: DocumentKind;

    fn to_element(&self) -> Element;

    /// Builds the document from a tree whose root has already been checked.
    fn from_element(el: &Element) -> Result<Self, ParseError>;

    /// Type invariants beyond XML structure.
    fn validate(&self) -> Result<(), ParseError> {
        Ok(())
    }

    fn to_xml(&self) -> String {
        xml::write(&self.to_element())
    }

    fn from_xml(text: &str) -> Result<Self, ParseError> {
        let root = xml::parse(text)?;
        root.expect(Self::KIND.namespace(), Self::KIND.element_name())?;
        let doc = Self::from_element(&root)?;
        doc.validate()?;
        Ok(doc)
    }

    fn canonical_bytes(&self) -> Vec<u8> {
        xml::write(&self.to_element().without_signatures()).into_bytes()
    }
}

pub fn serialize<D: ProtocolDocument>(doc: &D) -> String {
    doc.to_xml()
}

pub fn parse<D: ProtocolDocument>(text: &str) -> Result<D, ParseError> {
    D::from_xml(text)
}

pub fn canonical_bytes<D: ProtocolDocument>(doc: &D) -> Vec<u8> {
    doc.canonical_bytes()
}

/// Any protocol document, for callers that pick the kind at runtime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnyDocument {
    AuthnRequest(SamlAuthnRequest),
    Response(SamlResponse),
    Assertion(SamlAssertion),
    RequestSecurityToken(WstRequestSecurityToken),
    RequestSecurityTokenResponse(WstRequestSecurityTokenResponse),
}

impl AnyDocument {
    pub fn parse(text: &str, expected: DocumentKind) -> Result<Self, ParseError> {
        Ok(match expected {
            DocumentKind::AuthnRequest => AnyDocument::AuthnRequest(parse(text)?),
            DocumentKind::Response => AnyDocument::Response(parse(text)?),
            DocumentKind::Assertion => AnyDocument::Assertion(parse(text)?),
            DocumentKind::RequestSecurityToken => AnyDocument::RequestSecurityToken(parse(text)?),
            DocumentKind::RequestSecurityTokenResponse => {
                AnyDocument::RequestSecurityTokenResponse(parse(text)?)
            }
        })
    }

    /// Detects the kind from the root element, then parses strictly.
    pub fn detect(text: &str) -> Result<Self, ParseError> {
        let root = xml::parse(text)?;
        let kind = [
            DocumentKind::AuthnRequest,
            DocumentKind::Response,
            DocumentKind::Assertion,
            DocumentKind::RequestSecurityToken,
            DocumentKind::RequestSecurityTokenResponse,
        ]
        .into_iter()
        .find(|k| k.element_name() == root.name)
        .ok_or_else(|| ParseError::invalid(&root.name, "not a supported protocol document"))?;
        AnyDocument::parse(text, kind)
    }

    pub fn kind(&self) -> DocumentKind {
        match self {
            AnyDocument::AuthnRequest(_) => DocumentKind::AuthnRequest,
            AnyDocument::Response(_) => DocumentKind::Response,
            AnyDocument::Assertion(_) => DocumentKind::Assertion,
            AnyDocument::RequestSecurityToken(_) => DocumentKind::RequestSecurityToken,
            AnyDocument::RequestSecurityTokenResponse(_) => {
                DocumentKind::RequestSecurityTokenResponse
            }
        }
    }

    pub fn to_xml(&self) -> String {
        match self {
            AnyDocument::AuthnRequest(d) => d.to_xml(),
            AnyDocument::Response(d) => d.to_xml(),
            AnyDocument::Assertion(d) => d.to_xml(),
            AnyDocument::RequestSecurityToken(d) => d.to_xml(),
            AnyDocument::RequestSecurityTokenResponse(d) => d.to_xml(),
        }
    }
}

// Shared field helpers for the document modules.

pub(crate) fn timestamp_attr(el: &Element, name: &str) -> Result<Timestamp, ParseError> {
    Timestamp::parse(el.require_attr(name)?).map_err(|e| ParseError::invalid(&el.name, e))
}

pub(crate) fn timestamp_text(el: &Element) -> Result<Timestamp, ParseError> {
    Timestamp::parse(&el.text_content()).map_err(|e| ParseError::invalid(&el.name, e))
}

pub(crate) fn entity_text(el: &Element) -> Result<EntityId, ParseError> {
    EntityId::new(el.text_content()).map_err(|e| ParseError::invalid(&el.name, e.to_string()))
}

pub(crate) fn url_value(element: &str, value: &str) -> Result<url::Url, ParseError> {
    url::Url::parse(value)
        .map_err(|e| ParseError::invalid(element, format!("bad URL {value:?}: {e}")))
}

pub(crate) fn non_empty(element: &str, what: &str, value: &str) -> Result<(), ParseError> {
    if value.is_empty() {
        Err(ParseError::invalid(element, format!("{what} is empty")))
    } else {
        Ok(())
    }
}
