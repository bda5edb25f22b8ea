use serde::{Deserialize, Serialize};
use url::Url;

use super::{
    entity_text, non_empty, timestamp_attr, url_value, DocumentKind, EntityId, ProtocolDocument,
    Signature, Timestamp,
};
use crate::error::ParseError;
use crate::ns;
use crate::xml::Element;

/// `<samlp:AuthnRequest>`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamlAuthnRequest {
    pub id: String,
    pub issue_instant: Timestamp,
    pub issuer: EntityId,
    pub destination: Url,
    pub acs_url: Url,
    pub name_id_policy_format: Option<String>,
    /// Requested context classes in preference order; empty means none requested.
    pub requested_authn_context: Vec<String>,
    pub force_authn: bool,
}

impl ProtocolDocument for SamlAuthnRequest {
    const KIND: DocumentKind = DocumentKind::AuthnRequest;

    fn to_element(&self) -> Element {
        let policy = self.name_id_policy_format.as_ref().map(|f| {
            Element::new(ns::SAMLP, "NameIDPolicy")
                .attr("AllowCreate", "true")
                .attr("Format", f.clone())
        });
        let context = (!self.requested_authn_context.is_empty()).then(|| {
            self.requested_authn_context.iter().fold(
                Element::new(ns::SAMLP, "RequestedAuthnContext").attr("Comparison", "exact"),
                |el, class| {
                    el.child(Element::new(ns::SAML, "AuthnContextClassRef").text(class.clone()))
                },
            )
        });
        Element::new(ns::SAMLP, "AuthnRequest")
            .attr("ID", self.id.clone())
            .attr("Version", "2.0")
            .attr("IssueInstant", self.issue_instant.to_string())
            .attr("Destination", self.destination.as_str())
            .attr("AssertionConsumerServiceURL", self.acs_url.as_str())
            .attr(
                "ProtocolBinding",
                "urn:oasis:names:tc:SAML:2.0:bindings:HTTP-POST",
            )
            .opt_attr("ForceAuthn", self.force_authn.then_some("true"))
            .child(Element::new(ns::SAML, "Issuer").text(self.issuer.as_str()))
            .opt_child(policy)
            .opt_child(context)
    }

    fn from_element(el: &Element) -> Result<Self, ParseError> {
        check_version(el)?;
        let force_authn = match el.get_attr("ForceAuthn") {
            None | Some("false") | Some("0") => false,
            Some("true") | Some("1") => true,
            Some(other) => {
                return Err(ParseError::invalid(
                    "AuthnRequest",
                    format!("ForceAuthn must be boolean, got {other:?}"),
                ))
            }
        };
        let name_id_policy_format = match el.find(ns::SAMLP, "NameIDPolicy")? {
            Some(p) => p.get_attr("Format").map(str::to_string),
            None => None,
        };
        let requested_authn_context = match el.find(ns::SAMLP, "RequestedAuthnContext")? {
            Some(ctx) => ctx
                .find_all(ns::SAML, "AuthnContextClassRef")
                .into_iter()
                .map(|r| r.map(|e| e.text_content()))
                .collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        Ok(SamlAuthnRequest {
            id: el.require_attr("ID")?.to_string(),
            issue_instant: timestamp_attr(el, "IssueInstant")?,
            issuer: entity_text(el.require(ns::SAML, "Issuer")?)?,
            destination: url_value("AuthnRequest", el.require_attr("Destination")?)?,
            acs_url: url_value(
                "AuthnRequest",
                el.require_attr("AssertionConsumerServiceURL")?,
            )?,
            name_id_policy_format,
            requested_authn_context,
            force_authn,
        })
    }

    fn validate(&self) -> Result<(), ParseError> {
        check_id("AuthnRequest", &self.id)?;
        if let Some(f) = &self.name_id_policy_format {
            non_empty("NameIDPolicy", "Format", f)?;
        }
        for class in &self.requested_authn_context {
            non_empty("AuthnContextClassRef", "context class", class)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub value: String,
}

impl Attribute {
    pub fn new(name: impl Into<String>, value: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            value: value.into(),
        }
    }
}

/// `<saml:Assertion>`: statements made by an issuer about a subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamlAssertion {
    pub id: String,
    pub issuer: EntityId,
    pub subject_name: String,
    pub subject_name_format: String,
    pub authn_context_class: String,
    pub authn_instant: Timestamp,
    pub attributes: Vec<Attribute>,
    pub not_before: Timestamp,
    pub not_on_or_after: Timestamp,
    pub signature: Option<Signature>,
}

impl SamlAssertion {
    /// True when `now` lies inside the validity window widened by `skew_secs`.
    pub fn is_valid_at(&self, now: Timestamp, skew_secs: i64) -> bool {
        self.not_before.plus_secs(-skew_secs) <= now
            && now < self.not_on_or_after.plus_secs(skew_secs)
    }
}

impl ProtocolDocument for SamlAssertion {
    const KIND: DocumentKind = DocumentKind::Assertion;

    fn to_element(&self) -> Element {
        let attributes = (!self.attributes.is_empty()).then(|| {
            self.attributes
                .iter()
                .fold(Element::new(ns::SAML, "AttributeStatement"), |st, a| {
                    st.child(
                        Element::new(ns::SAML, "Attribute")
                            .attr("Name", a.name.clone())
                            .child(Element::new(ns::SAML, "AttributeValue").text(a.value.clone())),
                    )
                })
        });
        Element::new(ns::SAML, "Assertion")
            .attr("ID", self.id.clone())
            .attr("Version", "2.0")
            .child(Element::new(ns::SAML, "Issuer").text(self.issuer.as_str()))
            .opt_child(self.signature.as_ref().map(Signature::to_element))
            .child(
                Element::new(ns::SAML, "Subject").child(
                    Element::new(ns::SAML, "NameID")
                        .attr("Format", self.subject_name_format.clone())
                        .text(self.subject_name.clone()),
                ),
            )
            .child(
                Element::new(ns::SAML, "Conditions")
                    .attr("NotBefore", self.not_before.to_string())
                    .attr("NotOnOrAfter", self.not_on_or_after.to_string()),
            )
            .child(
                Element::new(ns::SAML, "AuthnStatement")
                    .attr("AuthnInstant", self.authn_instant.to_string())
                    .child(
                        Element::new(ns::SAML, "AuthnContext").child(
                            Element::new(ns::SAML, "AuthnContextClassRef")
                                .text(self.authn_context_class.clone()),
                        ),
                    ),
            )
            .opt_child(attributes)
    }

    fn from_element(el: &Element) -> Result<Self, ParseError> {
        check_version(el)?;
        let name_id = el
            .require(ns::SAML, "Subject")?
            .require(ns::SAML, "NameID")?;
        let conditions = el.require(ns::SAML, "Conditions")?;
        let authn = el.require(ns::SAML, "AuthnStatement")?;
        let authn_context_class = authn
            .require(ns::SAML, "AuthnContext")?
            .require(ns::SAML, "AuthnContextClassRef")?
            .text_content();
        let mut attributes = Vec::new();
        for statement in el.find_all(ns::SAML, "AttributeStatement") {
            for attr in statement?.find_all(ns::SAML, "Attribute") {
                let attr = attr?;
                let name = attr.require_attr("Name")?.to_string();
                for value in attr.find_all(ns::SAML, "AttributeValue") {
                    attributes.push(Attribute {
                        name: name.clone(),
                        value: value?.text_content(),
                    });
                }
            }
        }
        Ok(SamlAssertion {
            id: el.require_attr("ID")?.to_string(),
            issuer: entity_text(el.require(ns::SAML, "Issuer")?)?,
            subject_name: name_id.text_content(),
            subject_name_format: name_id
                .get_attr("Format")
                .unwrap_or(ns::NAMEID_UNSPECIFIED)
                .to_string(),
            authn_context_class,
            authn_instant: timestamp_attr(authn, "AuthnInstant")?,
            attributes,
            not_before: timestamp_attr(conditions, "NotBefore")?,
            not_on_or_after: timestamp_attr(conditions, "NotOnOrAfter")?,
            signature: el
                .find(ns::DSIG, "Signature")?
                .map(Signature::from_element)
                .transpose()?,
        })
    }

    fn validate(&self) -> Result<(), ParseError> {
        check_id("Assertion", &self.id)?;
        non_empty("NameID", "subject name", &self.subject_name)?;
        non_empty("NameID", "Format", &self.subject_name_format)?;
        non_empty(
            "AuthnContextClassRef",
            "context class",
            &self.authn_context_class,
        )?;
        for a in &self.attributes {
            non_empty("Attribute", "Name", &a.name)?;
        }
        if self.not_before >= self.not_on_or_after {
            return Err(ParseError::invalid(
                "Conditions",
                "NotBefore must precede NotOnOrAfter",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatusCode {
    Success,
    Requester,
    Responder,
}

impl StatusCode {
    pub fn uri(self) -> &'static str {
        match self {
            StatusCode::Success => ns::STATUS_SUCCESS,
            StatusCode::Requester => ns::STATUS_REQUESTER,
            StatusCode::Responder => ns::STATUS_RESPONDER,
        }
    }

    pub fn from_uri(uri: &str) -> Option<Self> {
        [
            StatusCode::Success,
            StatusCode::Requester,
            StatusCode::Responder,
        ]
        .into_iter()
        .find(|s| s.uri() == uri)
    }
}

/// `<samlp:Response>`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamlResponse {
    pub id: String,
    pub in_response_to: String,
    pub issuer: EntityId,
    pub status: StatusCode,
    pub assertion: Option<SamlAssertion>,
}

impl ProtocolDocument for SamlResponse {
    const KIND: DocumentKind = DocumentKind::Response;

    fn to_element(&self) -> Element {
        Element::new(ns::SAMLP, "Response")
            .attr("ID", self.id.clone())
            .attr("InResponseTo", self.in_response_to.clone())
            .attr("Version", "2.0")
            .child(Element::new(ns::SAML, "Issuer").text(self.issuer.as_str()))
            .child(
                Element::new(ns::SAMLP, "Status")
                    .child(Element::new(ns::SAMLP, "StatusCode").attr("Value", self.status.uri())),
            )
            .opt_child(self.assertion.as_ref().map(SamlAssertion::to_element))
    }

    fn from_element(el: &Element) -> Result<Self, ParseError> {
        check_version(el)?;
        let code = el
            .require(ns::SAMLP, "Status")?
            .require(ns::SAMLP, "StatusCode")?
            .require_attr("Value")?;
        let status = StatusCode::from_uri(code).ok_or_else(|| {
            ParseError::invalid("StatusCode", format!("unsupported status {code}"))
        })?;
        let assertion = match el.find(ns::SAML, "Assertion")? {
            Some(a) => {
                let a = SamlAssertion::from_element(a)?;
                a.validate()?;
                Some(a)
            }
            None => None,
        };
        Ok(SamlResponse {
            id: el.require_attr("ID")?.to_string(),
            in_response_to: el.require_attr("InResponseTo")?.to_string(),
            issuer: entity_text(el.require(ns::SAML, "Issuer")?)?,
            status,
            assertion,
        })
    }

    fn validate(&self) -> Result<(), ParseError> {
        check_id("Response", &self.id)?;
        match (self.status, &self.assertion) {
            (StatusCode::Success, None) => Err(ParseError::invalid(
                "Response",
                "Success status requires an assertion",
            )),
            (StatusCode::Requester | StatusCode::Responder, Some(_)) => Err(ParseError::invalid(
                "Response",
                "non-Success status must not carry an assertion",
            )),
            (_, Some(a)) => a.validate(),
            _ => Ok(()),
        }
    }
}

fn check_version(el: &Element) -> Result<(), ParseError> {
    match el.get_attr("Version") {
        Some("2.0") => Ok(()),
        Some(v) => Err(ParseError::invalid(
            &el.name,
            format!("unsupported Version {v}"),
        )),
        None => Err(ParseError::invalid(&el.name, "missing attribute Version")),
    }
}

fn check_id(element: &str, id: &str) -> Result<(), ParseError> {
    non_empty(element, "ID", id)?;
    if id.chars().any(char::is_whitespace) {
        return Err(ParseError::invalid(element, "ID contains whitespace"));
    }
    Ok(())
}
