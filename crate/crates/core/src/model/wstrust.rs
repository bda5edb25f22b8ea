use url::Url;

use super::{
    non_empty, timestamp_text, url_value, DocumentKind, ProtocolDocument, SamlAssertion, Timestamp,
};
use crate::error::ParseError;
use crate::ns;
use crate::xml::Element;

/// `<wst:RequestSecurityToken>`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WstRequestSecurityToken {
    pub context: String,
    pub request_type: String,
    pub token_type: String,
    pub claims_dialect: Option<String>,
    pub claim_types: Vec<String>,
    pub authentication_type: Option<String>,
    /// Address the token is requested for; responses are posted back here.
    pub reply_to: Url,
    /// Requests a fresh authentication, written as `<fed:Freshness>0</fed:Freshness>`.
    pub force_authn: bool,
}

impl ProtocolDocument for WstRequestSecurityToken {
    const KIND: DocumentKind = DocumentKind::RequestSecurityToken;

    fn to_element(&self) -> Element {
        let claims = (self.claims_dialect.is_some() || !self.claim_types.is_empty()).then(|| {
            self.claim_types.iter().fold(
                Element::new(ns::WST, "Claims").opt_attr("Dialect", self.claims_dialect.clone()),
                |c, t| c.child(Element::new(ns::AUTH, "ClaimType").attr("Uri", t.clone())),
            )
        });
        Element::new(ns::WST, "RequestSecurityToken")
            .attr("Context", self.context.clone())
            .child(Element::new(ns::WST, "RequestType").text(self.request_type.clone()))
            .child(Element::new(ns::WST, "TokenType").text(self.token_type.clone()))
            .child(
                Element::new(ns::WSP, "AppliesTo").child(
                    Element::new(ns::WSA, "EndpointReference")
                        .child(Element::new(ns::WSA, "Address").text(self.reply_to.as_str())),
                ),
            )
            .opt_child(claims)
            .opt_child(
                self.authentication_type
                    .as_ref()
                    .map(|a| Element::new(ns::WST, "AuthenticationType").text(a.clone())),
            )
            .opt_child(
                self.force_authn
                    .then(|| Element::new(ns::FED, "Freshness").text("0")),
            )
    }

    fn from_element(el: &Element) -> Result<Self, ParseError> {
        let (claims_dialect, claim_types) = match el.find(ns::WST, "Claims")? {
            Some(c) => (
                c.get_attr("Dialect").map(str::to_string),
                c.find_all(ns::AUTH, "ClaimType")
                    .into_iter()
                    .map(|t| t.and_then(|t| t.require_attr("Uri").map(str::to_string)))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            None => (None, Vec::new()),
        };
        let address = el
            .require(ns::WSP, "AppliesTo")?
            .require(ns::WSA, "EndpointReference")?
            .require(ns::WSA, "Address")?
            .text_content();
        let force_authn = match el.find(ns::FED, "Freshness")? {
            Some(f) => {
                let minutes: u32 = f.text_content().trim().parse().map_err(|_| {
                    ParseError::invalid("Freshness", "expected a non-negative integer")
                })?;
                minutes == 0
            }
            None => false,
        };
        Ok(WstRequestSecurityToken {
            context: el.get_attr("Context").unwrap_or_default().to_string(),
            request_type: el.require(ns::WST, "RequestType")?.text_content(),
            token_type: el.require(ns::WST, "TokenType")?.text_content(),
            claims_dialect,
            claim_types,
            authentication_type: el
                .find(ns::WST, "AuthenticationType")?
                .map(Element::text_content),
            reply_to: url_value("Address", &address)?,
            force_authn,
        })
    }

    fn validate(&self) -> Result<(), ParseError> {
        non_empty("RequestType", "request type", &self.request_type)?;
        non_empty("TokenType", "token type", &self.token_type)?;
        if !self.claim_types.is_empty() && self.claims_dialect.is_none() {
            return Err(ParseError::invalid(
                "Claims",
                "claim types require a Dialect",
            ));
        }
        for t in &self.claim_types {
            non_empty("ClaimType", "Uri", t)?;
        }
        if let Some(a) = &self.authentication_type {
            non_empty("AuthenticationType", "authentication type", a)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lifetime {
    pub created: Timestamp,
    pub expires: Timestamp,
}

/// `<wst:Status>` carried instead of a token when issuance failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustStatus {
    pub code: String,
    pub reason: String,
}

/// `<wst:RequestSecurityTokenResponse>`
///
/// Carries either an issued SAML assertion with its lifetime or a failure
/// status, never both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WstRequestSecurityTokenResponse {
    pub context: String,
    pub token_type: String,
    pub requested_token: Option<SamlAssertion>,
    pub lifetime: Option<Lifetime>,
    pub status: Option<TrustStatus>,
}

impl WstRequestSecurityTokenResponse {
    pub fn issued(context: impl Into<String>, token: SamlAssertion) -> Self {
        WstRequestSecurityTokenResponse {
            context: context.into(),
            token_type: ns::SAML2_TOKEN_TYPE.to_string(),
            lifetime: Some(Lifetime {
                created: token.not_before,
                expires: token.not_on_or_after,
            }),
            requested_token: Some(token),
            status: None,
        }
    }

    pub fn failed(context: impl Into<String>, reason: impl Into<String>) -> Self {
        WstRequestSecurityTokenResponse {
            context: context.into(),
            token_type: ns::SAML2_TOKEN_TYPE.to_string(),
            requested_token: None,
            lifetime: None,
            status: Some(TrustStatus {
                code: ns::WST_STATUS_INVALID.to_string(),
                reason: reason.into(),
            }),
        }
    }
}

impl ProtocolDocument for WstRequestSecurityTokenResponse {
    const KIND: DocumentKind = DocumentKind::RequestSecurityTokenResponse;

    fn to_element(&self) -> Element {
        Element::new(ns::WST, "RequestSecurityTokenResponse")
            .attr("Context", self.context.clone())
            .child(Element::new(ns::WST, "TokenType").text(self.token_type.clone()))
            .opt_child(
                self.requested_token
                    .as_ref()
                    .map(|t| Element::new(ns::WST, "RequestedSecurityToken").child(t.to_element())),
            )
            .opt_child(self.lifetime.map(|l| {
                Element::new(ns::WST, "Lifetime")
                    .child(Element::new(ns::WSU, "Created").text(l.created.to_string()))
                    .child(Element::new(ns::WSU, "Expires").text(l.expires.to_string()))
            }))
            .opt_child(self.status.as_ref().map(|s| {
                Element::new(ns::WST, "Status")
                    .child(Element::new(ns::WST, "Code").text(s.code.clone()))
                    .child(Element::new(ns::WST, "Reason").text(s.reason.clone()))
            }))
    }

    fn from_element(el: &Element) -> Result<Self, ParseError> {
        let requested_token = match el.find(ns::WST, "RequestedSecurityToken")? {
            Some(holder) => {
                let assertion = holder.require(ns::SAML, "Assertion")?;
                let token = SamlAssertion::from_element(assertion)?;
                token.validate()?;
                Some(token)
            }
            None => None,
        };
        let lifetime = match el.find(ns::WST, "Lifetime")? {
            Some(l) => Some(Lifetime {
                created: timestamp_text(l.require(ns::WSU, "Created")?)?,
                expires: timestamp_text(l.require(ns::WSU, "Expires")?)?,
            }),
            None => None,
        };
        let status = match el.find(ns::WST, "Status")? {
            Some(s) => Some(TrustStatus {
                code: s.require(ns::WST, "Code")?.text_content(),
                reason: s
                    .find(ns::WST, "Reason")?
                    .map(Element::text_content)
                    .unwrap_or_default(),
            }),
            None => None,
        };
        Ok(WstRequestSecurityTokenResponse {
            context: el.get_attr("Context").unwrap_or_default().to_string(),
            token_type: el.require(ns::WST, "TokenType")?.text_content(),
            requested_token,
            lifetime,
            status,
        })
    }

    fn validate(&self) -> Result<(), ParseError> {
        const EL: &str = "RequestSecurityTokenResponse";
        match (&self.requested_token, &self.status) {
            (Some(_), Some(_)) => {
                return Err(ParseError::invalid(
                    EL,
                    "carries both a token and a failure status",
                ))
            }
            (None, None) => {
                return Err(ParseError::invalid(
                    EL,
                    "carries neither a token nor a status",
                ))
            }
            _ => {}
        }
        if let Some(token) = &self.requested_token {
            if self.token_type != ns::SAML2_TOKEN_TYPE {
                return Err(ParseError::invalid(
                    "TokenType",
                    format!(
                        "{} does not describe the embedded SAML 2.0 assertion",
                        self.token_type
                    ),
                ));
            }
            if self.lifetime.is_none() {
                return Err(ParseError::invalid(EL, "issued token requires a Lifetime"));
            }
            token.validate()?;
        }
        if let Some(l) = &self.lifetime {
            if l.created > l.expires {
                return Err(ParseError::invalid("Lifetime", "Created is after Expires"));
            }
        }
        Ok(())
    }
}
