//! Namespace URIs and the fixed prefixes used when serializing.

pub const SAMLP: &str = "urn:oasis:names:tc:SAML:2.0:protocol";
pub const SAML: &str = "urn:oasis:names:tc:SAML:2.0:assertion";
pub const WST: &str = "http://docs.oasis-open.org/ws-sx/ws-trust/200512";
pub const AUTH: &str = "http://schemas.xmlsoap.org/ws/2006/12/authorization";
pub const FED: &str = "http://schemas.xmlsoap.org/ws/2006/12/federation";
pub const WSU: &str =
    "http://docs.oasis-open.org/wss/2004/01/oasis-200401-wss-wssecurity-utility-1.0.xsd";
pub const WSP: &str = "http://schemas.xmlsoap.org/ws/2004/09/policy";
pub const WSA: &str = "http://www.w3.org/2005/08/addressing";
pub const DSIG: &str = "http://www.w3.org/2000/09/xmldsig#";

/// WS-Trust request type for token issuance.
pub const WST_ISSUE: &str = "http://docs.oasis-open.org/ws-sx/ws-trust/200512/Issue";
pub const WST_RENEW: &str = "http://docs.oasis-open.org/ws-sx/ws-trust/200512/Renew";
/// Token type URI for a SAML 2.0 assertion.
pub const SAML2_TOKEN_TYPE: &str = "urn:oasis:names:tc:SAML:2.0:assertion";
/// Claims dialect for authorization claims (`auth:ClaimType`).
pub const AUTHCLAIMS_DIALECT: &str =
    "http://schemas.xmlsoap.org/ws/2006/12/authorization/authclaims";
pub const WST_STATUS_INVALID: &str =
    "http://docs.oasis-open.org/ws-sx/ws-trust/200512/status/invalid";

pub const STATUS_SUCCESS: &str = "urn:oasis:names:tc:SAML:2.0:status:Success";
pub const STATUS_REQUESTER: &str = "urn:oasis:names:tc:SAML:2.0:status:Requester";
pub const STATUS_RESPONDER: &str = "urn:oasis:names:tc:SAML:2.0:status:Responder";

pub const NAMEID_EMAIL: &str = "urn:oasis:names:tc:SAML:1.1:nameid-format:emailAddress";
pub const NAMEID_UNSPECIFIED: &str = "urn:oasis:names:tc:SAML:1.1:nameid-format:unspecified";
pub const NAMEID_PERSISTENT: &str = "urn:oasis:names:tc:SAML:2.0:nameid-format:persistent";
pub const NAMEID_TRANSIENT: &str = "urn:oasis:names:tc:SAML:2.0:nameid-format:transient";

pub const AC_PASSWORD_PROTECTED: &str =
    "urn:oasis:names:tc:SAML:2.0:ac:classes:PasswordProtectedTransport";

pub(crate) fn prefix_for(ns: &str) -> Option<&'static str> {
    Some(match ns {
        SAMLP => "samlp",
        SAML => "saml",
        WST => "wst",
        AUTH => "auth",
        FED => "fed",
        WSU => "wsu",
        WSP => "wsp",
        WSA => "wsa",
        DSIG => "ds",
        _ => return None,
    })
}

/// True for URIs of the form `urn:oasis:names:tc:SAML:<version>:nameid-format:<name>`.
pub fn is_nameid_format(uri: &str) -> bool {
    let Some(rest) = uri.strip_prefix("urn:oasis:names:tc:SAML:") else {
        return false;
    };
    match rest.split_once(":nameid-format:") {
        Some((version, name)) => !version.is_empty() && !version.contains(':') && !name.is_empty(),
        None => false,
    }
}
