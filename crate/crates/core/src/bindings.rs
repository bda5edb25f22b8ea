//! Passive-client transport for both dialects.
//!
//! Requests travel as HTTP 302 redirects with the document in a query
//! parameter; responses travel as auto-submitting HTML forms (HTTP POST).
//!
//! | leg              | SAML2                                   | WS-Federation                     |
//! |------------------|-----------------------------------------|-----------------------------------|
//! | request (302)    | `SAMLRequest` = base64(deflate(xml))    | `wa=wsignin1.0`, `wreq` = xml     |
//! | response (POST)  | `SAMLResponse` = base64(xml)            | `wa=wsignin1.0`, `wresult` = xml  |
//! | correlation      | `RelayState`                            | `wctx`                            |

use std::io::{Read, Write};
use std::sync::LazyLock;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use regex::Regex;
use thiserror::Error;
use url::Url;

use crate::error::ParseError;
use crate::model::{
    ProtocolDocument, SamlAuthnRequest, SamlResponse, WstRequestSecurityToken,
    WstRequestSecurityTokenResponse,
};

pub const SAML_REQUEST: &str = "SAMLRequest";
pub const SAML_RESPONSE: &str = "SAMLResponse";
pub const RELAY_STATE: &str = "RelayState";
pub const WA: &str = "wa";
pub const WREQ: &str = "wreq";
pub const WRESULT: &str = "wresult";
pub const WCTX: &str = "wctx";
pub const WSIGNIN: &str = "wsignin1.0";

/// Upper bound on the URL-encoded `wreq` parameter.
pub const MAX_WREQ_BYTES: usize = 6 * 1024;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BindingError {
    #[error("missing parameter {0}")]
    MissingParameter(&'static str),
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("cannot decode {param}: {detail}")]
    Decode { param: &'static str, detail: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("wresult carries no security token{}", .0.as_deref().map(|r| format!(": {r}")).unwrap_or_default())]
    TokenMissing(Option<String>),
    #[error("wreq is {size} bytes, limit is {limit}")]
    RequestTooLarge { size: usize, limit: usize },
}

/// An HTTP 302 toward `target` with `params` in the query string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedirectMessage {
    pub target: Url,
    pub params: Vec<(String, String)>,
}

impl RedirectMessage {
    /// The `Location` header value.
    pub fn location(&self) -> Url {
        let mut url = self.target.clone();
        {
            let mut q = url.query_pairs_mut();
            for (k, v) in &self.params {
                q.append_pair(k, v);
            }
        }
        url
    }

    /// Splits a received URL into the endpoint and its query parameters.
    pub fn from_location(url: &Url) -> RedirectMessage {
        let params = url
            .query_pairs()
            .map(|(k, v)| (k.into_owned(), v.into_owned()))
            .collect();
        let mut target = url.clone();
        target.set_query(None);
        RedirectMessage { target, params }
    }

    pub fn param(&self, name: &str) -> Option<&str> {
        find(&self.params, name)
    }
}

/// An HTTP POST of `fields` to `target`, delivered through the browser as an
/// auto-submitting form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostMessage {
    pub target: Url,
    pub fields: Vec<(String, String)>,
}

static FORM_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?s)<form\s+method="post"\s+action="([^"]*)">(.*?)</form>"#).unwrap()
});
static INPUT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"<input\s+type="hidden"\s+name="([^"]*)"\s+value="([^"]*)"\s*/>"#).unwrap()
});

impl PostMessage {
    pub fn field(&self, name: &str) -> Option<&str> {
        find(&self.fields, name)
    }

    /// `application/x-www-form-urlencoded` body.
    pub fn to_form_body(&self) -> String {
        url::form_urlencoded::Serializer::new(String::new())
            .extend_pairs(self.fields.iter())
            .finish()
    }

    pub fn from_form_body(target: Url, body: &str) -> PostMessage {
        let fields = url::form_urlencoded::parse(body.as_bytes())
            .map(|(k, v)| (k.into_owned(), v.into_owned()))
            .collect();
        PostMessage { target, fields }
    }

    /// A page that posts the fields as soon as the browser loads it.
    pub fn to_html(&self) -> String {
        let mut html = String::from(
            "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Continue</title></head>\n\
             <body onload=\"document.forms[0].submit()\">\n",
        );
        html.push_str(&format!(
            "<form method=\"post\" action=\"{}\">\n",
            html_escape(self.target.as_str())
        ));
        for (k, v) in &self.fields {
            html.push_str(&format!(
                "<input type=\"hidden\" name=\"{}\" value=\"{}\"/>\n",
                html_escape(k),
                html_escape(v)
            ));
        }
        html.push_str("<noscript><button type=\"submit\">Continue</button></noscript>\n</form>\n</body></html>\n");
        html
    }

    /// Reads back a page produced by [`PostMessage::to_html`].
    pub fn from_html(html: &str) -> Option<PostMessage> {
        let form = FORM_RE.captures(html)?;
        let target = Url::parse(&html_unescape(&form[1])).ok()?;
        let fields = INPUT_RE
            .captures_iter(&form[2])
            .map(|c| (html_unescape(&c[1]), html_unescape(&c[2])))
            .collect();
        Some(PostMessage { target, fields })
    }
}

pub fn is_auto_submit(html: &str) -> bool {
    html.contains("onload=\"document.forms[0].submit()\"")
}

pub fn html_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

pub fn html_unescape(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&#10;", "\n")
        .replace("&#13;", "\r")
        .replace("&amp;", "&")
}

fn find<'a>(pairs: &'a [(String, String)], name: &str) -> Option<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == name)
        .map(|(_, v)| v.as_str())
}

fn require<'a>(pairs: &'a [(String, String)], name: &'static str) -> Result<&'a str, BindingError> {
    let mut values = pairs.iter().filter(|(k, _)| k == name);
    let first = values.next().ok_or(BindingError::MissingParameter(name))?;
    if values.next().is_some() {
        return Err(BindingError::ProtocolError(format!(
            "parameter {name} repeated"
        )));
    }
    Ok(&first.1)
}

fn optional(pairs: &[(String, String)], name: &str) -> Option<String> {
    find(pairs, name)
        .filter(|v| !v.is_empty())
        .map(str::to_string)
}

fn require_wsignin(pairs: &[(String, String)]) -> Result<(), BindingError> {
    match require(pairs, WA)? {
        WSIGNIN => Ok(()),
        other => Err(BindingError::ProtocolError(format!(
            "wa must be {WSIGNIN}, got {other:?}"
        ))),
    }
}

fn deflate_base64(xml: &str) -> String {
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::default());
    enc.write_all(xml.as_bytes()).expect("write to Vec");
    STANDARD.encode(enc.finish().expect("finish deflate into Vec"))
}

fn inflate_base64(param: &'static str, value: &str) -> Result<String, BindingError> {
    let raw = STANDARD
        .decode(value.trim())
        .map_err(|e| BindingError::Decode {
            param,
            detail: format!("base64: {e}"),
        })?;
    let mut xml = String::new();
    DeflateDecoder::new(raw.as_slice())
        .read_to_string(&mut xml)
        .map_err(|e| BindingError::Decode {
            param,
            detail: format!("inflate: {e}"),
        })?;
    Ok(xml)
}

fn decode_base64(param: &'static str, value: &str) -> Result<String, BindingError> {
    let raw = STANDARD
        .decode(value.trim())
        .map_err(|e| BindingError::Decode {
            param,
            detail: format!("base64: {e}"),
        })?;
    String::from_utf8(raw).map_err(|e| BindingError::Decode {
        param,
        detail: format!("utf-8: {e}"),
    })
}

pub fn encode_saml_redirect(
    req: &SamlAuthnRequest,
    relay_state: &str,
    idp_sso_url: &Url,
) -> RedirectMessage {
    let mut params = vec![(SAML_REQUEST.to_string(), deflate_base64(&req.to_xml()))];
    if !relay_state.is_empty() {
        params.push((RELAY_STATE.to_string(), relay_state.to_string()));
    }
    RedirectMessage {
        target: idp_sso_url.clone(),
        params,
    }
}

/// Returns the request and its `RelayState` (if any).
pub fn decode_saml_redirect(
    params: &[(String, String)],
) -> Result<(SamlAuthnRequest, Option<String>), BindingError> {
    let xml = inflate_base64(SAML_REQUEST, require(params, SAML_REQUEST)?)?;
    Ok((
        SamlAuthnRequest::from_xml(&xml)?,
        optional(params, RELAY_STATE),
    ))
}

fn wreq_size(xml: &str) -> usize {
    url::form_urlencoded::byte_serialize(xml.as_bytes())
        .map(str::len)
        .sum()
}

pub fn encode_wsfed_signin(
    rst: &WstRequestSecurityToken,
    wctx: &str,
    ip_url: &Url,
) -> Result<RedirectMessage, BindingError> {
    let xml = rst.to_xml();
    let size = wreq_size(&xml);
    if size > MAX_WREQ_BYTES {
        return Err(BindingError::RequestTooLarge {
            size,
            limit: MAX_WREQ_BYTES,
        });
    }
    Ok(RedirectMessage {
        target: ip_url.clone(),
        params: vec![
            (WA.to_string(), WSIGNIN.to_string()),
            (WREQ.to_string(), xml),
            (WCTX.to_string(), wctx.to_string()),
        ],
    })
}

/// Returns the request and `wctx` (empty when absent).
pub fn decode_wsfed_signin(
    params: &[(String, String)],
) -> Result<(WstRequestSecurityToken, String), BindingError> {
    require_wsignin(params)?;
    let xml = require(params, WREQ)?;
    let size = wreq_size(xml);
    if size > MAX_WREQ_BYTES {
        return Err(BindingError::RequestTooLarge {
            size,
            limit: MAX_WREQ_BYTES,
        });
    }
    let rst = WstRequestSecurityToken::from_xml(xml)?;
    Ok((rst, find(params, WCTX).unwrap_or_default().to_string()))
}

pub fn encode_saml_response_post(
    resp: &SamlResponse,
    relay_state: &str,
    acs_url: &Url,
) -> PostMessage {
    let mut fields = vec![(SAML_RESPONSE.to_string(), STANDARD.encode(resp.to_xml()))];
    if !relay_state.is_empty() {
        fields.push((RELAY_STATE.to_string(), relay_state.to_string()));
    }
    PostMessage {
        target: acs_url.clone(),
        fields,
    }
}

pub fn decode_saml_response_post(
    fields: &[(String, String)],
) -> Result<(SamlResponse, Option<String>), BindingError> {
    let xml = decode_base64(SAML_RESPONSE, require(fields, SAML_RESPONSE)?)?;
    Ok((SamlResponse::from_xml(&xml)?, optional(fields, RELAY_STATE)))
}

pub fn encode_wsfed_signin_response_post(
    rstr: &WstRequestSecurityTokenResponse,
    wctx: &str,
    return_url: &Url,
) -> PostMessage {
    PostMessage {
        target: return_url.clone(),
        fields: vec![
            (WA.to_string(), WSIGNIN.to_string()),
            (WRESULT.to_string(), rstr.to_xml()),
            (WCTX.to_string(), wctx.to_string()),
        ],
    }
}

/// Decodes `wresult` whether it carries a token or a failure status.
pub fn decode_wsfed_result(
    fields: &[(String, String)],
) -> Result<(WstRequestSecurityTokenResponse, String), BindingError> {
    require_wsignin(fields)?;
    let rstr = WstRequestSecurityTokenResponse::from_xml(require(fields, WRESULT)?)?;
    Ok((rstr, find(fields, WCTX).unwrap_or_default().to_string()))
}

/// Like [`decode_wsfed_result`], but a result without a token is an error.
pub fn decode_wsfed_signin_response_post(
    fields: &[(String, String)],
) -> Result<(WstRequestSecurityTokenResponse, String), BindingError> {
    let (rstr, wctx) = decode_wsfed_result(fields)?;
    if rstr.requested_token.is_none() {
        return Err(BindingError::TokenMissing(rstr.status.map(|s| s.reason)));
    }
    Ok((rstr, wctx))
}
