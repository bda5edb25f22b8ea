//! Mock identity providers and service providers speaking one dialect each.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{RawQuery, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde::{Deserialize, Serialize};
use url::Url;

use super::HarnessError;
use crate::bindings::{self, html_escape};
use crate::broker::http::{error_response, pairs, post_response, redirect_response};
use crate::config::MockUser;
use crate::model::{
    Attribute, EntityId, ProtocolDocument, SamlAssertion, SamlAuthnRequest, SamlResponse,
    StatusCode as SamlStatus, Timestamp, WstRequestSecurityToken, WstRequestSecurityTokenResponse,
};
use crate::ns;
use crate::signing::{self, KeyRecord, KeyStore};
use crate::translation::{self, claims_to_name_id_policy};
use crate::trust_registry::{Dialect, TrustTopology};

pub const SESSION_COOKIE: &str = "fb_session";
/// Marker on the page an SP shows once it has accepted a sign-in.
pub const ESTABLISHED_MARKER: &str = "<meta name=\"fedbridge-outcome\" content=\"established\">";

const SKEW_SECS: i64 = 60;
const LIFETIME_SECS: i64 = 300;

/// An identity provider's name, key and user table.
#[derive(Debug, Clone)]
pub struct MockIdentity {
    pub entity: EntityId,
    pub key: KeyRecord,
    pub users: Vec<MockUser>,
}

impl MockIdentity {
    pub fn user(&self, subject: &str) -> Option<&MockUser> {
        self.users.iter().find(|u| u.subject == subject)
    }
}

/// Signed assertion about `subject` with one authentication statement and
/// `attrs`, valid from one minute ago for five minutes.
pub fn mock_issue_assertion(
    idp: &MockIdentity,
    subject: &str,
    authn_context: &str,
    attrs: &[Attribute],
) -> Result<SamlAssertion, HarnessError> {
    mock_issue_assertion_as(idp, subject, ns::NAMEID_UNSPECIFIED, authn_context, attrs)
}

/// Like [`mock_issue_assertion`], naming the subject in `name_format`
/// (the user's e-mail address for the emailAddress format).
pub fn mock_issue_assertion_as(
    idp: &MockIdentity,
    subject: &str,
    name_format: &str,
    authn_context: &str,
    attrs: &[Attribute],
) -> Result<SamlAssertion, HarnessError> {
    let user = idp
        .user(subject)
        .ok_or_else(|| HarnessError::UnknownSubject(subject.to_string()))?;
    let now = Timestamp::now();
    let subject_name = if name_format == ns::NAMEID_EMAIL {
        user.email.clone()
    } else {
        user.subject.clone()
    };
    let assertion = SamlAssertion {
        id: translation::new_id(),
        issuer: idp.entity.clone(),
        subject_name,
        subject_name_format: name_format.to_string(),
        authn_context_class: authn_context.to_string(),
        authn_instant: now,
        attributes: attrs.to_vec(),
        not_before: now.plus_secs(-SKEW_SECS),
        not_on_or_after: now.plus_secs(LIFETIME_SECS),
        signature: None,
    };
    signing::sign(&assertion, &idp.key).map_err(|e| HarnessError::ScenarioSetup(e.to_string()))
}

/// Post-signature corruption an identity provider can be told to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tamper {
    SubjectName,
    AttributeValue,
    NotOnOrAfter,
}

impl Tamper {
    pub const ALL: [Tamper; 3] = [
        Tamper::SubjectName,
        Tamper::AttributeValue,
        Tamper::NotOnOrAfter,
    ];

    pub fn apply(self, assertion: &mut SamlAssertion) {
        match self {
            Tamper::SubjectName => assertion.subject_name.push_str(".evil"),
            Tamper::AttributeValue => match assertion.attributes.first_mut() {
                Some(a) => a.value.push_str(".evil"),
                None => assertion.attributes.push(Attribute::new("role", "admin")),
            },
            Tamper::NotOnOrAfter => {
                assertion.not_on_or_after = assertion.not_on_or_after.plus_secs(86_400)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum IdpEvent {
    Authenticated {
        subject: String,
    },
    Issued {
        assertion_id: String,
        subject: String,
        request: String,
        fresh_login: bool,
    },
}

#[derive(Debug, Clone)]
enum PendingSignin {
    Saml {
        req: SamlAuthnRequest,
        relay: Option<String>,
    },
    WsFed {
        rst: WstRequestSecurityToken,
        wctx: String,
    },
}

impl PendingSignin {
    fn force_authn(&self) -> bool {
        match self {
            PendingSignin::Saml { req, .. } => req.force_authn,
            PendingSignin::WsFed { rst, .. } => rst.force_authn,
        }
    }

    fn request_id(&self) -> &str {
        match self {
            PendingSignin::Saml { req, .. } => &req.id,
            PendingSignin::WsFed { rst, .. } => &rst.context,
        }
    }
}

/// SAML IdP (`sso` endpoint) or WS-Fed IP/STS (`signin` endpoint) with a
/// password login page at `/login`.
#[derive(Debug)]
pub struct MockIdentityProvider {
    identity: MockIdentity,
    dialect: Dialect,
    topology: TrustTopology,
    request_url: Url,
    login_url: Url,
    sessions: Mutex<HashMap<String, String>>,
    pending: Mutex<HashMap<String, PendingSignin>>,
    events: Mutex<Vec<IdpEvent>>,
    issued: Mutex<Vec<SamlAssertion>>,
    tamper: Mutex<Option<Tamper>>,
}

impl MockIdentityProvider {
    pub fn new(
        identity: MockIdentity,
        dialect: Dialect,
        topology: TrustTopology,
    ) -> Result<Self, HarnessError> {
        let kind = match dialect {
            Dialect::Saml2 => "sso",
            Dialect::WsFed11B => "signin",
            Dialect::Both => {
                return Err(HarnessError::ScenarioSetup(
                    "an IdP speaks one dialect".into(),
                ))
            }
        };
        let request_url = topology
            .entity(&identity.entity)
            .and_then(|e| e.endpoint(kind))
            .cloned()
            .ok_or_else(|| {
                HarnessError::ScenarioSetup(format!("{} has no {kind:?} endpoint", identity.entity))
            })?;
        let login_url = request_url.join("/login").expect("relative join");
        Ok(MockIdentityProvider {
            identity,
            dialect,
            topology,
            request_url,
            login_url,
            sessions: Mutex::default(),
            pending: Mutex::default(),
            events: Mutex::default(),
            issued: Mutex::default(),
            tamper: Mutex::default(),
        })
    }

    pub fn entity(&self) -> &EntityId {
        &self.identity.entity
    }

    pub fn login_url(&self) -> &Url {
        &self.login_url
    }

    pub fn events(&self) -> Vec<IdpEvent> {
        self.events.lock().expect("events lock").clone()
    }

    /// Assertions as sent, after any tampering.
    pub fn issued(&self) -> Vec<SamlAssertion> {
        self.issued.lock().expect("issued lock").clone()
    }

    pub fn set_tamper(&self, tamper: Option<Tamper>) {
        *self.tamper.lock().expect("tamper lock") = tamper;
    }

    pub fn router(self: Arc<Self>) -> Router {
        Router::new()
            .route(self.request_url.path(), get(idp_request))
            .route("/login", get(login_page).post(login_submit))
            .with_state(self)
    }

    fn session_subject(&self, headers: &HeaderMap) -> Option<String> {
        let cookie = read_cookie(headers, SESSION_COOKIE)?;
        self.sessions
            .lock()
            .expect("session lock")
            .get(&cookie)
            .cloned()
    }

    fn is_linked(&self, peer: &EntityId) -> bool {
        self.topology.linked(self.entity(), peer)
    }

    fn decode(&self, params: &[(String, String)]) -> Result<PendingSignin, (&'static str, String)> {
        match self.dialect {
            Dialect::Saml2 => {
                let (req, relay) = bindings::decode_saml_redirect(params)
                    .map_err(|e| ("BadRequest", e.to_string()))?;
                let registered = self
                    .topology
                    .entity(&req.issuer)
                    .filter(|_| self.is_linked(&req.issuer))
                    .and_then(|e| e.endpoint("acs"));
                if registered != Some(&req.acs_url) {
                    return Err((
                        "UnknownRequester",
                        format!("{} may not request here", req.issuer),
                    ));
                }
                Ok(PendingSignin::Saml { req, relay })
            }
            _ => {
                let (rst, wctx) = bindings::decode_wsfed_signin(params)
                    .map_err(|e| ("BadRequest", e.to_string()))?;
                let known = self
                    .topology
                    .find_by_endpoint("return", &rst.reply_to)
                    .is_some_and(|e| self.is_linked(&e.id));
                if !known {
                    return Err((
                        "UnknownRequester",
                        format!("{} is not a known relying party", rst.reply_to),
                    ));
                }
                if rst.request_type != ns::WST_ISSUE {
                    return Err(("UnsupportedRequestType", rst.request_type.clone()));
                }
                Ok(PendingSignin::WsFed { rst, wctx })
            }
        }
    }

    fn issue(
        &self,
        pending: &PendingSignin,
        subject: &str,
        fresh_login: bool,
    ) -> Result<Response, HarnessError> {
        let user = self
            .identity
            .user(subject)
            .ok_or_else(|| HarnessError::UnknownSubject(subject.to_string()))?;
        let attrs: Vec<Attribute> = user
            .attributes
            .iter()
            .map(|(k, v)| Attribute::new(k, v))
            .collect();
        let (format, context) = match pending {
            PendingSignin::Saml { req, .. } => (
                req.name_id_policy_format.clone(),
                req.requested_authn_context.first().cloned(),
            ),
            PendingSignin::WsFed { rst, .. } => (
                claims_to_name_id_policy(rst.claims_dialect.as_deref(), &rst.claim_types),
                None,
            ),
        };
        let mut assertion = mock_issue_assertion_as(
            &self.identity,
            subject,
            format.as_deref().unwrap_or(ns::NAMEID_UNSPECIFIED),
            context.as_deref().unwrap_or(ns::AC_PASSWORD_PROTECTED),
            &attrs,
        )?;
        if let Some(t) = *self.tamper.lock().expect("tamper lock") {
            t.apply(&mut assertion);
        }
        self.events
            .lock()
            .expect("events lock")
            .push(IdpEvent::Issued {
                assertion_id: assertion.id.clone(),
                subject: subject.to_string(),
                request: pending.request_id().to_string(),
                fresh_login,
            });
        self.issued
            .lock()
            .expect("issued lock")
            .push(assertion.clone());
        let post = match pending {
            PendingSignin::Saml { req, relay } => {
                let resp = SamlResponse {
                    id: translation::new_id(),
                    in_response_to: req.id.clone(),
                    issuer: self.identity.entity.clone(),
                    status: SamlStatus::Success,
                    assertion: Some(assertion),
                };
                bindings::encode_saml_response_post(
                    &resp,
                    relay.as_deref().unwrap_or_default(),
                    &req.acs_url,
                )
            }
            PendingSignin::WsFed { rst, wctx } => {
                let rstr = WstRequestSecurityTokenResponse::issued(rst.context.clone(), assertion);
                bindings::encode_wsfed_signin_response_post(&rstr, wctx, &rst.reply_to)
            }
        };
        Ok(post_response(&post))
    }

    fn login_form(&self, pending_id: &str) -> Response {
        Html(format!(
            "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Sign in</title></head>\n<body>\n\
             <form method=\"post\" action=\"{}\" id=\"login\">\n\
             <input type=\"hidden\" name=\"pending\" value=\"{}\"/>\n\
             <label>User <input type=\"text\" name=\"username\"/></label>\n\
             <label>Password <input type=\"password\" name=\"password\"/></label>\n\
             <button type=\"submit\">Sign in</button>\n</form>\n</body></html>\n",
            html_escape(self.login_url.as_str()),
            html_escape(pending_id)
        ))
        .into_response()
    }
}

fn read_cookie(headers: &HeaderMap, name: &str) -> Option<String> {
    headers
        .get_all(header::COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|kv| kv.trim().split_once('='))
        .find(|(k, _)| *k == name)
        .map(|(_, v)| v.to_string())
}

fn field<'a>(fields: &'a [(String, String)], name: &str) -> &'a str {
    fields
        .iter()
        .find(|(k, _)| k == name)
        .map(|(_, v)| v.as_str())
        .unwrap_or_default()
}

async fn idp_request(
    State(idp): State<Arc<MockIdentityProvider>>,
    headers: HeaderMap,
    RawQuery(query): RawQuery,
) -> Response {
    let pending = match idp.decode(&pairs(&query.unwrap_or_default())) {
        Ok(p) => p,
        Err((code, msg)) => return error_response(StatusCode::BAD_REQUEST, code, &msg),
    };
    if let Some(subject) = idp
        .session_subject(&headers)
        .filter(|_| !pending.force_authn())
    {
        return idp.issue(&pending, &subject, false).unwrap_or_else(|e| {
            error_response(StatusCode::FORBIDDEN, "UnknownSubject", &e.to_string())
        });
    }
    let pending_id = translation::new_id();
    idp.pending
        .lock()
        .expect("pending lock")
        .insert(pending_id.clone(), pending);
    idp.login_form(&pending_id)
}

async fn login_page(State(idp): State<Arc<MockIdentityProvider>>) -> Response {
    idp.login_form("")
}

async fn login_submit(State(idp): State<Arc<MockIdentityProvider>>, body: String) -> Response {
    let fields = pairs(&body);
    let (username, password) = (field(&fields, "username"), field(&fields, "password"));
    let ok = idp
        .identity
        .user(username)
        .is_some_and(|u| !u.password.is_empty() && u.password == password);
    if !ok {
        return error_response(
            StatusCode::UNAUTHORIZED,
            "LoginFailed",
            "unknown user or wrong password",
        );
    }
    idp.events
        .lock()
        .expect("events lock")
        .push(IdpEvent::Authenticated {
            subject: username.to_string(),
        });
    let session = translation::new_id();
    idp.sessions
        .lock()
        .expect("session lock")
        .insert(session.clone(), username.to_string());
    let pending_id = field(&fields, "pending");
    let mut response = if pending_id.is_empty() {
        Html("<!DOCTYPE html>\n<html><body><p>Signed in.</p></body></html>\n").into_response()
    } else {
        let pending = idp.pending.lock().expect("pending lock").remove(pending_id);
        match pending {
            Some(p) => idp.issue(&p, username, true).unwrap_or_else(|e| {
                error_response(StatusCode::FORBIDDEN, "UnknownSubject", &e.to_string())
            }),
            None => error_response(
                StatusCode::BAD_REQUEST,
                "UnknownRequest",
                "no such sign-in in progress",
            ),
        }
    };
    let cookie = format!("{SESSION_COOKIE}={session}; Path=/; HttpOnly");
    response.headers_mut().append(
        header::SET_COOKIE,
        HeaderValue::from_str(&cookie).expect("cookie is ASCII"),
    );
    response
}

/// What an SP concluded about one returning sign-in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpOutcome {
    pub request_id: String,
    pub established: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(skip)]
    pub assertion: Option<SamlAssertion>,
}

/// A SAML SP (`acs`) or WS-Fed SP (`return`) relying on a single identity
/// provider, here always the broker. Sign-in starts at `GET /start`.
#[derive(Debug)]
pub struct MockServiceProvider {
    entity: EntityId,
    dialect: Dialect,
    idp: EntityId,
    idp_url: Url,
    own_url: Url,
    trusted: RwLock<KeyStore>,
    pending: Mutex<HashMap<String, String>>,
    outcomes: Mutex<Vec<SpOutcome>>,
}

impl MockServiceProvider {
    /// `idp` is the single entity this SP redirects to; `trusted` holds its keys.
    pub fn new(
        entity: EntityId,
        dialect: Dialect,
        topology: &TrustTopology,
        idp: EntityId,
        trusted: KeyStore,
    ) -> Result<Self, HarnessError> {
        let (own_kind, idp_kind) = match dialect {
            Dialect::Saml2 => ("acs", "sso"),
            Dialect::WsFed11B => ("return", "signin"),
            Dialect::Both => {
                return Err(HarnessError::ScenarioSetup(
                    "an SP speaks one dialect".into(),
                ))
            }
        };
        let endpoint = |id: &EntityId, kind: &str| {
            topology
                .entity(id)
                .and_then(|e| e.endpoint(kind))
                .cloned()
                .ok_or_else(|| {
                    HarnessError::ScenarioSetup(format!("{id} has no {kind:?} endpoint"))
                })
        };
        Ok(MockServiceProvider {
            own_url: endpoint(&entity, own_kind)?,
            idp_url: endpoint(&idp, idp_kind)?,
            entity,
            dialect,
            idp,
            trusted: RwLock::new(trusted),
            pending: Mutex::default(),
            outcomes: Mutex::default(),
        })
    }

    pub fn entity(&self) -> &EntityId {
        &self.entity
    }

    pub fn start_url(&self, force_authn: bool) -> Url {
        let mut url = self.own_url.join("/start").expect("relative join");
        if force_authn {
            url.set_query(Some("force_authn=1"));
        }
        url
    }

    pub fn outcomes(&self) -> Vec<SpOutcome> {
        self.outcomes.lock().expect("outcome lock").clone()
    }

    pub fn outcome_for(&self, request_id: &str) -> Option<SpOutcome> {
        self.outcomes()
            .into_iter()
            .find(|o| o.request_id == request_id)
    }

    pub fn trust_store(&self) -> KeyStore {
        self.trusted.read().expect("trust lock").clone()
    }

    /// Replaces the trust store; returns the previous one.
    pub fn replace_trust(&self, store: KeyStore) -> KeyStore {
        std::mem::replace(&mut *self.trusted.write().expect("trust lock"), store)
    }

    pub fn router(self: Arc<Self>) -> Router {
        Router::new()
            .route("/start", get(sp_start))
            .route(self.own_url.path(), axum::routing::post(sp_receive))
            .with_state(self)
    }

    fn start(&self, force_authn: bool) -> Result<bindings::RedirectMessage, HarnessError> {
        let request_id = translation::new_id();
        let correlation = translation::new_id();
        let msg = match self.dialect {
            Dialect::Saml2 => {
                let req = SamlAuthnRequest {
                    id: request_id.clone(),
                    issue_instant: Timestamp::now(),
                    issuer: self.entity.clone(),
                    destination: self.idp_url.clone(),
                    acs_url: self.own_url.clone(),
                    name_id_policy_format: Some(ns::NAMEID_EMAIL.into()),
                    requested_authn_context: vec![ns::AC_PASSWORD_PROTECTED.into()],
                    force_authn,
                };
                bindings::encode_saml_redirect(&req, &correlation, &self.idp_url)
            }
            _ => {
                let rst = WstRequestSecurityToken {
                    context: request_id.clone(),
                    request_type: ns::WST_ISSUE.into(),
                    token_type: ns::SAML2_TOKEN_TYPE.into(),
                    claims_dialect: Some(ns::AUTHCLAIMS_DIALECT.into()),
                    claim_types: vec![ns::NAMEID_EMAIL.into()],
                    authentication_type: None,
                    reply_to: self.own_url.clone(),
                    force_authn,
                };
                bindings::encode_wsfed_signin(&rst, &correlation, &self.idp_url)
                    .map_err(|e| HarnessError::ScenarioSetup(e.to_string()))?
            }
        };
        self.pending
            .lock()
            .expect("pending lock")
            .insert(request_id, correlation);
        Ok(msg)
    }

    /// Checks a returning sign-in; `Err` carries the reason code.
    fn accept(&self, fields: &[(String, String)]) -> (String, Result<SamlAssertion, &'static str>) {
        let (request_id, relay, token) = match self.dialect {
            Dialect::Saml2 => match bindings::decode_saml_response_post(fields) {
                Ok((resp, relay)) => {
                    let token = match (resp.status, resp.assertion) {
                        (SamlStatus::Success, Some(a)) if resp.issuer == self.idp => Ok(a),
                        (SamlStatus::Success, _) => Err("UntrustedIssuer"),
                        _ => Err("NonSuccessStatus"),
                    };
                    (resp.in_response_to, relay.unwrap_or_default(), token)
                }
                Err(_) => return (String::new(), Err("BadResponse")),
            },
            _ => match bindings::decode_wsfed_result(fields) {
                Ok((rstr, wctx)) => {
                    let token = rstr.requested_token.ok_or("TokenMissing");
                    (rstr.context, wctx, token)
                }
                Err(_) => return (String::new(), Err("BadResponse")),
            },
        };
        let expected = self
            .pending
            .lock()
            .expect("pending lock")
            .remove(&request_id);
        let result = match expected {
            None => Err("UnknownRequest"),
            Some(r) if r != relay => Err("CorrelationMismatch"),
            Some(_) => token.and_then(|t| self.check_token(t)),
        };
        (request_id, result)
    }

    fn check_token(&self, token: SamlAssertion) -> Result<SamlAssertion, &'static str> {
        let signer = signing::verify(&token, &self.trusted.read().expect("trust lock"))
            .map_err(|_| "SignatureInvalid")?;
        // The broker relays the IP's assertion unchanged, so the issuer field
        // names the IP; trust comes from the broker's signature.
        if signer != self.idp {
            return Err("UntrustedIssuer");
        }
        if token.subject_name.is_empty() {
            return Err("MissingSubject");
        }
        if !token.is_valid_at(Timestamp::now(), SKEW_SECS) {
            return Err("AssertionExpired");
        }
        Ok(token)
    }
}

async fn sp_start(
    State(sp): State<Arc<MockServiceProvider>>,
    RawQuery(query): RawQuery,
) -> Response {
    let force = pairs(&query.unwrap_or_default())
        .iter()
        .any(|(k, v)| k == "force_authn" && (v == "1" || v == "true"));
    match sp.start(force) {
        Ok(msg) => redirect_response(&msg),
        Err(e) => error_response(
            StatusCode::INTERNAL_SERVER_ERROR,
            "SetupError",
            &e.to_string(),
        ),
    }
}

async fn sp_receive(State(sp): State<Arc<MockServiceProvider>>, body: String) -> Response {
    let (request_id, result) = sp.accept(&pairs(&body));
    let outcome = SpOutcome {
        request_id,
        established: result.is_ok(),
        reason: result.as_ref().err().map(|r| r.to_string()),
        subject: result.as_ref().ok().map(|t| t.subject_name.clone()),
        assertion: result.as_ref().ok().cloned(),
    };
    sp.outcomes.lock().expect("outcome lock").push(outcome);
    match result {
        Ok(token) => Html(format!(
            "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">{ESTABLISHED_MARKER}<title>Welcome</title></head>\n\
             <body><p>Welcome, {}.</p><pre id=\"assertion\">{}</pre></body></html>\n",
            html_escape(&token.subject_name),
            html_escape(&token.to_xml())
        ))
        .into_response(),
        Err(code) => error_response(StatusCode::FORBIDDEN, code, "sign-in rejected"),
    }
}
