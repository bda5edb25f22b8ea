//! The broker: presents itself as an identity provider to each SP and as a
//! relying party to each IP, translating, re-signing and relaying between the
//! two dialects.
//!
//! Flow A: SAML SP → `/saml/sso` → WS-Fed IP → `/wsfed/return` → SAML SP.
//! Flow B: WS-Fed SP → `/wsfed/signin` → SAML IdP → `/saml/acs` → WS-Fed SP.
//!
//! [`Broker`] holds the protocol logic; [`http`] exposes it over axum.

pub mod http;
mod state;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::bindings::{self, BindingError, PostMessage, RedirectMessage};
use crate::error::ParseError;
use crate::model::{
    EntityId, SamlAssertion, SamlResponse, StatusCode, Timestamp, WstRequestSecurityTokenResponse,
};
use crate::ns;
use crate::pseudonym::{PseudonymError, PseudonymRegistry};
use crate::signing::{self, KeyRecord, KeyStore};
use crate::translation::{
    self, AttributeNameMapping, AuthnContextMapping, Direction, SubjectRewrite, TranslationError,
};
use crate::trust_registry::{Dialect, EntityRole, FederationEntity, TopologyError, TrustTopology};

pub use state::{CorrelationEntry, CorrelationStore, SeenIds};

/// Source of the current time, replaceable in tests.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Timestamp::now()
    }
}

/// A clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock(std::sync::atomic::AtomicI64);

impl ManualClock {
    pub fn new(start: Timestamp) -> Self {
        ManualClock(std::sync::atomic::AtomicI64::new(start.unix()))
    }

    pub fn advance(&self, secs: i64) {
        self.0.fetch_add(secs, std::sync::atomic::Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        Timestamp::from_unix(self.0.load(std::sync::atomic::Ordering::SeqCst))
    }
}

/// How the broker names the subject toward a given SP.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudonymMode {
    #[default]
    None,
    Persistent,
    Transient,
}

#[derive(Debug, Clone)]
pub struct BrokerSettings {
    pub entity_id: EntityId,
    pub correlation_ttl_secs: i64,
    pub replay_ttl_secs: i64,
    pub clock_skew_secs: i64,
    pub authn_context_map: AuthnContextMapping,
    pub attribute_map: AttributeNameMapping,
    pub pseudonym_modes: BTreeMap<EntityId, PseudonymMode>,
    pub master_secret: Vec<u8>,
}

impl BrokerSettings {
    pub fn new(entity_id: EntityId) -> Self {
        BrokerSettings {
            entity_id,
            correlation_ttl_secs: 300,
            replay_ttl_secs: 300,
            clock_skew_secs: 60,
            authn_context_map: AuthnContextMapping::default(),
            attribute_map: AttributeNameMapping::identity(),
            pseudonym_modes: BTreeMap::new(),
            master_secret: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("{0} is not a registered service provider of this broker")]
    UnknownIssuer(String),
    #[error("{0}")]
    Topology(#[from] TopologyError),
    #[error("{0}")]
    Binding(BindingError),
    #[error("{0}")]
    Translation(TranslationError),
    #[error("request {id} from {issuer} was already seen")]
    Replay { issuer: String, id: String },
    #[error("no pending request matches {0:?}")]
    UnknownCorrelation(String),
    #[error("pending request {0:?} has expired")]
    ExpiredCorrelation(String),
    #[error("{0}")]
    EndpointMismatch(String),
    #[error("assertion from {actual} where {expected} was asked")]
    UnexpectedIssuer { expected: String, actual: String },
    #[error("assertion is outside its validity window")]
    AssertionExpired,
    #[error(transparent)]
    Pseudonym(#[from] PseudonymError),
}

impl From<BindingError> for BrokerError {
    fn from(e: BindingError) -> Self {
        BrokerError::Binding(e)
    }
}

impl From<TranslationError> for BrokerError {
    fn from(e: TranslationError) -> Self {
        BrokerError::Translation(e)
    }
}

impl From<ParseError> for BrokerError {
    fn from(e: ParseError) -> Self {
        BrokerError::Binding(BindingError::Parse(e))
    }
}

impl BrokerError {
    /// Machine-readable error name, sent in the `X-Fedbridge-Error` header.
    pub fn code(&self) -> &'static str {
        match self {
            BrokerError::UnknownIssuer(_) => "UnknownIssuer",
            BrokerError::Topology(t) => match t {
                TopologyError::NoTrustPath { .. } => "NoTrustPath",
                TopologyError::AmbiguousTopology(_) => "AmbiguousTopology",
                TopologyError::UnknownEntity(_) => "UnknownIssuer",
                _ => "TopologyError",
            },
            BrokerError::Binding(b) => match b {
                BindingError::MissingParameter(_) | BindingError::ProtocolError(_) => {
                    "ProtocolError"
                }
                BindingError::Decode { .. } => "DecodeError",
                BindingError::Parse(ParseError::MalformedXml { .. }) => "MalformedXml",
                BindingError::Parse(ParseError::WrongNamespace { .. }) => "WrongNamespace",
                BindingError::Parse(ParseError::InvariantViolation { .. }) => "InvariantViolation",
                BindingError::TokenMissing(_) => "TokenMissing",
                BindingError::RequestTooLarge { .. } => "RequestTooLarge",
            },
            BrokerError::Translation(t) => match t {
                TranslationError::UnmappedAuthnContext(_) => "UnmappedAuthnContext",
                TranslationError::UnsupportedRequestType(_) => "UnsupportedRequestType",
                TranslationError::UnsupportedTokenType(_) => "UnsupportedTokenType",
                TranslationError::SignatureInvalid => "SignatureInvalid",
                TranslationError::TokenMissing(_) => "TokenMissing",
                TranslationError::UntrustedIssuer { .. } => "UntrustedIssuer",
                TranslationError::NonSuccessStatus(_) => "NonSuccessStatus",
                TranslationError::Signing(_) => "SigningError",
            },
            BrokerError::Replay { .. } => "Replay",
            BrokerError::UnknownCorrelation(_) => "UnknownCorrelation",
            BrokerError::ExpiredCorrelation(_) => "ExpiredCorrelation",
            BrokerError::EndpointMismatch(_) => "EndpointMismatch",
            BrokerError::UnexpectedIssuer { .. } => "UntrustedIssuer",
            BrokerError::AssertionExpired => "AssertionExpired",
            BrokerError::Pseudonym(_) => "PseudonymError",
        }
    }
}

pub struct Broker {
    settings: BrokerSettings,
    topology: TrustTopology,
    trusted: KeyStore,
    signer: KeyRecord,
    pseudonyms: Arc<PseudonymRegistry>,
    correlations: CorrelationStore,
    seen: SeenIds,
    clock: Arc<dyn Clock>,
    sso_url: Url,
    acs_url: Url,
    return_url: Url,
}

impl std::fmt::Debug for Broker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Broker")
            .field("entity_id", &self.settings.entity_id)
            .field("pending", &self.correlations.len())
            .finish_non_exhaustive()
    }
}

impl Broker {
    /// `trusted` holds the verifying keys of the IPs; `signer` is the broker's
    /// private key. The broker entity in `topology` must declare `sso`, `acs`,
    /// `signin` and `return` endpoints.
    pub fn new(
        settings: BrokerSettings,
        topology: TrustTopology,
        trusted: KeyStore,
        signer: KeyRecord,
    ) -> Result<Broker, BrokerError> {
        let me = topology
            .entity(&settings.entity_id)
            .filter(|e| e.role == EntityRole::Broker)
            .ok_or_else(|| BrokerError::UnknownIssuer(settings.entity_id.to_string()))?;
        let endpoint = |kind: &str| {
            me.endpoint(kind).cloned().ok_or_else(|| {
                BrokerError::EndpointMismatch(format!("broker has no {kind:?} endpoint"))
            })
        };
        endpoint("signin")?;
        Ok(Broker {
            sso_url: endpoint("sso")?,
            acs_url: endpoint("acs")?,
            return_url: endpoint("return")?,
            correlations: CorrelationStore::new(settings.correlation_ttl_secs),
            seen: SeenIds::new(settings.replay_ttl_secs),
            settings,
            topology,
            trusted,
            signer,
            pseudonyms: Arc::new(PseudonymRegistry::new()),
            clock: Arc::new(SystemClock),
        })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_pseudonyms(mut self, registry: Arc<PseudonymRegistry>) -> Self {
        self.pseudonyms = registry;
        self
    }

    pub fn id(&self) -> &EntityId {
        &self.settings.entity_id
    }

    pub fn pseudonyms(&self) -> &Arc<PseudonymRegistry> {
        &self.pseudonyms
    }

    pub fn pending(&self) -> usize {
        self.correlations.len()
    }

    fn registered_sp(
        &self,
        id: &EntityId,
        dialect: Dialect,
    ) -> Result<&FederationEntity, BrokerError> {
        self.topology
            .entity(id)
            .filter(|e| e.role == EntityRole::ServiceProvider && e.dialect == dialect)
            .filter(|e| self.topology.linked(&e.id, self.id()))
            .ok_or_else(|| BrokerError::UnknownIssuer(id.to_string()))
    }

    /// The IP of the opposite dialect this broker relays `sp` to.
    fn target_ip(
        &self,
        sp: &FederationEntity,
        endpoint: &str,
    ) -> Result<(EntityId, Url), BrokerError> {
        let ip = self
            .topology
            .brokered_ips(&sp.id, self.id())
            .into_iter()
            .next()
            .ok_or_else(|| TopologyError::NoTrustPath {
                sp: sp.id.to_string(),
                ip: "any identity provider".into(),
            })?;
        let url = ip.endpoint(endpoint).cloned().ok_or_else(|| {
            BrokerError::EndpointMismatch(format!("{} has no {endpoint:?} endpoint", ip.id))
        })?;
        Ok((ip.id.clone(), url))
    }

    fn subject_rewrite(
        &self,
        assertion: &SamlAssertion,
        sp: &EntityId,
        session: &str,
    ) -> Result<Option<SubjectRewrite>, BrokerError> {
        let mode = self
            .settings
            .pseudonym_modes
            .get(sp)
            .copied()
            .unwrap_or_default();
        Ok(match mode {
            PseudonymMode::None => None,
            PseudonymMode::Persistent => {
                let record = self.pseudonyms.register_persistent(
                    &assertion.subject_name,
                    sp,
                    &self.settings.master_secret,
                )?;
                Some(SubjectRewrite {
                    name: record.pseudonym,
                    format: ns::NAMEID_PERSISTENT.into(),
                })
            }
            PseudonymMode::Transient => {
                if assertion.subject_name.is_empty() {
                    return Err(PseudonymError::EmptySubject.into());
                }
                let record = self
                    .pseudonyms
                    .issue_transient(&assertion.subject_name, sp, session);
                Some(SubjectRewrite {
                    name: record.pseudonym,
                    format: ns::NAMEID_TRANSIENT.into(),
                })
            }
        })
    }

    /// Verifies the IP's assertion, checks it answers this correlation and is
    /// current, then re-signs it for the origin SP.
    fn relay(
        &self,
        assertion: &SamlAssertion,
        entry: &CorrelationEntry,
        direction: Direction,
        now: Timestamp,
    ) -> Result<SamlAssertion, BrokerError> {
        signing::verify(assertion, &self.trusted)
            .map_err(|e| TranslationError::from_verify(e, &assertion.issuer))?;
        if assertion.issuer != entry.target_ip {
            return Err(BrokerError::UnexpectedIssuer {
                expected: entry.target_ip.to_string(),
                actual: assertion.issuer.to_string(),
            });
        }
        if !assertion.is_valid_at(now, self.settings.clock_skew_secs) {
            return Err(BrokerError::AssertionExpired);
        }
        self.seen
            .check_and_insert(&assertion.issuer, &assertion.id, now)?;
        let rewrite = self.subject_rewrite(assertion, &entry.origin_sp, &entry.correlation_id)?;
        Ok(translation::relay_assertion(
            assertion,
            &self.trusted,
            &self.signer,
            &self.settings.attribute_map,
            direction,
            rewrite.as_ref(),
        )?)
    }

    /// `GET /saml/sso`: SAML AuthnRequest in, WS-Fed sign-in request out.
    pub fn handle_saml_sso(
        &self,
        params: &[(String, String)],
    ) -> Result<RedirectMessage, BrokerError> {
        let now = self.clock.now();
        let (req, relay_state) = bindings::decode_saml_redirect(params)?;
        let sp = self.registered_sp(&req.issuer, Dialect::Saml2)?;
        if sp.endpoint("acs") != Some(&req.acs_url) {
            return Err(BrokerError::EndpointMismatch(format!(
                "{} is not the registered assertion consumer of {}",
                req.acs_url, sp.id
            )));
        }
        if req.destination != self.sso_url {
            return Err(BrokerError::EndpointMismatch(format!(
                "request is addressed to {}",
                req.destination
            )));
        }
        let (ip, signin) = self.target_ip(sp, "signin")?;
        let correlation_id = translation::new_id();
        let mut rst = translation::authn_request_to_rst(
            &req,
            &self.settings.authn_context_map,
            &correlation_id,
        )?;
        rst.reply_to = self.return_url.clone();
        let redirect = bindings::encode_wsfed_signin(&rst, &correlation_id, &signin)?;
        self.seen.check_and_insert(&req.issuer, &req.id, now)?;
        self.correlations.insert(
            CorrelationEntry {
                correlation_id: correlation_id.clone(),
                original_request_id: req.id.clone(),
                origin_sp: sp.id.clone(),
                origin_dialect: Dialect::Saml2,
                acs_or_return_url: req.acs_url.clone(),
                origin_relay: relay_state.unwrap_or_default(),
                outbound_request_id: correlation_id.clone(),
                target_ip: ip.clone(),
                created: now,
                ttl_secs: self.settings.correlation_ttl_secs,
            },
            now,
        );
        tracing::info!(correlation = %correlation_id, leg = "saml_sso", direction = "saml->wsfed", sp = %sp.id, ip = %ip, outcome = "redirect");
        Ok(redirect)
    }

    /// `POST /wsfed/return`: WS-Fed result in, SAML Response out.
    pub fn handle_wsfed_return(
        &self,
        fields: &[(String, String)],
    ) -> Result<PostMessage, BrokerError> {
        let now = self.clock.now();
        let (rstr, wctx) = bindings::decode_wsfed_result(fields)?;
        let entry = self.correlations.consume(&wctx, Dialect::Saml2, now)?;
        let response = match &rstr.requested_token {
            None => {
                let reason = rstr
                    .status
                    .as_ref()
                    .map(|s| s.reason.as_str())
                    .unwrap_or_default();
                tracing::info!(correlation = %entry.correlation_id, leg = "wsfed_return", direction = "wsfed->saml", outcome = "relayed_failure", reason);
                SamlResponse {
                    id: translation::new_id(),
                    in_response_to: entry.original_request_id.clone(),
                    issuer: self.id().clone(),
                    status: StatusCode::Responder,
                    assertion: None,
                }
            }
            Some(_) => {
                let token = translation::extract_token(&rstr)?;
                let relayed = self.relay(token, &entry, Direction::WstToSaml, now)?;
                tracing::info!(correlation = %entry.correlation_id, leg = "wsfed_return", direction = "wsfed->saml", outcome = "relayed_token");
                translation::wrap_saml_response(relayed, self.id(), &entry.original_request_id)
            }
        };
        Ok(bindings::encode_saml_response_post(
            &response,
            &entry.origin_relay,
            &entry.acs_or_return_url,
        ))
    }

    /// `GET /wsfed/signin`: WS-Fed sign-in request in, SAML AuthnRequest out.
    pub fn handle_wsfed_signin(
        &self,
        params: &[(String, String)],
    ) -> Result<RedirectMessage, BrokerError> {
        let now = self.clock.now();
        let (rst, wctx) = bindings::decode_wsfed_signin(params)?;
        let sp = self
            .topology
            .find_by_endpoint("return", &rst.reply_to)
            .filter(|e| e.role == EntityRole::ServiceProvider)
            .ok_or_else(|| BrokerError::UnknownIssuer(rst.reply_to.to_string()))?;
        let sp = self.registered_sp(&sp.id, Dialect::WsFed11B)?;
        let (ip, sso) = self.target_ip(sp, "sso")?;
        let mut req = translation::rst_to_authn_request(
            &rst,
            &self.settings.authn_context_map,
            self.id(),
            &sso,
        )?;
        req.acs_url = self.acs_url.clone();
        let correlation_id = translation::new_id();
        let redirect = bindings::encode_saml_redirect(&req, &correlation_id, &sso);
        if !rst.context.is_empty() {
            self.seen.check_and_insert(&sp.id, &rst.context, now)?;
        }
        self.correlations.insert(
            CorrelationEntry {
                correlation_id: correlation_id.clone(),
                original_request_id: rst.context.clone(),
                origin_sp: sp.id.clone(),
                origin_dialect: Dialect::WsFed11B,
                acs_or_return_url: rst.reply_to.clone(),
                origin_relay: wctx,
                outbound_request_id: req.id.clone(),
                target_ip: ip.clone(),
                created: now,
                ttl_secs: self.settings.correlation_ttl_secs,
            },
            now,
        );
        tracing::info!(correlation = %correlation_id, leg = "wsfed_signin", direction = "wsfed->saml", sp = %sp.id, ip = %ip, outcome = "redirect");
        Ok(redirect)
    }

    /// `POST /saml/acs`: SAML Response in, WS-Fed result out.
    pub fn handle_saml_acs(&self, fields: &[(String, String)]) -> Result<PostMessage, BrokerError> {
        let now = self.clock.now();
        let (resp, relay_state) = bindings::decode_saml_response_post(fields)?;
        let relay_state = relay_state.unwrap_or_default();
        let entry = self
            .correlations
            .consume(&relay_state, Dialect::WsFed11B, now)?;
        if resp.in_response_to != entry.outbound_request_id {
            return Err(BrokerError::UnknownCorrelation(resp.in_response_to.clone()));
        }
        let rstr = if resp.status != StatusCode::Success {
            tracing::info!(correlation = %entry.correlation_id, leg = "saml_acs", direction = "saml->wsfed", outcome = "relayed_failure", status = ?resp.status);
            WstRequestSecurityTokenResponse::failed(
                entry.original_request_id.clone(),
                format!("identity provider answered {}", resp.status.uri()),
            )
        } else {
            let assertion = translation::extract_assertion(&resp)?;
            let relayed = self.relay(assertion, &entry, Direction::SamlToWst, now)?;
            tracing::info!(correlation = %entry.correlation_id, leg = "saml_acs", direction = "saml->wsfed", outcome = "relayed_token");
            WstRequestSecurityTokenResponse::issued(entry.original_request_id.clone(), relayed)
        };
        Ok(bindings::encode_wsfed_signin_response_post(
            &rstr,
            &entry.origin_relay,
            &entry.acs_or_return_url,
        ))
    }
}
