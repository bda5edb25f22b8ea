//! Shared mutable state of the broker: pending correlations and seen ids.

use std::collections::HashMap;
use std::sync::Mutex;

use url::Url;

use super::BrokerError;
use crate::model::{EntityId, Timestamp};
use crate::trust_registry::Dialect;

/// What the broker remembers between the outbound request and the IP's answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelationEntry {
    /// `wctx` or `RelayState` on the outbound leg.
    pub correlation_id: String,
    /// AuthnRequest ID (flow A) or RST Context (flow B) of the origin SP.
    pub original_request_id: String,
    pub origin_sp: EntityId,
    pub origin_dialect: Dialect,
    pub acs_or_return_url: Url,
    /// `RelayState` or `wctx` the origin SP sent, echoed back to it.
    pub origin_relay: String,
    /// ID of the request the broker sent to the IP.
    pub outbound_request_id: String,
    pub target_ip: EntityId,
    pub created: Timestamp,
    pub ttl_secs: i64,
}

impl CorrelationEntry {
    pub fn expired_at(&self, now: Timestamp) -> bool {
        now >= self.created.plus_secs(self.ttl_secs)
    }
}

/// Pending correlations. Each entry is handed out at most once.
///
/// Expired entries stay for one more TTL so that late answers are reported as
/// expired rather than unknown.
#[derive(Debug)]
pub struct CorrelationStore {
    ttl_secs: i64,
    entries: Mutex<HashMap<String, CorrelationEntry>>,
}

impl CorrelationStore {
    pub fn new(ttl_secs: i64) -> Self {
        CorrelationStore {
            ttl_secs,
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("correlation lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, entry: CorrelationEntry, now: Timestamp) {
        let mut entries = self.entries.lock().expect("correlation lock");
        let horizon = self.ttl_secs;
        entries.retain(|_, e| now < e.created.plus_secs(e.ttl_secs + horizon));
        entries.insert(entry.correlation_id.clone(), entry);
    }

    /// Removes and returns the live entry for `id` created by a flow whose
    /// origin speaks `dialect`.
    pub fn consume(
        &self,
        id: &str,
        dialect: Dialect,
        now: Timestamp,
    ) -> Result<CorrelationEntry, BrokerError> {
        let mut entries = self.entries.lock().expect("correlation lock");
        match entries.get(id) {
            Some(e) if e.origin_dialect == dialect => {}
            _ => return Err(BrokerError::UnknownCorrelation(id.to_string())),
        }
        let entry = entries.remove(id).expect("entry checked above");
        if entry.expired_at(now) {
            return Err(BrokerError::ExpiredCorrelation(id.to_string()));
        }
        Ok(entry)
    }
}

/// `(issuer, id)` pairs seen within the replay window.
#[derive(Debug)]
pub struct SeenIds {
    ttl_secs: i64,
    seen: Mutex<HashMap<(EntityId, String), Timestamp>>,
}

impl SeenIds {
    pub fn new(ttl_secs: i64) -> Self {
        SeenIds {
            ttl_secs,
            seen: Mutex::new(HashMap::new()),
        }
    }

    pub fn check_and_insert(
        &self,
        issuer: &EntityId,
        id: &str,
        now: Timestamp,
    ) -> Result<(), BrokerError> {
        let mut seen = self.seen.lock().expect("seen-id lock");
        let ttl = self.ttl_secs;
        seen.retain(|_, at| now < at.plus_secs(ttl));
        let key = (issuer.clone(), id.to_string());
        if seen.contains_key(&key) {
            return Err(BrokerError::Replay {
                issuer: issuer.to_string(),
                id: id.to_string(),
            });
        }
        seen.insert(key, now);
        Ok(())
    }
}
