//! Circles of trust and who bears the interoperability work for an SP/IP pair.
//!
//! With a direct trust link, the hub of the circle translates: an IP linked to
//! several SPs (authority-centered) or an SP linked to several IPs (service
//! provider-centered). Without one, a broker linked to both sides relays and
//! is responsible. Topologies are static, loaded once from configuration.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::model::EntityId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityRole {
    IdentityProvider,
    ServiceProvider,
    Broker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    Saml2,
    #[serde(rename = "wsfed")]
    WsFed11B,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FederationEntity {
    pub id: EntityId,
    pub role: EntityRole,
    pub dialect: Dialect,
    #[serde(default)]
    pub endpoints: BTreeMap<String, Url>,
    #[serde(default)]
    pub keys: Vec<String>,
}

impl FederationEntity {
    pub fn new(id: EntityId, role: EntityRole, dialect: Dialect) -> Self {
        FederationEntity {
            id,
            role,
            dialect,
            endpoints: BTreeMap::new(),
            keys: Vec::new(),
        }
    }

    pub fn with_endpoint(mut self, kind: &str, url: Url) -> Self {
        self.endpoints.insert(kind.to_string(), url);
        self
    }

    pub fn with_key(mut self, key_id: &str) -> Self {
        self.keys.push(key_id.to_string());
        self
    }

    pub fn endpoint(&self, kind: &str) -> Option<&Url> {
        self.endpoints.get(kind)
    }

    fn check(&self) -> Result<(), TopologyError> {
        let ok = match self.role {
            EntityRole::Broker => self.dialect == Dialect::Both,
            EntityRole::IdentityProvider | EntityRole::ServiceProvider => {
                self.dialect != Dialect::Both
            }
        };
        if ok {
            Ok(())
        } else {
            Err(TopologyError::InvalidEntity {
                id: self.id.to_string(),
                reason: format!("{:?} cannot use dialect {:?}", self.role, self.dialect),
            })
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("entity {id} is not a {expected:?}")]
    WrongRole { id: String, expected: EntityRole },
    #[error("invalid entity {id}: {reason}")]
    InvalidEntity { id: String, reason: String },
    #[error("entity {0} is declared twice")]
    DuplicateEntity(String),
    #[error("entity {0} cannot trust itself")]
    SelfLink(String),
    #[error("{sp} and {ip} speak the same dialect; no interoperability needed")]
    SameDialect { sp: String, ip: String },
    #[error("no trust path from {sp} to {ip}")]
    NoTrustPath { sp: String, ip: String },
    #[error("ambiguous topology: {0}")]
    AmbiguousTopology(String),
}

/// Entities and their direct trust links. Links are symmetric.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTopology", into = "RawTopology")]
pub struct TrustTopology {
    entities: BTreeMap<EntityId, FederationEntity>,
    links: BTreeSet<(EntityId, EntityId)>,
}

#[derive(Serialize, Deserialize)]
struct RawTopology {
    entities: Vec<FederationEntity>,
    #[serde(default)]
    links: Vec<(EntityId, EntityId)>,
}

impl TryFrom<RawTopology> for TrustTopology {
    type Error = TopologyError;
    fn try_from(raw: RawTopology) -> Result<Self, Self::Error> {
        TrustTopology::new(raw.entities, raw.links)
    }
}

impl From<TrustTopology> for RawTopology {
    fn from(t: TrustTopology) -> Self {
        RawTopology {
            entities: t.entities.into_values().collect(),
            links: t.links.into_iter().collect(),
        }
    }
}

fn link_key(a: &EntityId, b: &EntityId) -> (EntityId, EntityId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

impl TrustTopology {
    pub fn new(
        entities: impl IntoIterator<Item = FederationEntity>,
        links: impl IntoIterator<Item = (EntityId, EntityId)>,
    ) -> Result<Self, TopologyError> {
        let mut topo = TrustTopology::default();
        for e in entities {
            topo.add_entity(e)?;
        }
        for (a, b) in links {
            topo.add_link(&a, &b)?;
        }
        Ok(topo)
    }

    pub fn add_entity(&mut self, entity: FederationEntity) -> Result<(), TopologyError> {
        entity.check()?;
        if self.entities.contains_key(&entity.id) {
            return Err(TopologyError::DuplicateEntity(entity.id.to_string()));
        }
        self.entities.insert(entity.id.clone(), entity);
        Ok(())
    }

    pub fn add_link(&mut self, a: &EntityId, b: &EntityId) -> Result<(), TopologyError> {
        for id in [a, b] {
            if !self.entities.contains_key(id) {
                return Err(TopologyError::UnknownEntity(id.to_string()));
            }
        }
        if a == b {
            return Err(TopologyError::SelfLink(a.to_string()));
        }
        self.links.insert(link_key(a, b));
        Ok(())
    }

    pub fn entity(&self, id: &EntityId) -> Option<&FederationEntity> {
        self.entities.get(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &FederationEntity> {
        self.entities.values()
    }

    pub fn linked(&self, a: &EntityId, b: &EntityId) -> bool {
        self.links.contains(&link_key(a, b))
    }

    pub fn neighbors(&self, id: &EntityId) -> impl Iterator<Item = &FederationEntity> + '_ {
        let id = id.clone();
        self.links.iter().filter_map(move |(a, b)| {
            let other = if *a == id {
                b
            } else if *b == id {
                a
            } else {
                return None;
            };
            self.entities.get(other)
        })
    }

    /// The entity that owns the given endpoint URL under `kind`.
    pub fn find_by_endpoint(&self, kind: &str, url: &Url) -> Option<&FederationEntity> {
        self.entities
            .values()
            .find(|e| e.endpoint(kind) == Some(url))
    }

    fn require(&self, id: &EntityId, role: EntityRole) -> Result<&FederationEntity, TopologyError> {
        let e = self
            .entities
            .get(id)
            .ok_or_else(|| TopologyError::UnknownEntity(id.to_string()))?;
        if e.role != role {
            return Err(TopologyError::WrongRole {
                id: id.to_string(),
                expected: role,
            });
        }
        Ok(e)
    }

    fn check_pair(&self, sp: &EntityId, ip: &EntityId) -> Result<(), TopologyError> {
        let s = self.require(sp, EntityRole::ServiceProvider)?;
        let i = self.require(ip, EntityRole::IdentityProvider)?;
        if s.dialect == i.dialect {
            return Err(TopologyError::SameDialect {
                sp: sp.to_string(),
                ip: ip.to_string(),
            });
        }
        Ok(())
    }

    fn count_neighbors(&self, id: &EntityId, role: EntityRole) -> usize {
        self.neighbors(id).filter(|n| n.role == role).count()
    }

    /// First broker (by entity id) directly linked to both sides.
    fn broker_between(&self, sp: &EntityId, ip: &EntityId) -> Option<&FederationEntity> {
        self.entities
            .values()
            .filter(|e| e.role == EntityRole::Broker)
            .find(|b| self.linked(sp, &b.id) && self.linked(&b.id, ip))
    }

    /// The entity responsible for translating between `sp` and `ip`.
    pub fn resolve_responsible(
        &self,
        sp: &EntityId,
        ip: &EntityId,
    ) -> Result<EntityId, TopologyError> {
        self.check_pair(sp, ip)?;
        if self.linked(sp, ip) {
            let ip_hub = self.count_neighbors(ip, EntityRole::ServiceProvider) >= 2;
            let sp_hub = self.count_neighbors(sp, EntityRole::IdentityProvider) >= 2;
            return match (ip_hub, sp_hub) {
                (true, false) => Ok(ip.clone()),
                (false, true) => Ok(sp.clone()),
                (true, true) => Err(TopologyError::AmbiguousTopology(format!(
                    "both {sp} and {ip} are hubs of their circle"
                ))),
                (false, false) => Err(TopologyError::AmbiguousTopology(format!(
                    "neither {sp} nor {ip} is a hub of their circle"
                ))),
            };
        }
        self.broker_between(sp, ip)
            .map(|b| b.id.clone())
            .ok_or_else(|| TopologyError::NoTrustPath {
                sp: sp.to_string(),
                ip: ip.to_string(),
            })
    }

    /// `[sp, ip]` for a direct link, `[sp, broker, ip]` through one broker.
    pub fn resolve_path(
        &self,
        sp: &EntityId,
        ip: &EntityId,
    ) -> Result<Vec<EntityId>, TopologyError> {
        self.check_pair(sp, ip)?;
        if self.linked(sp, ip) {
            return Ok(vec![sp.clone(), ip.clone()]);
        }
        self.broker_between(sp, ip)
            .map(|b| vec![sp.clone(), b.id.clone(), ip.clone()])
            .ok_or_else(|| TopologyError::NoTrustPath {
                sp: sp.to_string(),
                ip: ip.to_string(),
            })
    }

    /// Identity providers of the other dialect reachable from `sp` through `broker`.
    pub fn brokered_ips(&self, sp: &EntityId, broker: &EntityId) -> Vec<&FederationEntity> {
        let Some(sp_entity) = self.entities.get(sp) else {
            return Vec::new();
        };
        self.neighbors(broker)
            .filter(|e| e.role == EntityRole::IdentityProvider && e.dialect != sp_entity.dialect)
            .filter(|e| {
                self.resolve_path(sp, &e.id)
                    .map(|p| p.len() == 3 && &p[1] == broker)
                    .unwrap_or(false)
            })
            .collect()
    }
}

/// Small reference topologies, each with the SP/IP pair of interest.
pub mod canned {
    use super::{Dialect, EntityRole, FederationEntity, TrustTopology};
    use crate::model::EntityId;
    use Dialect::{Saml2, WsFed11B};
    use EntityRole::{Broker, IdentityProvider as Ip, ServiceProvider as Sp};

    #[derive(Debug, Clone)]
    pub struct Canned {
        pub name: &'static str,
        pub topology: TrustTopology,
        pub sp: EntityId,
        pub ip: EntityId,
    }

    fn id(name: &str) -> EntityId {
        EntityId::new(format!("https://{name}.example.org")).expect("canned id")
    }

    fn build(
        name: &'static str,
        entities: &[(&str, EntityRole, Dialect)],
        links: &[(&str, &str)],
    ) -> Canned {
        let topology = TrustTopology::new(
            entities
                .iter()
                .map(|(n, r, d)| FederationEntity::new(id(n), *r, *d)),
            links.iter().map(|(a, b)| (id(a), id(b))),
        )
        .expect("canned topology is well formed");
        Canned {
            name,
            topology,
            sp: id("sp"),
            ip: id("ip"),
        }
    }

    /// One WS-Federation authority trusted by several SPs, one of them SAML.
    pub fn authority_centered() -> Canned {
        build(
            "authority-centered",
            &[
                ("ip", Ip, WsFed11B),
                ("sp", Sp, Saml2),
                ("sp2", Sp, WsFed11B),
                ("sp3", Sp, WsFed11B),
            ],
            &[("sp", "ip"), ("sp2", "ip"), ("sp3", "ip")],
        )
    }

    /// A SAML SP trusting authorities of both dialects.
    pub fn service_provider_centered() -> Canned {
        build(
            "sp-centered",
            &[("sp", Sp, Saml2), ("idp", Ip, Saml2), ("ip", Ip, WsFed11B)],
            &[("sp", "idp"), ("sp", "ip")],
        )
    }

    /// SP and IP linked only through a broker.
    pub fn brokered() -> Canned {
        build(
            "brokered",
            &[
                ("sp", Sp, Saml2),
                ("broker", Broker, Dialect::Both),
                ("ip", Ip, WsFed11B),
            ],
            &[("sp", "broker"), ("broker", "ip")],
        )
    }

    /// Directly linked SP and IP, each trusted by several peers.
    pub fn dual_hub() -> Canned {
        build(
            "dual-hub",
            &[
                ("sp", Sp, Saml2),
                ("sp2", Sp, Saml2),
                ("ip", Ip, WsFed11B),
                ("idp", Ip, Saml2),
            ],
            &[("sp", "ip"), ("sp", "idp"), ("sp2", "ip")],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> EntityId {
        EntityId::new(format!("https://{s}.example.org")).unwrap()
    }

    fn sp(name: &str, d: Dialect) -> FederationEntity {
        FederationEntity::new(id(name), EntityRole::ServiceProvider, d)
    }

    fn ip(name: &str, d: Dialect) -> FederationEntity {
        FederationEntity::new(id(name), EntityRole::IdentityProvider, d)
    }

    fn broker(name: &str) -> FederationEntity {
        FederationEntity::new(id(name), EntityRole::Broker, Dialect::Both)
    }

    fn links(pairs: &[(&str, &str)]) -> Vec<(EntityId, EntityId)> {
        pairs.iter().map(|(a, b)| (id(a), id(b))).collect()
    }

    #[test]
    fn authority_centered() {
        let topo = TrustTopology::new(
            [
                ip("sts", Dialect::WsFed11B),
                sp("sp1", Dialect::Saml2),
                sp("sp2", Dialect::WsFed11B),
                sp("sp3", Dialect::WsFed11B),
            ],
            links(&[("sp1", "sts"), ("sp2", "sts"), ("sp3", "sts")]),
        )
        .unwrap();
        assert_eq!(
            topo.resolve_responsible(&id("sp1"), &id("sts")),
            Ok(id("sts"))
        );
        assert_eq!(
            topo.resolve_path(&id("sp1"), &id("sts")),
            Ok(vec![id("sp1"), id("sts")])
        );
    }

    #[test]
    fn service_provider_centered() {
        let topo = TrustTopology::new(
            [
                sp("sp", Dialect::Saml2),
                ip("idp", Dialect::Saml2),
                ip("sts", Dialect::WsFed11B),
            ],
            links(&[("sp", "idp"), ("sp", "sts")]),
        )
        .unwrap();
        assert_eq!(
            topo.resolve_responsible(&id("sp"), &id("sts")),
            Ok(id("sp"))
        );
    }

    #[test]
    fn brokered() {
        let topo = TrustTopology::new(
            [
                sp("sp", Dialect::Saml2),
                broker("broker"),
                ip("sts", Dialect::WsFed11B),
            ],
            links(&[("sp", "broker"), ("broker", "sts")]),
        )
        .unwrap();
        assert_eq!(
            topo.resolve_responsible(&id("sp"), &id("sts")),
            Ok(id("broker"))
        );
        assert_eq!(
            topo.resolve_path(&id("sp"), &id("sts")),
            Ok(vec![id("sp"), id("broker"), id("sts")])
        );
        assert_eq!(topo.brokered_ips(&id("sp"), &id("broker")).len(), 1);
    }

    #[test]
    fn dual_hub_is_ambiguous() {
        let topo = TrustTopology::new(
            [
                sp("sp", Dialect::Saml2),
                sp("sp2", Dialect::Saml2),
                ip("sts", Dialect::WsFed11B),
                ip("idp", Dialect::Saml2),
            ],
            links(&[("sp", "sts"), ("sp", "idp"), ("sp2", "sts")]),
        )
        .unwrap();
        assert!(matches!(
            topo.resolve_responsible(&id("sp"), &id("sts")),
            Err(TopologyError::AmbiguousTopology(_))
        ));
    }

    #[test]
    fn unreachable_pair() {
        let topo = TrustTopology::new(
            [
                sp("sp", Dialect::Saml2),
                ip("sts", Dialect::WsFed11B),
                broker("b"),
            ],
            links(&[("sp", "b")]),
        )
        .unwrap();
        assert!(matches!(
            topo.resolve_path(&id("sp"), &id("sts")),
            Err(TopologyError::NoTrustPath { .. })
        ));
        assert!(matches!(
            topo.resolve_responsible(&id("sp"), &id("sts")),
            Err(TopologyError::NoTrustPath { .. })
        ));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            TrustTopology::new([sp("sp", Dialect::Saml2)], links(&[("sp", "sp")])),
            Err(TopologyError::SelfLink(_))
        ));
        assert!(matches!(
            TrustTopology::new([sp("sp", Dialect::Saml2)], links(&[("sp", "ghost")])),
            Err(TopologyError::UnknownEntity(_))
        ));
        assert!(matches!(
            TrustTopology::new([sp("sp", Dialect::Both)], []),
            Err(TopologyError::InvalidEntity { .. })
        ));
        assert!(matches!(
            TrustTopology::new(
                [FederationEntity::new(
                    id("b"),
                    EntityRole::Broker,
                    Dialect::Saml2
                )],
                []
            ),
            Err(TopologyError::InvalidEntity { .. })
        ));
        let topo = TrustTopology::new(
            [sp("sp", Dialect::Saml2), ip("idp", Dialect::Saml2)],
            links(&[("sp", "idp")]),
        )
        .unwrap();
        assert!(matches!(
            topo.resolve_responsible(&id("sp"), &id("idp")),
            Err(TopologyError::SameDialect { .. })
        ));
        assert!(matches!(
            topo.resolve_path(&id("idp"), &id("sp")),
            Err(TopologyError::WrongRole { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let topo = TrustTopology::new(
            [
                sp("sp", Dialect::Saml2),
                broker("b"),
                ip("sts", Dialect::WsFed11B),
            ],
            links(&[("sp", "b"), ("sts", "b")]),
        )
        .unwrap();
        let json = serde_json::to_string(&topo).unwrap();
        assert!(json.contains("\"wsfed\""));
        let back: TrustTopology = serde_json::from_str(&json).unwrap();
        assert_eq!(back, topo);
    }
}
