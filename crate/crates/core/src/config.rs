//! JSON federation configuration shared by the broker, the mocks and the CLI.
//!
//! Relative file paths (key files, pseudonym secret and snapshot) are resolved
//! against the directory holding the configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::broker::{Broker, BrokerSettings, PseudonymMode};
use crate::model::EntityId;
use crate::pseudonym::PseudonymRegistry;
use crate::signing::{KeyRecord, KeyRole, KeyStore, SigningError};
use crate::translation::{AttributeNameMapping, AuthnContextMapping};
use crate::trust_registry::{Dialect, EntityRole, FederationEntity, TrustTopology};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Key(#[from] SigningError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FederationConfig {
    pub broker: BrokerConfig,
    pub topology: TrustTopology,
    #[serde(default)]
    pub keys: Vec<KeyEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mocks: Option<MocksConfig>,
    #[serde(skip)]
    base_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BrokerConfig {
    pub entity_id: EntityId,
    pub listen: String,
    pub signing_key: String,
    #[serde(default = "default_ttl")]
    pub correlation_ttl_secs: i64,
    #[serde(default = "default_ttl")]
    pub replay_ttl_secs: i64,
    #[serde(default = "default_skew")]
    pub clock_skew_secs: i64,
    #[serde(default)]
    pub authn_context_map: AuthnContextMapping,
    #[serde(default)]
    pub attribute_map: AttributeNameMapping,
    #[serde(default)]
    pub pseudonyms: PseudonymConfig,
}

fn default_ttl() -> i64 {
    300
}

fn default_skew() -> i64 {
    60
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PseudonymConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_secret_file: Option<PathBuf>,
    #[serde(default)]
    pub modes: BTreeMap<EntityId, PseudonymMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
}

/// One key, with its material either inline (`hex`) or in a hex file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyEntry {
    pub key_id: String,
    pub owner: EntityId,
    pub role: KeyRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hex: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MocksConfig {
    pub saml_idp: EntityId,
    pub wsfed_ip: EntityId,
    pub saml_sp: EntityId,
    pub wsfed_sp: EntityId,
    pub users: Vec<MockUser>,
    /// Credentials the simulated browser types into login forms.
    pub client: ClientCredentials,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockUser {
    pub subject: String,
    pub password: String,
    pub email: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientCredentials {
    pub username: String,
    pub password: String,
}

/// Ports of a lab running everything on the loopback interface.
#[derive(Debug, Clone, Copy)]
pub struct LabPorts {
    pub broker: u16,
    pub saml_idp: u16,
    pub wsfed_ip: u16,
    pub saml_sp: u16,
    pub wsfed_sp: u16,
}

impl Default for LabPorts {
    fn default() -> Self {
        LabPorts {
            broker: 18080,
            saml_idp: 18081,
            wsfed_ip: 18082,
            saml_sp: 18083,
            wsfed_sp: 18084,
        }
    }
}

pub const LAB_BROKER: &str = "https://broker.lab.test";
pub const LAB_SAML_IDP: &str = "https://idp.saml.lab.test";
pub const LAB_WSFED_IP: &str = "https://sts.wsfed.lab.test";
pub const LAB_SAML_SP: &str = "https://sp.saml.lab.test";
pub const LAB_WSFED_SP: &str = "https://sp.wsfed.lab.test";

impl FederationConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: FederationConfig = serde_json::from_str(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.check()?;
        Ok(config)
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut config: FederationConfig = serde_json::from_str(text)?;
        config.base_dir = base_dir.to_path_buf();
        config.check()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn check(&self) -> Result<(), ConfigError> {
        let broker = self.entity(&self.broker.entity_id)?;
        if broker.role != EntityRole::Broker {
            return Err(ConfigError::Invalid(format!(
                "{} is not declared as a broker",
                broker.id
            )));
        }
        for kind in ["sso", "acs", "signin", "return"] {
            if broker.endpoint(kind).is_none() {
                return Err(ConfigError::Invalid(format!(
                    "broker has no {kind:?} endpoint"
                )));
            }
        }
        Ok(())
    }

    pub fn entity(&self, id: &EntityId) -> Result<&FederationEntity, ConfigError> {
        self.topology
            .entity(id)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown entity {id}")))
    }

    pub fn key_records(&self) -> Result<Vec<KeyRecord>, ConfigError> {
        self.keys
            .iter()
            .map(|k| match (&k.hex, &k.file) {
                (Some(hex), None) => Ok(KeyRecord::from_hex(
                    &k.key_id,
                    k.owner.clone(),
                    k.role,
                    hex,
                )?),
                (None, Some(file)) => Ok(KeyRecord::load(
                    &k.key_id,
                    k.owner.clone(),
                    k.role,
                    &self.resolve(file),
                )?),
                _ => Err(ConfigError::Invalid(format!(
                    "key {} needs exactly one of \"hex\" or \"file\"",
                    k.key_id
                ))),
            })
            .collect()
    }

    fn key_record(&self, key_id: &str) -> Result<KeyRecord, ConfigError> {
        self.key_records()?
            .into_iter()
            .find(|k| k.key_id == key_id)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown key {key_id}")))
    }

    /// The private signing key of `id`: the first private key among those the
    /// topology lists for it (the broker uses `broker.signing_key`).
    pub fn signer_for(&self, id: &EntityId) -> Result<KeyRecord, ConfigError> {
        let key = if *id == self.broker.entity_id {
            self.key_record(&self.broker.signing_key)?
        } else {
            let records = self.key_records()?;
            let entity = self.entity(id)?;
            entity
                .keys
                .iter()
                .find_map(|kid| {
                    records
                        .iter()
                        .find(|r| &r.key_id == kid && r.role == KeyRole::SigningPrivate)
                })
                .cloned()
                .ok_or_else(|| ConfigError::Invalid(format!("no private signing key for {id}")))?
        };
        if key.role != KeyRole::SigningPrivate || key.owner != *id {
            return Err(ConfigError::Invalid(format!(
                "key {} is not a private key of {id}",
                key.key_id
            )));
        }
        Ok(key)
    }

    /// Verifying keys of every entity directly linked to `id`.
    pub fn trust_store_for(&self, id: &EntityId) -> Result<KeyStore, ConfigError> {
        let records = self.key_records()?;
        let mut store = KeyStore::new();
        for neighbor in self.topology.neighbors(id) {
            for kid in &neighbor.keys {
                let record = records
                    .iter()
                    .find(|r| &r.key_id == kid)
                    .ok_or_else(|| ConfigError::Invalid(format!("unknown key {kid}")))?;
                if record.owner != neighbor.id {
                    return Err(ConfigError::Invalid(format!(
                        "key {kid} is listed for {} but owned by {}",
                        neighbor.id, record.owner
                    )));
                }
                store.insert(&record.public()?)?;
            }
        }
        Ok(store)
    }

    pub fn master_secret(&self) -> Result<Option<Vec<u8>>, ConfigError> {
        let Some(file) = &self.broker.pseudonyms.master_secret_file else {
            return Ok(None);
        };
        let path = self.resolve(file);
        let text =
            std::fs::read_to_string(&path).map_err(|source| ConfigError::Io { path, source })?;
        let secret = hex::decode(text.trim())
            .map_err(|e| ConfigError::Invalid(format!("master secret must be hex: {e}")))?;
        if secret.len() < 16 {
            return Err(ConfigError::Invalid(
                "master secret must be at least 16 bytes".into(),
            ));
        }
        Ok(Some(secret))
    }

    pub fn snapshot_path(&self) -> Option<PathBuf> {
        self.broker
            .pseudonyms
            .snapshot
            .as_deref()
            .map(|p| self.resolve(p))
    }

    pub fn broker_settings(&self) -> Result<BrokerSettings, ConfigError> {
        let b = &self.broker;
        let master_secret = self.master_secret()?;
        if master_secret.is_none()
            && b.pseudonyms
                .modes
                .values()
                .any(|m| *m == PseudonymMode::Persistent)
        {
            return Err(ConfigError::Invalid(
                "persistent pseudonyms require a master secret file".into(),
            ));
        }
        for ttl in [b.correlation_ttl_secs, b.replay_ttl_secs] {
            if ttl <= 0 {
                return Err(ConfigError::Invalid("TTLs must be positive".into()));
            }
        }
        Ok(BrokerSettings {
            entity_id: b.entity_id.clone(),
            correlation_ttl_secs: b.correlation_ttl_secs,
            replay_ttl_secs: b.replay_ttl_secs,
            clock_skew_secs: b.clock_skew_secs,
            authn_context_map: b.authn_context_map.clone(),
            attribute_map: b.attribute_map.clone(),
            pseudonym_modes: b.pseudonyms.modes.clone(),
            master_secret: master_secret.unwrap_or_default(),
        })
    }

    /// A complete loopback federation with freshly generated keys: two SPs and
    /// two IPs of opposite dialects, all linked only to the broker.
    pub fn local(ports: LabPorts) -> Self {
        let id = |s: &str| EntityId::new(s).expect("lab entity id");
        let at = |port: u16, path: &str| -> Url {
            Url::parse(&format!("http://127.0.0.1:{port}{path}")).expect("lab url")
        };
        let mut keys = Vec::new();
        let mut entity = |name: &str, owner: &str, role, dialect, endpoints: &[(&str, Url)]| {
            let key_id = format!("{name}-signing");
            let record = KeyRecord::generate(&key_id, id(owner));
            keys.push(KeyEntry {
                key_id: key_id.clone(),
                owner: id(owner),
                role: KeyRole::SigningPrivate,
                file: None,
                hex: Some(record.to_hex()),
            });
            endpoints
                .iter()
                .fold(
                    FederationEntity::new(id(owner), role, dialect),
                    |e, (k, u)| e.with_endpoint(k, u.clone()),
                )
                .with_key(&key_id)
        };
        let b = ports.broker;
        let entities = vec![
            entity(
                "broker",
                LAB_BROKER,
                EntityRole::Broker,
                Dialect::Both,
                &[
                    ("sso", at(b, "/saml/sso")),
                    ("acs", at(b, "/saml/acs")),
                    ("signin", at(b, "/wsfed/signin")),
                    ("return", at(b, "/wsfed/return")),
                ],
            ),
            entity(
                "saml-idp",
                LAB_SAML_IDP,
                EntityRole::IdentityProvider,
                Dialect::Saml2,
                &[("sso", at(ports.saml_idp, "/sso"))],
            ),
            entity(
                "wsfed-ip",
                LAB_WSFED_IP,
                EntityRole::IdentityProvider,
                Dialect::WsFed11B,
                &[("signin", at(ports.wsfed_ip, "/signin"))],
            ),
            entity(
                "saml-sp",
                LAB_SAML_SP,
                EntityRole::ServiceProvider,
                Dialect::Saml2,
                &[
                    ("acs", at(ports.saml_sp, "/acs")),
                    ("start", at(ports.saml_sp, "/start")),
                ],
            ),
            entity(
                "wsfed-sp",
                LAB_WSFED_SP,
                EntityRole::ServiceProvider,
                Dialect::WsFed11B,
                &[
                    ("return", at(ports.wsfed_sp, "/return")),
                    ("start", at(ports.wsfed_sp, "/start")),
                ],
            ),
        ];
        let links = [LAB_SAML_IDP, LAB_WSFED_IP, LAB_SAML_SP, LAB_WSFED_SP]
            .into_iter()
            .map(|other| (id(LAB_BROKER), id(other)));
        let topology = TrustTopology::new(entities, links).expect("lab topology is well formed");
        let user = |subject: &str, display: &str| MockUser {
            subject: subject.to_string(),
            password: format!("{subject}-password"),
            email: format!("{subject}@example.org"),
            attributes: BTreeMap::from([
                ("displayName".to_string(), display.to_string()),
                ("role".to_string(), "member".to_string()),
            ]),
        };
        FederationConfig {
            broker: BrokerConfig {
                entity_id: id(LAB_BROKER),
                listen: format!("127.0.0.1:{b}"),
                signing_key: "broker-signing".into(),
                correlation_ttl_secs: default_ttl(),
                replay_ttl_secs: default_ttl(),
                clock_skew_secs: default_skew(),
                authn_context_map: AuthnContextMapping::default(),
                attribute_map: AttributeNameMapping::identity(),
                pseudonyms: PseudonymConfig::default(),
            },
            topology,
            keys,
            mocks: Some(MocksConfig {
                saml_idp: id(LAB_SAML_IDP),
                wsfed_ip: id(LAB_WSFED_IP),
                saml_sp: id(LAB_SAML_SP),
                wsfed_sp: id(LAB_WSFED_SP),
                users: vec![user("alice", "Alice Liddell"), user("bob", "Bob Marley")],
                client: ClientCredentials {
                    username: "alice".into(),
                    password: "alice-password".into(),
                },
            }),
            base_dir: PathBuf::new(),
        }
    }
}

/// The broker described by `config`, with its pseudonym snapshot loaded if
/// one exists.
pub fn broker_from_config(config: &FederationConfig) -> Result<Broker, ConfigError> {
    let id = &config.broker.entity_id;
    let broker = Broker::new(
        config.broker_settings()?,
        config.topology.clone(),
        config.trust_store_for(id)?,
        config.signer_for(id)?,
    )
    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    match config.snapshot_path().filter(|p| p.exists()) {
        Some(path) => {
            let registry = PseudonymRegistry::load(&path)
                .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
            Ok(broker.with_pseudonyms(Arc::new(registry)))
        }
        None => Ok(broker),
    }
}

/// `host:port` to bind for a service reachable at `url`.
pub fn listen_addr(url: &Url) -> Result<String, ConfigError> {
    let host = url
        .host_str()
        .ok_or_else(|| ConfigError::Invalid(format!("{url} has no host")))?;
    let port = url
        .port_or_known_default()
        .ok_or_else(|| ConfigError::Invalid(format!("{url} has no port")))?;
    Ok(format!("{host}:{port}"))
}
