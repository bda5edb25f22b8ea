//! Assertion signatures over canonical bytes.
//!
//! The broker verifies an assertion against the issuing party's key and signs
//! the unchanged content again with its own key, which is what lets an SP that
//! only trusts the broker accept an assertion issued elsewhere.

use std::collections::HashMap;
use std::path::Path;

use ed25519_dalek::{Signer as _, SigningKey, Verifier as _, VerifyingKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EntityId, ProtocolDocument, SamlAssertion, Signature};

/// Ed25519 over the canonical assertion bytes.
pub const ALGORITHM_ED25519: &str = "http://www.w3.org/2021/04/xmldsig-more#eddsa-ed25519";

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SigningError {
    #[error("key {key_id} has role {actual:?}, expected {expected:?}")]
    WrongKeyRole {
        key_id: String,
        expected: KeyRole,
        actual: KeyRole,
    },
    #[error("signature does not verify")]
    SignatureInvalid,
    #[error("no trusted key named {0}")]
    UnknownKeyId(String),
    #[error("assertion is not signed")]
    MissingSignature,
    #[error("unsupported signature algorithm {0}")]
    UnsupportedAlgorithm(String),
    #[error("bad key material for {key_id}: {detail}")]
    BadKeyMaterial { key_id: String, detail: String },
    #[error("duplicate key id {0}")]
    DuplicateKeyId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyRole {
    SigningPrivate,
    VerifyingPublic,
}

/// A named key. Private records hold the 32-byte Ed25519 seed, public records
/// the 32-byte verifying key. A signing/verifying pair shares its `key_id`.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyRecord {
    pub key_id: String,
    pub owner: EntityId,
    pub role: KeyRole,
    pub material: Vec<u8>,
}

impl std::fmt::Debug for KeyRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyRecord")
            .field("key_id", &self.key_id)
            .field("owner", &self.owner)
            .field("role", &self.role)
            .finish_non_exhaustive()
    }
}

impl KeyRecord {
    /// Private record derived from a fixed seed.
    pub fn from_seed(key_id: impl Into<String>, owner: EntityId, seed: [u8; 32]) -> Self {
        KeyRecord {
            key_id: key_id.into(),
            owner,
            role: KeyRole::SigningPrivate,
            material: seed.to_vec(),
        }
    }

    pub fn generate(key_id: impl Into<String>, owner: EntityId) -> Self {
        let signing = SigningKey::generate(&mut rand::rngs::OsRng);
        KeyRecord::from_seed(key_id, owner, signing.to_bytes())
    }

    /// The verifying half of a private record (or a clone of a public one).
    pub fn public(&self) -> Result<KeyRecord, SigningError> {
        match self.role {
            KeyRole::VerifyingPublic => Ok(self.clone()),
            KeyRole::SigningPrivate => Ok(KeyRecord {
                key_id: self.key_id.clone(),
                owner: self.owner.clone(),
                role: KeyRole::VerifyingPublic,
                material: self.signing_key()?.verifying_key().to_bytes().to_vec(),
            }),
        }
    }

    /// Reads hex-encoded key material from a file.
    pub fn load(
        key_id: impl Into<String>,
        owner: EntityId,
        role: KeyRole,
        path: &Path,
    ) -> Result<KeyRecord, SigningError> {
        let key_id = key_id.into();
        let text = std::fs::read_to_string(path).map_err(|e| SigningError::BadKeyMaterial {
            key_id: key_id.clone(),
            detail: format!("{}: {e}", path.display()),
        })?;
        KeyRecord::from_hex(key_id, owner, role, &text)
    }

    pub fn from_hex(
        key_id: impl Into<String>,
        owner: EntityId,
        role: KeyRole,
        text: &str,
    ) -> Result<KeyRecord, SigningError> {
        let key_id = key_id.into();
        let material = hex::decode(text.trim()).map_err(|e| SigningError::BadKeyMaterial {
            key_id: key_id.clone(),
            detail: e.to_string(),
        })?;
        let record = KeyRecord {
            key_id,
            owner,
            role,
            material,
        };
        match role {
            KeyRole::SigningPrivate => record.signing_key().map(|_| ())?,
            KeyRole::VerifyingPublic => record.verifying_key().map(|_| ())?,
        }
        Ok(record)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.material)
    }

    fn bytes32(&self) -> Result<[u8; 32], SigningError> {
        self.material
            .as_slice()
            .try_into()
            .map_err(|_| SigningError::BadKeyMaterial {
                key_id: self.key_id.clone(),
                detail: format!("expected 32 bytes, got {}", self.material.len()),
            })
    }

    fn signing_key(&self) -> Result<SigningKey, SigningError> {
        Ok(SigningKey::from_bytes(&self.bytes32()?))
    }

    fn verifying_key(&self) -> Result<VerifyingKey, SigningError> {
        VerifyingKey::from_bytes(&self.bytes32()?).map_err(|e| SigningError::BadKeyMaterial {
            key_id: self.key_id.clone(),
            detail: e.to_string(),
        })
    }
}

/// Trusted verifying keys by id.
#[derive(Debug, Clone, Default)]
pub struct KeyStore {
    keys: HashMap<String, KeyRecord>,
}

impl KeyStore {
    pub fn new() -> Self {
        KeyStore::default()
    }

    /// Adds a key; private records are stored as their public half.
    pub fn insert(&mut self, record: &KeyRecord) -> Result<(), SigningError> {
        let public = record.public()?;
        public.verifying_key()?;
        if self.keys.contains_key(&public.key_id) {
            return Err(SigningError::DuplicateKeyId(public.key_id));
        }
        self.keys.insert(public.key_id.clone(), public);
        Ok(())
    }

    pub fn with(mut self, record: &KeyRecord) -> Result<Self, SigningError> {
        self.insert(record)?;
        Ok(self)
    }

    pub fn remove(&mut self, key_id: &str) -> Option<KeyRecord> {
        self.keys.remove(key_id)
    }

    pub fn get(&self, key_id: &str) -> Option<&KeyRecord> {
        self.keys.get(key_id)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key_ids(&self) -> impl Iterator<Item = &str> {
        self.keys.keys().map(String::as_str)
    }
}

fn unsigned_bytes(assertion: &SamlAssertion) -> Vec<u8> {
    assertion.canonical_bytes()
}

pub fn sign(assertion: &SamlAssertion, key: &KeyRecord) -> Result<SamlAssertion, SigningError> {
    if key.role != KeyRole::SigningPrivate {
        return Err(SigningError::WrongKeyRole {
            key_id: key.key_id.clone(),
            expected: KeyRole::SigningPrivate,
            actual: key.role,
        });
    }
    let value = key.signing_key()?.sign(&unsigned_bytes(assertion));
    let mut signed = assertion.clone();
    signed.signature = Some(Signature {
        key_id: key.key_id.clone(),
        algorithm_id: ALGORITHM_ED25519.to_string(),
        value: value.to_bytes().to_vec(),
    });
    Ok(signed)
}

/// Verifies the assertion's signature and returns the owner of the key that made it.
pub fn verify(assertion: &SamlAssertion, trusted: &KeyStore) -> Result<EntityId, SigningError> {
    let sig = assertion
        .signature
        .as_ref()
        .ok_or(SigningError::MissingSignature)?;
    if sig.algorithm_id != ALGORITHM_ED25519 {
        return Err(SigningError::UnsupportedAlgorithm(sig.algorithm_id.clone()));
    }
    let record = trusted
        .get(&sig.key_id)
        .ok_or_else(|| SigningError::UnknownKeyId(sig.key_id.clone()))?;
    let value = ed25519_dalek::Signature::from_slice(&sig.value)
        .map_err(|_| SigningError::SignatureInvalid)?;
    record
        .verifying_key()?
        .verify(&unsigned_bytes(assertion), &value)
        .map_err(|_| SigningError::SignatureInvalid)?;
    Ok(record.owner.clone())
}

/// Verifies against `trusted`, then signs the same content with `broker_key`.
pub fn resign(
    assertion: &SamlAssertion,
    trusted: &KeyStore,
    broker_key: &KeyRecord,
) -> Result<SamlAssertion, SigningError> {
    verify(assertion, trusted)?;
    sign(assertion, broker_key)
}
