//! Pair-wise subject identifiers.
//!
//! Persistent pseudonyms are an HMAC-SHA256 of the subject and the SP under a
//! master secret: stable for one (subject, SP) link, different for every
//! other SP, and not invertible without the registry. Transient pseudonyms
//! are 128 random bits, one per (subject, SP, session).

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::RwLock;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use hmac::{Hmac, Mac};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

use crate::model::EntityId;

const DERIVATION_LABEL: &[u8] = b"fedbridge/pairwise/v1";
const SNAPSHOT_MAGIC: &str = "# fedbridge pseudonym snapshot v1";
const SNAPSHOT_COLUMNS: &str = "pseudonym\tsubject\tsp\tkind\tsession\tlinked_account";

#[derive(Debug, Error)]
pub enum PseudonymError {
    #[error("unknown pseudonym {0}")]
    UnknownPseudonym(String),
    #[error("subject must not be empty")]
    EmptySubject,
    #[error("snapshot line {line}: {detail}")]
    BadSnapshot { line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudonymKind {
    Persistent,
    Transient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudonymRecord {
    pub pseudonym: String,
    pub subject: String,
    pub sp: EntityId,
    pub kind: PseudonymKind,
    pub session: Option<String>,
    pub linked_account: Option<String>,
}

/// Keyed one-way derivation of the persistent pseudonym for `(subject, sp)`.
pub fn derive_persistent(
    subject: &str,
    sp: &EntityId,
    master_secret: &[u8],
) -> Result<String, PseudonymError> {
    if subject.is_empty() {
        return Err(PseudonymError::EmptySubject);
    }
    let mut mac =
        Hmac::<Sha256>::new_from_slice(master_secret).expect("HMAC accepts any key length");
    mac.update(DERIVATION_LABEL);
    // Length prefixes keep (subject, sp) boundaries unambiguous.
    for part in [subject.as_bytes(), sp.as_str().as_bytes()] {
        mac.update(&(part.len() as u64).to_be_bytes());
        mac.update(part);
    }
    Ok(URL_SAFE_NO_PAD.encode(mac.finalize().into_bytes()))
}

fn random_pseudonym() -> String {
    let mut bytes = [0u8; 16];
    rand::rngs::OsRng.fill_bytes(&mut bytes);
    URL_SAFE_NO_PAD.encode(bytes)
}

#[derive(Debug, Default)]
struct Inner {
    records: HashMap<String, PseudonymRecord>,
    persistent: HashMap<(String, EntityId), String>,
    transient: HashMap<(String, EntityId, String), String>,
}

impl Inner {
    fn insert(&mut self, record: PseudonymRecord) {
        match record.kind {
            PseudonymKind::Persistent => {
                self.persistent.insert(
                    (record.subject.clone(), record.sp.clone()),
                    record.pseudonym.clone(),
                );
            }
            PseudonymKind::Transient => {
                self.transient.insert(
                    (
                        record.subject.clone(),
                        record.sp.clone(),
                        record.session.clone().unwrap_or_default(),
                    ),
                    record.pseudonym.clone(),
                );
            }
        }
        self.records.insert(record.pseudonym.clone(), record);
    }
}

/// In-memory registry of issued pseudonyms and their account links.
#[derive(Debug, Default)]
pub struct PseudonymRegistry {
    inner: RwLock<Inner>,
}

impl PseudonymRegistry {
    pub fn new() -> Self {
        PseudonymRegistry::default()
    }

    /// Derives and records the persistent pseudonym; repeated calls return the same record.
    pub fn register_persistent(
        &self,
        subject: &str,
        sp: &EntityId,
        master_secret: &[u8],
    ) -> Result<PseudonymRecord, PseudonymError> {
        let pseudonym = derive_persistent(subject, sp, master_secret)?;
        let mut inner = self.inner.write().expect("registry lock");
        if let Some(existing) = inner.records.get(&pseudonym) {
            return Ok(existing.clone());
        }
        let record = PseudonymRecord {
            pseudonym,
            subject: subject.to_string(),
            sp: sp.clone(),
            kind: PseudonymKind::Persistent,
            session: None,
            linked_account: None,
        };
        inner.insert(record.clone());
        Ok(record)
    }

    /// Issues a fresh transient pseudonym, or returns the one already issued
    /// for this session.
    pub fn issue_transient(&self, subject: &str, sp: &EntityId, session: &str) -> PseudonymRecord {
        let key = (subject.to_string(), sp.clone(), session.to_string());
        let mut inner = self.inner.write().expect("registry lock");
        if let Some(existing) = inner.transient.get(&key).and_then(|p| inner.records.get(p)) {
            return existing.clone();
        }
        let mut pseudonym = random_pseudonym();
        while inner.records.contains_key(&pseudonym) {
            pseudonym = random_pseudonym();
        }
        let record = PseudonymRecord {
            pseudonym,
            subject: subject.to_string(),
            sp: sp.clone(),
            kind: PseudonymKind::Transient,
            session: Some(session.to_string()),
            linked_account: None,
        };
        inner.insert(record.clone());
        record
    }

    pub fn link_account(
        &self,
        pseudonym: &str,
        local_account: &str,
    ) -> Result<PseudonymRecord, PseudonymError> {
        let mut inner = self.inner.write().expect("registry lock");
        let record = inner
            .records
            .get_mut(pseudonym)
            .ok_or_else(|| PseudonymError::UnknownPseudonym(pseudonym.to_string()))?;
        record.linked_account = Some(local_account.to_string());
        Ok(record.clone())
    }

    /// The local account linked to a pseudonym, if any.
    pub fn resolve(&self, pseudonym: &str) -> Option<String> {
        let inner = self.inner.read().expect("registry lock");
        inner
            .records
            .get(pseudonym)
            .and_then(|r| r.linked_account.clone())
    }

    pub fn lookup(&self, pseudonym: &str) -> Option<PseudonymRecord> {
        self.inner
            .read()
            .expect("registry lock")
            .records
            .get(pseudonym)
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("registry lock").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes all records as tab-separated lines after a two-line header.
    pub fn write_snapshot(&self, mut out: impl Write) -> Result<(), PseudonymError> {
        let inner = self.inner.read().expect("registry lock");
        let mut records: Vec<_> = inner.records.values().collect();
        records.sort_by(|a, b| a.pseudonym.cmp(&b.pseudonym));
        writeln!(out, "{SNAPSHOT_MAGIC}")?;
        writeln!(out, "{SNAPSHOT_COLUMNS}")?;
        for r in records {
            let kind = match r.kind {
                PseudonymKind::Persistent => "persistent",
                PseudonymKind::Transient => "transient",
            };
            let fields = [
                escape(&r.pseudonym),
                escape(&r.subject),
                escape(r.sp.as_str()),
                kind.to_string(),
                r.session.as_deref().map(escape).unwrap_or_default(),
                r.linked_account.as_deref().map(escape).unwrap_or_default(),
            ];
            writeln!(out, "{}", fields.join("\t"))?;
        }
        Ok(())
    }

    pub fn read_snapshot(input: impl BufRead) -> Result<Self, PseudonymError> {
        let mut inner = Inner::default();
        let mut lines = input.lines().enumerate();
        let bad = |line: usize, detail: &str| PseudonymError::BadSnapshot {
            line: line + 1,
            detail: detail.to_string(),
        };
        match lines.next() {
            Some((_, Ok(l))) if l == SNAPSHOT_MAGIC => {}
            _ => return Err(bad(0, "missing snapshot header")),
        }
        match lines.next() {
            Some((_, Ok(l))) if l == SNAPSHOT_COLUMNS => {}
            _ => return Err(bad(1, "missing column header")),
        }
        for (n, line) in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 6 {
                return Err(bad(n, "expected 6 fields"));
            }
            let kind = match fields[3] {
                "persistent" => PseudonymKind::Persistent,
                "transient" => PseudonymKind::Transient,
                _ => return Err(bad(n, "unknown kind")),
            };
            let optional = |s: &str| (!s.is_empty()).then(|| unescape(s));
            let sp = EntityId::new(unescape(fields[2])).map_err(|e| bad(n, &e.to_string()))?;
            inner.insert(PseudonymRecord {
                pseudonym: unescape(fields[0]),
                subject: unescape(fields[1]),
                sp,
                kind,
                session: optional(fields[4]),
                linked_account: optional(fields[5]),
            });
        }
        Ok(PseudonymRegistry {
            inner: RwLock::new(inner),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), PseudonymError> {
        let file = std::fs::File::create(path)?;
        self.write_snapshot(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self, PseudonymError> {
        let file = std::fs::File::open(path)?;
        PseudonymRegistry::read_snapshot(std::io::BufReader::new(file))
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}
