//! Independent reference computations, written from the primitives.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use sha2::{Digest, Sha256};

const BLOCK: usize = 64;

/// HMAC-SHA256 from its definition: H((K ^ opad) || H((K ^ ipad) || m)).
pub fn hmac_sha256(key: &[u8], message: &[u8]) -> [u8; 32] {
    let mut k = [0u8; BLOCK];
    if key.len() > BLOCK {
        k[..32].copy_from_slice(&Sha256::digest(key));
    } else {
        k[..key.len()].copy_from_slice(key);
    }
    let inner_pad: Vec<u8> = k.iter().map(|b| b ^ 0x36).collect();
    let outer_pad: Vec<u8> = k.iter().map(|b| b ^ 0x5c).collect();
    let inner = Sha256::new()
        .chain_update(&inner_pad)
        .chain_update(message)
        .finalize();
    Sha256::new()
        .chain_update(&outer_pad)
        .chain_update(inner)
        .finalize()
        .into()
}

/// Expected persistent pseudonym for `(subject, sp)`.
pub fn persistent_pseudonym(secret: &[u8], subject: &str, sp: &str) -> String {
    let mut message = b"fedbridge/pairwise/v1".to_vec();
    for part in [subject.as_bytes(), sp.as_bytes()] {
        message.extend_from_slice(&(part.len() as u64).to_be_bytes());
        message.extend_from_slice(part);
    }
    URL_SAFE_NO_PAD.encode(hmac_sha256(secret, &message))
}
