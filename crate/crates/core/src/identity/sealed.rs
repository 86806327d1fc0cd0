//! Sealed boxes: anonymous public-key encryption to a member.
//!
//! Ephemeral X25519 agreement with the recipient's sealing key, the shared
//! secret hashed into a one-time ChaCha20-Poly1305 key. Layout:
//! `ephemeral_public (32) || ciphertext || tag (16)`.

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use x25519_dalek::{PublicKey as XPublic, StaticSecret};

use super::{KeyPair, SecretKey};
use crate::hash::{tag, Digest, TaggedHasher};

/// X25519 public key used only for sealing grant metadata.
pub type SealingKey = Digest;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SealError {
    #[error("sealed box is shorter than its header")]
    Truncated,
    #[error("sealed box failed authentication")]
    Authentication,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealedBox(#[serde(with = "hex_vec")] pub Vec<u8>);

fn static_secret(sk: &SecretKey) -> StaticSecret {
    let bytes = TaggedHasher::new(tag::SEALING_KEY).raw(sk.as_bytes()).finish().0;
    StaticSecret::from(bytes)
}

pub(super) fn sealing_key_for(sk: &SecretKey) -> SealingKey {
    Digest(XPublic::from(&static_secret(sk)).to_bytes())
}

fn box_key(shared: &[u8; 32], ephemeral: &[u8; 32], recipient: &[u8; 32]) -> [u8; 32] {
    TaggedHasher::new(tag::SEAL).raw(shared).raw(ephemeral).raw(recipient).finish().0
}

pub fn encrypt_to<R: RngCore + CryptoRng>(recipient: &SealingKey, message: &[u8], rng: &mut R) -> SealedBox {
    let mut eph_bytes = [0u8; 32];
    rng.fill_bytes(&mut eph_bytes);
    let eph = StaticSecret::from(eph_bytes);
    let eph_pub = XPublic::from(&eph).to_bytes();
    let shared = eph.diffie_hellman(&XPublic::from(recipient.0));
    let key = box_key(shared.as_bytes(), &eph_pub, &recipient.0);
    // one-time key, so a fixed nonce is fine
    let ct = ChaCha20Poly1305::new(Key::from_slice(&key))
        .encrypt(Nonce::from_slice(&[0u8; 12]), message)
        .expect("chacha20poly1305 encryption of an in-memory buffer");
    let mut out = Vec::with_capacity(32 + ct.len());
    out.extend_from_slice(&eph_pub);
    out.extend_from_slice(&ct);
    SealedBox(out)
}

pub fn decrypt(keys: &KeyPair, sealed: &SealedBox) -> Result<Vec<u8>, SealError> {
    if sealed.0.len() < 32 + 16 {
        return Err(SealError::Truncated);
    }
    let (eph_pub, ct) = sealed.0.split_at(32);
    let eph_pub: [u8; 32] = eph_pub.try_into().expect("split at 32");
    let secret = static_secret(&keys.secret_key);
    let recipient = XPublic::from(&secret).to_bytes();
    let shared = secret.diffie_hellman(&XPublic::from(eph_pub));
    let key = box_key(shared.as_bytes(), &eph_pub, &recipient);
    ChaCha20Poly1305::new(Key::from_slice(&key))
        .decrypt(Nonce::from_slice(&[0u8; 12]), ct)
        .map_err(|_| SealError::Authentication)
}

mod hex_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}
