//! Keys, identity commitments, the onboarding verifier and identity escrow.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::hash::{tag, Digest, PublicKey, TaggedHasher};

pub mod sealed;

pub use sealed::{decrypt, encrypt_to, SealError, SealedBox, SealingKey};

/// 32 bytes of commitment randomness.
pub type Nonce = [u8; 32];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentityError {
    #[error("identity payload is empty")]
    EmptyIdentity,
}

/// A member secret. Never serialized, never logged.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey([u8; 32]);

impl SecretKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub public_key: PublicKey,
    pub secret_key: SecretKey,
}

impl KeyPair {
    pub fn from_secret(secret_key: SecretKey) -> Self {
        Self { public_key: derive_public_key(&secret_key), secret_key }
    }

    /// X25519 key under which sealed boxes for this member are encrypted.
    pub fn sealing_key(&self) -> SealingKey {
        sealed::sealing_key_for(&self.secret_key)
    }
}

fn derive_public_key(sk: &SecretKey) -> PublicKey {
    PublicKey(TaggedHasher::new(tag::PUBLIC_KEY).raw(sk.as_bytes()).finish().0)
}

/// Deterministic key generation from a 32-byte seed.
///
/// The seed is whitened into the secret key and the public key is the tagged
/// hash of the secret key, so the public key reveals nothing about the seed.
pub fn keygen(seed: [u8; 32]) -> KeyPair {
    let sk = SecretKey(TaggedHasher::new(tag::SECRET_KEY).raw(&seed).finish().0);
    KeyPair::from_secret(sk)
}

/// `H(tag || len(identity) || identity || nonce)`.
pub fn commit_identity(identity: &[u8], nonce: &Nonce) -> Result<Digest, IdentityError> {
    if identity.is_empty() {
        return Err(IdentityError::EmptyIdentity);
    }
    Ok(TaggedHasher::new(tag::COMMIT).field(identity).raw(nonce).finish())
}

pub fn open_commitment(commitment: &Digest, identity: &[u8], nonce: &Nonce) -> bool {
    commit_identity(identity, nonce).map(|c| c == *commitment).unwrap_or(false)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityRecord {
    #[serde(with = "hex_bytes")]
    pub identity: Vec<u8>,
    #[serde(with = "hex_nonce")]
    pub nonce: Nonce,
    pub commitment: Digest,
}

impl IdentityRecord {
    pub fn new(identity: &[u8], nonce: Nonce) -> Result<Self, IdentityError> {
        let commitment = commit_identity(identity, &nonce)?;
        Ok(Self { identity: identity.to_vec(), nonce, commitment })
    }

    pub fn verifies(&self) -> bool {
        open_commitment(&self.commitment, &self.identity, &self.nonce)
    }
}

/// Table-driven stand-in for decentralized KYC. Only the boolean matters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DkycPolicy {
    table: BTreeMap<Vec<u8>, bool>,
    pub default_result: bool,
}

impl DkycPolicy {
    pub fn new(default_result: bool) -> Self {
        Self { table: BTreeMap::new(), default_result }
    }

    pub fn set(&mut self, identity: &[u8], verified: bool) {
        self.table.insert(identity.to_vec(), verified);
    }

    pub fn with(mut self, identity: &[u8], verified: bool) -> Self {
        self.set(identity, verified);
        self
    }

    pub fn verify(&self, identity: &[u8]) -> bool {
        self.table.get(identity).copied().unwrap_or(self.default_result)
    }
}

pub fn dkyc_verify(identity: &[u8], policy: &DkycPolicy) -> bool {
    policy.verify(identity)
}

/// Holds each member's commitment opening so a punitive vote can force
/// disclosure.
///
/// Nonces are a keyed function of the identity payload under the escrow
/// secret. The same real-world identity therefore always yields the same
/// commitment, which is what lets the ledger reject Sybil clones and banned
/// identities that come back with a fresh keypair.
#[derive(Debug, Clone)]
pub struct IdentityEscrow {
    secret: [u8; 32],
    records: BTreeMap<PublicKey, IdentityRecord>,
}

impl IdentityEscrow {
    pub fn new(secret: [u8; 32]) -> Self {
        Self { secret, records: BTreeMap::new() }
    }

    pub fn nonce_for(&self, identity: &[u8]) -> Nonce {
        TaggedHasher::new(tag::ESCROW_NONCE)
            .raw(&self.secret)
            .field(identity)
            .finish()
            .0
    }

    /// Build the record for `identity` without storing it.
    pub fn prepare(&self, identity: &[u8]) -> Result<IdentityRecord, IdentityError> {
        IdentityRecord::new(identity, self.nonce_for(identity))
    }

    pub fn deposit(&mut self, owner: PublicKey, record: IdentityRecord) {
        self.records.insert(owner, record);
    }

    pub fn get(&self, owner: &PublicKey) -> Option<&IdentityRecord> {
        self.records.get(owner)
    }

    /// Direct access to stored records, e.g. to simulate storage corruption.
    pub fn get_mut(&mut self, owner: &PublicKey) -> Option<&mut IdentityRecord> {
        self.records.get_mut(owner)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

mod hex_nonce {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(String::deserialize(d)?, &mut out).map_err(serde::de::Error::custom)?;
        Ok(out)
    }
}
