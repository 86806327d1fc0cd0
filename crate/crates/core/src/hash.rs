//! Domain-separated SHA-256 hashing and the 32-byte value types built on it.
//!
//! Every digest in the protocol is produced by [`TaggedHasher`]: the domain
//! tag is absorbed first with a length prefix, so outputs of different
//! domains can never collide by construction of the preimage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

/// Domain separation tags.
pub mod tag {
    pub const SECRET_KEY: &[u8] = b"pnr-dao/secret-key/v1";
    pub const PUBLIC_KEY: &[u8] = b"pnr-dao/public-key/v1";
    pub const SEALING_KEY: &[u8] = b"pnr-dao/sealing-key/v1";
    pub const SEAL: &[u8] = b"pnr-dao/seal/v1";
    pub const COMMIT: &[u8] = b"pnr-dao/commit/v1";
    pub const ESCROW_NONCE: &[u8] = b"pnr-dao/escrow-nonce/v1";
    pub const LEAF: &[u8] = b"pnr-dao/merkle-leaf/v1";
    pub const NODE: &[u8] = b"pnr-dao/merkle-node/v1";
    pub const PROPOSAL: &[u8] = b"pnr-dao/proposal/v1";
    pub const NULLIFIER: &[u8] = b"pnr-dao/nullifier/v1";
    pub const VOTE: &[u8] = b"pnr-dao/vote/v1";
    pub const TRANSFER: &[u8] = b"pnr-dao/transfer/v1";
    pub const ATTEST: &[u8] = b"pnr-dao/attest/v1";
    pub const RNG: &[u8] = b"pnr-dao/rng/v1";
}

macro_rules! bytes32 {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; 32]);

        impl $name {
            pub const LEN: usize = 32;

            pub fn as_bytes(&self) -> &[u8; 32] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
                let mut out = [0u8; 32];
                hex::decode_to_slice(s, &mut out)?;
                Ok(Self(out))
            }
        }

        impl From<[u8; 32]> for $name {
            fn from(bytes: [u8; 32]) -> Self {
                Self(bytes)
            }
        }

        impl AsRef<[u8]> for $name {
            fn as_ref(&self) -> &[u8] {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({}..)", stringify!($name), &self.to_hex()[..12])
            }
        }

        impl FromStr for $name {
            type Err = hex::FromHexError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::from_hex(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Self::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

bytes32!(
    /// A 256-bit hash output.
    Digest
);

bytes32!(
    /// A member's public identifier, derived one-way from its secret key.
    PublicKey
);

/// Incremental SHA-256 with a length-prefixed domain tag.
pub struct TaggedHasher(Sha256);

impl TaggedHasher {
    pub fn new(tag: &[u8]) -> Self {
        let mut h = Sha256::new();
        h.update((tag.len() as u64).to_be_bytes());
        h.update(tag);
        Self(h)
    }

    /// Absorb raw bytes. Only safe for fixed-width fields.
    pub fn raw(mut self, bytes: &[u8]) -> Self {
        self.0.update(bytes);
        self
    }

    /// Absorb a variable-length field with a 64-bit big-endian length prefix.
    pub fn field(mut self, bytes: &[u8]) -> Self {
        self.0.update((bytes.len() as u64).to_be_bytes());
        self.0.update(bytes);
        self
    }

    pub fn u64(mut self, v: u64) -> Self {
        self.0.update(v.to_be_bytes());
        self
    }

    pub fn finish(self) -> Digest {
        Digest(self.0.finalize().into())
    }
}

/// Hash of fixed-width parts under a tag.
pub fn tagged(tag: &[u8], parts: &[&[u8]]) -> Digest {
    parts
        .iter()
        .fold(TaggedHasher::new(tag), |h, p| h.raw(p))
        .finish()
}
