//! Soulbound authentication tokens and the five-category interaction ledger.
//!
//! Auth tokens are one per identity commitment and one per owner. They can
//! never move; burning one blacklists its commitment forever. Interaction
//! balances are kept per `(owner, TokenType)` with per-pair restrictions for
//! graduated sanctions. T1 and T2 may move between members, T3 to T5 are
//! soulbound.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::hash::{Digest, PublicKey};
use crate::identity::{encrypt_to, SealedBox, SealingKey};

pub type TokenId = u64;
pub type GrantId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TokenType {
    /// Standard service deal.
    T1,
    /// High-risk deal, collateralised.
    T2,
    /// Dispute record.
    T3,
    /// Completion record.
    T4,
    /// Reputation standing.
    T5,
}

impl TokenType {
    pub const ALL: [TokenType; 5] = [Self::T1, Self::T2, Self::T3, Self::T4, Self::T5];

    pub fn is_soulbound(self) -> bool {
        matches!(self, Self::T3 | Self::T4 | Self::T5)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::T1 => "T1",
            Self::T2 => "T2",
            Self::T3 => "T3",
            Self::T4 => "T4",
            Self::T5 => "T5",
        }
    }
}

impl fmt::Display for TokenType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TokenType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown token type {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("onboarding verification failed")]
    DkycFailed,
    #[error("identity commitment already holds an auth token")]
    DuplicateIdentity,
    #[error("owner already holds an auth token")]
    DuplicateOwner,
    #[error("identity commitment was removed and may not rejoin")]
    BannedIdentity,
    #[error("auth tokens and T3-T5 grants are soulbound")]
    SoulboundViolation,
    #[error("unknown token {0}")]
    UnknownToken(TokenId),
    #[error("token {0} already burned")]
    AlreadyBurned(TokenId),
    #[error("not a member")]
    NotMember,
    #[error("{token_type} is restricted for this owner")]
    TypeRestricted { token_type: TokenType },
    #[error("quantity must be at least 1")]
    ZeroQuantity,
    #[error("insufficient {token_type} balance")]
    InsufficientBalance { token_type: TokenType },
    #[error("batch entry {index}: balance would go negative")]
    WouldGoNegative { index: usize },
    #[error("batch entry {index}: type restricted")]
    BatchTypeRestricted { index: usize },
    #[error("batch entry {index}: owner is not a member")]
    BatchNotMember { index: usize },
    #[error("snapshot is inconsistent: {0}")]
    BadSnapshot(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthToken {
    pub token_id: TokenId,
    pub owner: PublicKey,
    pub identity_commitment: Digest,
    pub minted_at: u64,
    pub burned: bool,
    pub burned_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivGrant {
    pub grant_id: GrantId,
    pub owner: PublicKey,
    pub token_type: TokenType,
    pub quantity: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenLedger {
    auth: BTreeMap<TokenId, AuthToken>,
    active_by_owner: BTreeMap<PublicKey, TokenId>,
    active_by_commitment: BTreeMap<Digest, TokenId>,
    burned_commitments: BTreeSet<Digest>,
    sealing_keys: BTreeMap<PublicKey, SealingKey>,
    balances: BTreeMap<(PublicKey, TokenType), u64>,
    restrictions: BTreeSet<(PublicKey, TokenType)>,
    grants: BTreeMap<GrantId, PrivGrant>,
    metadata: BTreeMap<GrantId, SealedBox>,
    next_token_id: TokenId,
    next_grant_id: GrantId,
}

impl TokenLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Mint the unique auth token for a verified identity.
    pub fn mint_auth(
        &mut self,
        owner: PublicKey,
        sealing_key: SealingKey,
        identity_commitment: Digest,
        dkyc_ok: bool,
        now: u64,
    ) -> Result<AuthToken, LedgerError> {
        if !dkyc_ok {
            return Err(LedgerError::DkycFailed);
        }
        if self.burned_commitments.contains(&identity_commitment) {
            return Err(LedgerError::BannedIdentity);
        }
        if self.active_by_commitment.contains_key(&identity_commitment) {
            return Err(LedgerError::DuplicateIdentity);
        }
        if self.active_by_owner.contains_key(&owner) {
            return Err(LedgerError::DuplicateOwner);
        }
        let token = AuthToken {
            token_id: self.next_token_id,
            owner,
            identity_commitment,
            minted_at: now,
            burned: false,
            burned_at: None,
        };
        self.next_token_id += 1;
        self.active_by_owner.insert(owner, token.token_id);
        self.active_by_commitment.insert(identity_commitment, token.token_id);
        self.sealing_keys.insert(owner, sealing_key);
        // a previously removed owner rejoining under a new identity starts unrestricted
        for t in TokenType::ALL {
            self.restrictions.remove(&(owner, t));
        }
        self.auth.insert(token.token_id, token.clone());
        Ok(token)
    }

    /// Always fails: auth tokens are soulbound. Checked before existence.
    pub fn transfer_auth(&mut self, _token_id: TokenId, _from: PublicKey, _to: PublicKey) -> Result<(), LedgerError> {
        Err(LedgerError::SoulboundViolation)
    }

    /// Burn an auth token, blacklist its commitment and freeze the owner's
    /// interaction balances.
    pub fn burn_auth(&mut self, token_id: TokenId, now: u64) -> Result<AuthToken, LedgerError> {
        let token = self.auth.get_mut(&token_id).ok_or(LedgerError::UnknownToken(token_id))?;
        if token.burned {
            return Err(LedgerError::AlreadyBurned(token_id));
        }
        token.burned = true;
        token.burned_at = Some(now);
        let token = token.clone();
        self.active_by_owner.remove(&token.owner);
        self.active_by_commitment.remove(&token.identity_commitment);
        self.burned_commitments.insert(token.identity_commitment);
        for t in TokenType::ALL {
            self.restrictions.insert((token.owner, t));
        }
        Ok(token)
    }

    pub fn is_member(&self, owner: &PublicKey) -> bool {
        self.active_by_owner.contains_key(owner)
    }

    pub fn active_token_of(&self, owner: &PublicKey) -> Option<&AuthToken> {
        self.active_by_owner.get(owner).and_then(|id| self.auth.get(id))
    }

    pub fn auth_token(&self, token_id: TokenId) -> Option<&AuthToken> {
        self.auth.get(&token_id)
    }

    pub fn auth_tokens(&self) -> impl Iterator<Item = &AuthToken> {
        self.auth.values()
    }

    /// Members in ascending public-key order.
    pub fn members(&self) -> Vec<PublicKey> {
        self.active_by_owner.keys().copied().collect()
    }

    pub fn member_count(&self) -> usize {
        self.active_by_owner.len()
    }

    pub fn is_banned(&self, commitment: &Digest) -> bool {
        self.burned_commitments.contains(commitment)
    }

    pub fn sealing_key(&self, owner: &PublicKey) -> Option<&SealingKey> {
        self.sealing_keys.get(owner)
    }

    pub fn balance(&self, owner: &PublicKey, token_type: TokenType) -> u64 {
        self.balances.get(&(*owner, token_type)).copied().unwrap_or(0)
    }

    pub fn is_restricted(&self, owner: &PublicKey, token_type: TokenType) -> bool {
        self.restrictions.contains(&(*owner, token_type))
    }

    fn check_usable(&self, owner: &PublicKey, token_type: TokenType) -> Result<(), LedgerError> {
        if !self.is_member(owner) {
            return Err(LedgerError::NotMember);
        }
        if self.is_restricted(owner, token_type) {
            return Err(LedgerError::TypeRestricted { token_type });
        }
        Ok(())
    }

    /// Mint an interaction grant; metadata is sealed to the owner and only
    /// the ciphertext is stored.
    pub fn mint_priv<R: RngCore + CryptoRng>(
        &mut self,
        owner: PublicKey,
        token_type: TokenType,
        quantity: u64,
        metadata: &[u8],
        rng: &mut R,
    ) -> Result<GrantId, LedgerError> {
        self.check_usable(&owner, token_type)?;
        if quantity == 0 {
            return Err(LedgerError::ZeroQuantity);
        }
        let sealing_key = *self.sealing_keys.get(&owner).ok_or(LedgerError::NotMember)?;
        let grant_id = self.next_grant_id;
        self.next_grant_id += 1;
        *self.balances.entry((owner, token_type)).or_insert(0) += quantity;
        self.grants.insert(grant_id, PrivGrant { grant_id, owner, token_type, quantity });
        self.metadata.insert(grant_id, encrypt_to(&sealing_key, metadata, rng));
        Ok(grant_id)
    }

    pub fn grant(&self, grant_id: GrantId) -> Option<&PrivGrant> {
        self.grants.get(&grant_id)
    }

    pub fn grants(&self) -> impl Iterator<Item = &PrivGrant> {
        self.grants.values()
    }

    pub fn grant_metadata(&self, grant_id: GrantId) -> Option<&SealedBox> {
        self.metadata.get(&grant_id)
    }

    /// Sender-initiated transfer of transferable interaction balance.
    pub fn transfer_priv(
        &mut self,
        from: PublicKey,
        to: PublicKey,
        token_type: TokenType,
        quantity: u64,
    ) -> Result<(), LedgerError> {
        if token_type.is_soulbound() {
            return Err(LedgerError::SoulboundViolation);
        }
        if quantity == 0 {
            return Err(LedgerError::ZeroQuantity);
        }
        self.check_usable(&from, token_type)?;
        self.check_usable(&to, token_type)?;
        if self.balance(&from, token_type) < quantity {
            return Err(LedgerError::InsufficientBalance { token_type });
        }
        *self.balances.get_mut(&(from, token_type)).expect("checked") -= quantity;
        *self.balances.entry((to, token_type)).or_insert(0) += quantity;
        Ok(())
    }

    /// Apply signed balance deltas atomically.
    pub fn batch_update_priv(&mut self, entries: &[(PublicKey, TokenType, i64)]) -> Result<(), LedgerError> {
        let mut staged: BTreeMap<(PublicKey, TokenType), i128> = BTreeMap::new();
        for (index, (owner, token_type, delta)) in entries.iter().enumerate() {
            if !self.is_member(owner) {
                return Err(LedgerError::BatchNotMember { index });
            }
            if self.is_restricted(owner, *token_type) {
                return Err(LedgerError::BatchTypeRestricted { index });
            }
            let slot = staged
                .entry((*owner, *token_type))
                .or_insert_with(|| self.balance(owner, *token_type) as i128);
            *slot += *delta as i128;
            if *slot < 0 || *slot > u64::MAX as i128 {
                return Err(LedgerError::WouldGoNegative { index });
            }
        }
        for (key, value) in staged {
            self.balances.insert(key, value as u64);
        }
        Ok(())
    }

    pub fn restrict_type(&mut self, owner: PublicKey, token_type: TokenType) -> Result<(), LedgerError> {
        if !self.is_member(&owner) {
            return Err(LedgerError::NotMember);
        }
        self.restrictions.insert((owner, token_type));
        Ok(())
    }

    pub fn lift_restriction(&mut self, owner: PublicKey, token_type: TokenType) -> Result<(), LedgerError> {
        if !self.is_member(&owner) {
            return Err(LedgerError::NotMember);
        }
        self.restrictions.remove(&(owner, token_type));
        Ok(())
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let mut balances: BTreeMap<PublicKey, BTreeMap<TokenType, u64>> = BTreeMap::new();
        for ((owner, t), q) in &self.balances {
            balances.entry(*owner).or_default().insert(*t, *q);
        }
        let mut restrictions: BTreeMap<PublicKey, BTreeSet<TokenType>> = BTreeMap::new();
        for (owner, t) in &self.restrictions {
            restrictions.entry(*owner).or_default().insert(*t);
        }
        LedgerSnapshot {
            auth_tokens: self.auth.values().cloned().collect(),
            banned_commitments: self.burned_commitments.clone(),
            sealing_keys: self.sealing_keys.clone(),
            balances,
            restrictions,
            grants: self
                .grants
                .values()
                .map(|g| GrantEntry { grant: g.clone(), metadata: self.metadata[&g.grant_id].clone() })
                .collect(),
        }
    }

    pub fn from_snapshot(s: LedgerSnapshot) -> Result<Self, LedgerError> {
        let mut ledger = TokenLedger::new();
        for t in s.auth_tokens {
            if ledger.auth.contains_key(&t.token_id) {
                return Err(LedgerError::BadSnapshot(format!("duplicate token id {}", t.token_id)));
            }
            if !t.burned {
                if ledger.active_by_owner.insert(t.owner, t.token_id).is_some()
                    || ledger.active_by_commitment.insert(t.identity_commitment, t.token_id).is_some()
                {
                    return Err(LedgerError::BadSnapshot("two active tokens share an owner or commitment".into()));
                }
            }
            ledger.next_token_id = ledger.next_token_id.max(t.token_id + 1);
            ledger.auth.insert(t.token_id, t);
        }
        ledger.burned_commitments = s.banned_commitments;
        if ledger.active_by_commitment.keys().any(|c| ledger.burned_commitments.contains(c)) {
            return Err(LedgerError::BadSnapshot("active token uses a banned commitment".into()));
        }
        ledger.sealing_keys = s.sealing_keys;
        for (owner, per) in s.balances {
            for (t, q) in per {
                ledger.balances.insert((owner, t), q);
            }
        }
        for (owner, set) in s.restrictions {
            for t in set {
                ledger.restrictions.insert((owner, t));
            }
        }
        for entry in s.grants {
            ledger.next_grant_id = ledger.next_grant_id.max(entry.grant.grant_id + 1);
            ledger.metadata.insert(entry.grant.grant_id, entry.metadata);
            ledger.grants.insert(entry.grant.grant_id, entry.grant);
        }
        Ok(ledger)
    }

    /// Canonical JSON document with stable key order.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(&self.snapshot()).expect("ledger snapshot serializes")
    }

    pub fn from_canonical_json(doc: &str) -> Result<Self, LedgerError> {
        let s: LedgerSnapshot = serde_json::from_str(doc).map_err(|e| LedgerError::BadSnapshot(e.to_string()))?;
        Self::from_snapshot(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantEntry {
    #[serde(flatten)]
    pub grant: PrivGrant,
    pub metadata: SealedBox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub auth_tokens: Vec<AuthToken>,
    pub banned_commitments: BTreeSet<Digest>,
    pub sealing_keys: BTreeMap<PublicKey, SealingKey>,
    pub balances: BTreeMap<PublicKey, BTreeMap<TokenType, u64>>,
    pub restrictions: BTreeMap<PublicKey, BTreeSet<TokenType>>,
    pub grants: Vec<GrantEntry>,
}
