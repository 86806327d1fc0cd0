//! Two-chain lock-and-mint bridge.
//!
//! Settlement -> Execution locks on the settlement chain and mints on the
//! execution chain. The return path burns on the execution chain and releases
//! previously locked funds on the settlement chain. Proofs are attestations
//! keyed by the bridge authority; each transfer id redeems at most once.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hash::{tag, Digest, PublicKey, TaggedHasher};

pub type TransferId = Digest;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BridgeError {
    #[error("insufficient funds: need {need}, have {have}")]
    InsufficientFunds { need: u64, have: u64 },
    #[error("amount must be positive")]
    ZeroAmount,
    #[error("proof attestation does not verify")]
    InvalidProof,
    #[error("transfer already redeemed")]
    AlreadyRedeemed,
    #[error("proof is not addressed to this chain")]
    WrongChain,
    #[error("transfer id already used on the source chain")]
    DuplicateTransfer,
    #[error("release exceeds locked funds")]
    InsufficientLocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainId {
    Settlement,
    Execution,
}

impl ChainId {
    pub fn other(self) -> ChainId {
        match self {
            ChainId::Settlement => ChainId::Execution,
            ChainId::Execution => ChainId::Settlement,
        }
    }

    fn byte(self) -> u8 {
        match self {
            ChainId::Settlement => 0,
            ChainId::Execution => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChainId::Settlement => "settlement",
            ChainId::Execution => "execution",
        }
    }
}

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferProof {
    pub transfer_id: TransferId,
    pub source: ChainId,
    pub recipient: PublicKey,
    pub asset: String,
    pub amount: u64,
    pub attestation: Digest,
}

/// Holder of the attestation key trusted by both chains.
#[derive(Clone)]
pub struct BridgeAuthority {
    key: [u8; 32],
}

impl fmt::Debug for BridgeAuthority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BridgeAuthority(..)")
    }
}

impl BridgeAuthority {
    pub fn new(key: [u8; 32]) -> Self {
        Self { key }
    }

    fn attest(&self, id: &TransferId, source: ChainId, recipient: &PublicKey, asset: &str, amount: u64) -> Digest {
        TaggedHasher::new(tag::ATTEST)
            .raw(&self.key)
            .raw(id.as_bytes())
            .raw(&[source.byte()])
            .raw(recipient.as_bytes())
            .field(asset.as_bytes())
            .u64(amount)
            .finish()
    }

    pub fn verify(&self, proof: &TransferProof) -> bool {
        self.attest(&proof.transfer_id, proof.source, &proof.recipient, &proof.asset, proof.amount)
            == proof.attestation
    }
}

/// `H(asset || amount || now || sender)`.
pub fn transfer_id(asset: &str, amount: u64, now: u64, sender: &PublicKey) -> TransferId {
    TaggedHasher::new(tag::TRANSFER)
        .field(asset.as_bytes())
        .u64(amount)
        .u64(now)
        .raw(sender.as_bytes())
        .finish()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locked {
    pub asset: String,
    pub amount: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Minted {
    pub recipient: PublicKey,
    pub asset: String,
    pub amount: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainState {
    pub chain_id: ChainId,
    balances: BTreeMap<(PublicKey, String), u64>,
    /// Outgoing transfers: locked (settlement) or burned (execution).
    pub outgoing: BTreeMap<TransferId, Locked>,
    /// Incoming transfers: minted (execution) or released (settlement).
    pub incoming: BTreeMap<TransferId, Minted>,
    redeemed: BTreeSet<TransferId>,
}

impl ChainState {
    pub fn new(chain_id: ChainId) -> Self {
        Self {
            chain_id,
            balances: BTreeMap::new(),
            outgoing: BTreeMap::new(),
            incoming: BTreeMap::new(),
            redeemed: BTreeSet::new(),
        }
    }

    pub fn balance(&self, owner: &PublicKey, asset: &str) -> u64 {
        self.balances.get(&(*owner, asset.to_string())).copied().unwrap_or(0)
    }

    pub fn balances(&self) -> impl Iterator<Item = (&PublicKey, &str, u64)> {
        self.balances.iter().map(|((k, a), v)| (k, a.as_str(), *v))
    }

    pub fn total_balance(&self, asset: &str) -> u64 {
        self.balances.iter().filter(|((_, a), _)| a == asset).map(|(_, v)| *v).sum()
    }

    /// Genesis allocation.
    pub fn credit(&mut self, owner: PublicKey, asset: &str, amount: u64) {
        *self.balances.entry((owner, asset.to_string())).or_insert(0) += amount;
    }

    pub fn debit(&mut self, owner: &PublicKey, asset: &str, amount: u64) -> Result<(), BridgeError> {
        let have = self.balance(owner, asset);
        if have < amount {
            return Err(BridgeError::InsufficientFunds { need: amount, have });
        }
        *self.balances.get_mut(&(*owner, asset.to_string())).expect("non-zero balance exists") -= amount;
        Ok(())
    }

    pub fn is_redeemed(&self, id: &TransferId) -> bool {
        self.redeemed.contains(id)
    }

    /// Total ever locked (settlement) or burned (execution) for `asset`.
    pub fn outgoing_total(&self, asset: &str) -> u64 {
        self.outgoing.values().filter(|l| l.asset == asset).map(|l| l.amount).sum()
    }

    pub fn incoming_total(&self, asset: &str) -> u64 {
        self.incoming.values().filter(|m| m.asset == asset).map(|m| m.amount).sum()
    }
}

/// Lock (or burn) on `source` and emit the attested proof.
pub fn initiate_transfer(
    source: &mut ChainState,
    authority: &BridgeAuthority,
    sender: &PublicKey,
    asset: &str,
    amount: u64,
    recipient: PublicKey,
    now: u64,
) -> Result<TransferProof, BridgeError> {
    if amount == 0 {
        return Err(BridgeError::ZeroAmount);
    }
    let id = transfer_id(asset, amount, now, sender);
    if source.outgoing.contains_key(&id) {
        return Err(BridgeError::DuplicateTransfer);
    }
    source.debit(sender, asset, amount)?;
    source.outgoing.insert(id, Locked { asset: asset.to_string(), amount });
    Ok(TransferProof {
        transfer_id: id,
        source: source.chain_id,
        recipient,
        asset: asset.to_string(),
        amount,
        attestation: authority.attest(&id, source.chain_id, &recipient, asset, amount),
    })
}

/// Verify and redeem a proof on `target`. On the execution chain this mints;
/// on the settlement chain it releases funds that `locked_pool` (the
/// settlement chain's outstanding locked amount for the asset) must cover.
pub fn complete_transfer(
    target: &mut ChainState,
    authority: &BridgeAuthority,
    proof: &TransferProof,
    locked_pool: Option<u64>,
) -> Result<(), BridgeError> {
    if !authority.verify(proof) {
        return Err(BridgeError::InvalidProof);
    }
    if proof.source == target.chain_id {
        return Err(BridgeError::WrongChain);
    }
    if target.redeemed.contains(&proof.transfer_id) {
        return Err(BridgeError::AlreadyRedeemed);
    }
    if let Some(pool) = locked_pool {
        if pool < proof.amount {
            return Err(BridgeError::InsufficientLocked);
        }
    }
    target.redeemed.insert(proof.transfer_id);
    target.credit(proof.recipient, &proof.asset, proof.amount);
    target.incoming.insert(
        proof.transfer_id,
        Minted { recipient: proof.recipient, asset: proof.asset.clone(), amount: proof.amount },
    );
    Ok(())
}

/// Both chains plus the authority, with pending proofs tracked for supply accounting.
#[derive(Debug, Clone)]
pub struct Bridge {
    pub settlement: ChainState,
    pub execution: ChainState,
    authority: BridgeAuthority,
    pending: BTreeMap<TransferId, TransferProof>,
}

impl Bridge {
    pub fn new(authority: BridgeAuthority) -> Self {
        Self {
            settlement: ChainState::new(ChainId::Settlement),
            execution: ChainState::new(ChainId::Execution),
            authority,
            pending: BTreeMap::new(),
        }
    }

    pub fn authority(&self) -> &BridgeAuthority {
        &self.authority
    }

    pub fn chain(&self, id: ChainId) -> &ChainState {
        match id {
            ChainId::Settlement => &self.settlement,
            ChainId::Execution => &self.execution,
        }
    }

    pub fn chain_mut(&mut self, id: ChainId) -> &mut ChainState {
        match id {
            ChainId::Settlement => &mut self.settlement,
            ChainId::Execution => &mut self.execution,
        }
    }

    pub fn initiate(
        &mut self,
        from: ChainId,
        sender: &PublicKey,
        asset: &str,
        amount: u64,
        recipient: PublicKey,
        now: u64,
    ) -> Result<TransferProof, BridgeError> {
        let proof = match from {
            ChainId::Settlement => {
                initiate_transfer(&mut self.settlement, &self.authority, sender, asset, amount, recipient, now)?
            }
            ChainId::Execution => {
                initiate_transfer(&mut self.execution, &self.authority, sender, asset, amount, recipient, now)?
            }
        };
        self.pending.insert(proof.transfer_id, proof.clone());
        Ok(proof)
    }

    pub fn complete(&mut self, proof: &TransferProof) -> Result<(), BridgeError> {
        let target = proof.source.other();
        let pool = match target {
            ChainId::Execution => None,
            ChainId::Settlement => Some(self.outstanding_locked(&proof.asset)),
        };
        let chain = match target {
            ChainId::Settlement => &mut self.settlement,
            ChainId::Execution => &mut self.execution,
        };
        complete_transfer(chain, &self.authority, proof, pool)?;
        self.pending.remove(&proof.transfer_id);
        Ok(())
    }

    /// Funds locked on settlement and not yet released back.
    pub fn outstanding_locked(&self, asset: &str) -> u64 {
        self.settlement.outgoing_total(asset) - self.settlement.incoming_total(asset)
    }

    /// Value that has left one chain and not yet arrived on the other.
    pub fn in_flight(&self, asset: &str) -> u64 {
        self.pending.values().filter(|p| p.asset == asset).map(|p| p.amount).sum()
    }

    pub fn pending(&self) -> impl Iterator<Item = &TransferProof> {
        self.pending.values()
    }

    /// Balances on both chains plus in-flight value.
    pub fn supply(&self, asset: &str) -> u64 {
        self.settlement.total_balance(asset) + self.execution.total_balance(asset) + self.in_flight(asset)
    }

    /// Every execution-chain mint is backed by a settlement lock of the same
    /// amount, and every settlement release by an execution burn. Returns the
    /// number of unbacked entries.
    pub fn unbacked_count(&self) -> usize {
        let unbacked = |into: &ChainState, from: &ChainState| {
            into.incoming
                .iter()
                .filter(|(id, m)| from.outgoing.get(*id).map_or(true, |l| l.amount != m.amount || l.asset != m.asset))
                .count()
        };
        unbacked(&self.execution, &self.settlement) + unbacked(&self.settlement, &self.execution)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::keygen;

    fn setup() -> (Bridge, PublicKey, PublicKey) {
        let mut b = Bridge::new(BridgeAuthority::new([9; 32]));
        let alice = keygen([1; 32]).public_key;
        let bob = keygen([2; 32]).public_key;
        b.settlement.credit(alice, "USDC", 500);
        (b, alice, bob)
    }

    #[test]
    fn lock_then_mint() {
        let (mut b, alice, bob) = setup();
        let proof = b.initiate(ChainId::Settlement, &alice, "USDC", 100, bob, 1).unwrap();
        assert_eq!(b.settlement.balance(&alice, "USDC"), 400);
        assert_eq!(b.settlement.outgoing[&proof.transfer_id].amount, 100);
        assert_eq!(b.supply("USDC"), 500);
        b.complete(&proof).unwrap();
        assert_eq!(b.execution.balance(&bob, "USDC"), 100);
        assert_eq!(b.supply("USDC"), 500);
        assert_eq!(b.complete(&proof), Err(BridgeError::AlreadyRedeemed));
        assert_eq!(b.execution.balance(&bob, "USDC"), 100);
        assert_eq!(b.unbacked_count(), 0);
    }

    #[test]
    fn initiate_guards_and_distinct_ids() {
        let (mut b, alice, bob) = setup();
        assert_eq!(b.initiate(ChainId::Settlement, &alice, "USDC", 0, bob, 1), Err(BridgeError::ZeroAmount));
        assert_eq!(
            b.initiate(ChainId::Settlement, &alice, "USDC", 501, bob, 1),
            Err(BridgeError::InsufficientFunds { need: 501, have: 500 })
        );
        let p1 = b.initiate(ChainId::Settlement, &alice, "USDC", 10, bob, 1).unwrap();
        let p2 = b.initiate(ChainId::Settlement, &alice, "USDC", 10, bob, 2).unwrap();
        assert_ne!(p1.transfer_id, p2.transfer_id);
        assert_eq!(b.initiate(ChainId::Settlement, &alice, "USDC", 10, bob, 2), Err(BridgeError::DuplicateTransfer));
        assert_ne!(transfer_id("USDC", 10, 2, &alice), transfer_id("USDC", 10, 2, &bob));
    }

    #[test]
    fn every_field_tamper_is_detected() {
        let (mut b, alice, bob) = setup();
        let p = b.initiate(ChainId::Settlement, &alice, "USDC", 100, bob, 1).unwrap();
        let mut tampered = vec![];
        let mut t = p.clone();
        t.transfer_id.0[0] ^= 1;
        tampered.push(t);
        let mut t = p.clone();
        t.recipient = alice;
        tampered.push(t);
        let mut t = p.clone();
        t.asset = "USDT".into();
        tampered.push(t);
        let mut t = p.clone();
        t.amount = 101;
        tampered.push(t);
        let mut t = p.clone();
        t.source = ChainId::Execution;
        tampered.push(t);
        let mut t = p.clone();
        t.attestation.0[31] ^= 1;
        tampered.push(t);
        for t in tampered {
            assert_eq!(b.complete(&t), Err(BridgeError::InvalidProof));
        }
        let forger = BridgeAuthority::new([8; 32]);
        assert!(!forger.verify(&p));
        b.complete(&p).unwrap();
    }

    #[test]
    fn return_path_burns_and_releases() {
        let (mut b, alice, bob) = setup();
        let p = b.initiate(ChainId::Settlement, &alice, "USDC", 100, bob, 1).unwrap();
        b.complete(&p).unwrap();
        let back = b.initiate(ChainId::Execution, &bob, "USDC", 60, alice, 2).unwrap();
        assert_eq!(b.supply("USDC"), 500);
        b.complete(&back).unwrap();
        assert_eq!(b.settlement.balance(&alice, "USDC"), 460);
        assert_eq!(b.execution.balance(&bob, "USDC"), 40);
        assert_eq!(b.outstanding_locked("USDC"), 40);
        assert_eq!(b.supply("USDC"), 500);
        assert_eq!(b.unbacked_count(), 0);
    }

    #[test]
    fn release_cannot_exceed_locked_pool() {
        let mut b = Bridge::new(BridgeAuthority::new([9; 32]));
        let bob = keygen([2; 32]).public_key;
        // native execution-chain funds were never locked on settlement
        b.execution.credit(bob, "USDC", 50);
        let p = b.initiate(ChainId::Execution, &bob, "USDC", 50, bob, 1).unwrap();
        assert_eq!(b.complete(&p), Err(BridgeError::InsufficientLocked));
    }

    #[test]
    fn proof_for_wrong_chain_rejected() {
        let (mut b, alice, bob) = setup();
        let p = b.initiate(ChainId::Settlement, &alice, "USDC", 100, bob, 1).unwrap();
        let auth = b.authority().clone();
        assert_eq!(complete_transfer(&mut b.settlement, &auth, &p, Some(1000)), Err(BridgeError::WrongChain));
    }
}
