//! The integrated state machine: ledgers, governance, deals and the bridge
//! behind one serialized context on a logical clock.
//!
//! Every state change emits exactly one [`EventRecord`](crate::events::EventRecord);
//! every refused operation emits one `*_rejected` record and returns the
//! error. Payment assets live on the execution chain; the settlement chain
//! only holds what has not been bridged over.

use std::collections::BTreeMap;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::bridge::{Bridge, BridgeAuthority, BridgeError, ChainId, TransferProof};
use crate::deals::{DealBook, DealError, DealId, DisputeStage, Outcome, Party};
use crate::events::{EventLog, Fields};
use crate::gas_model::{GasConfig, GasError, GasMeter, OpKind};
use crate::governance::{
    Ballot, DecisionRule, Disclosure, Governance, GovernanceConfig, GovernanceError, ProposalId, ProposalKind,
    ProposalStatus, Tally,
};
use crate::hash::{tag, Digest, PublicKey, TaggedHasher};
use crate::identity::{DkycPolicy, IdentityError, IdentityEscrow, KeyPair};
use crate::merkle::MemberTree;
use crate::rational::{self, Fraction};
use crate::reputation::{ReputationError, ReputationLedger};
use crate::token_ledger::{LedgerError, TokenId, TokenLedger, TokenType};

pub const PROVIDER_REWARD: i64 = 5;
pub const BUYER_REWARD: i64 = 1;
pub const DISPUTE_PENALTY: i64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DaoError {
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Governance(#[from] GovernanceError),
    #[error(transparent)]
    Deal(#[from] DealError),
    #[error(transparent)]
    Reputation(#[from] ReputationError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Gas(#[from] GasError),
    #[error("deal {0} has no dispute")]
    NoDispute(DealId),
    #[error("clock cannot move back from {now} to {to}")]
    ClockRegression { now: u64, to: u64 },
}

impl DaoError {
    /// Stable snake_case name of the innermost error variant, e.g. `duplicate_identity`.
    pub fn code(&self) -> String {
        let inner = match self {
            Self::Identity(e) => format!("{e:?}"),
            Self::Ledger(e) | Self::Governance(GovernanceError::Ledger(e)) => format!("{e:?}"),
            Self::Governance(e) => format!("{e:?}"),
            Self::Deal(e) => format!("{e:?}"),
            Self::Reputation(e) => format!("{e:?}"),
            Self::Bridge(e) => format!("{e:?}"),
            Self::Gas(e) => format!("{e:?}"),
            other => format!("{other:?}"),
        };
        let ident: String = inner.chars().take_while(|c| c.is_ascii_alphanumeric()).collect();
        snake_case(&ident)
    }
}

fn snake_case(ident: &str) -> String {
    let mut out = String::with_capacity(ident.len() + 4);
    for (i, c) in ident.chars().enumerate() {
        if c.is_ascii_uppercase() {
            if i > 0 {
                out.push('_');
            }
            out.push(c.to_ascii_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

/// Named, portable random stream for one module, split from the run seed.
pub fn rng_stream(seed: u64, module: &str) -> ChaCha20Rng {
    let d = TaggedHasher::new(tag::RNG).u64(seed).field(module.as_bytes()).finish();
    ChaCha20Rng::from_seed(d.0)
}

fn derived_secret(seed: u64, purpose: &str) -> [u8; 32] {
    TaggedHasher::new(tag::RNG).u64(seed).field(b"secret").field(purpose.as_bytes()).finish().0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaoConfig {
    pub governance: GovernanceConfig,
    pub removal_quorum: Fraction,
    pub dispute_quorum: Fraction,
    pub removal_rule: DecisionRule,
    pub voting_period: u64,
    pub mediation_window: u64,
    pub gas: GasConfig,
}

impl Default for DaoConfig {
    fn default() -> Self {
        Self {
            governance: GovernanceConfig::default(),
            removal_quorum: Fraction::new(1, 2),
            dispute_quorum: Fraction::new(1, 2),
            removal_rule: DecisionRule::QuorumMajority,
            voting_period: 10,
            mediation_window: 5,
            gas: GasConfig::default(),
        }
    }
}

/// What `enforce` did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Enforcement {
    pub outcome: Outcome,
    pub removal_proposal: Option<ProposalId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupplyViolation {
    pub asset: String,
    pub expected: u64,
    pub actual: u64,
}

#[derive(Debug, Clone)]
pub struct Dao {
    config: DaoConfig,
    now: u64,
    tokens: TokenLedger,
    reputation: ReputationLedger,
    governance: Governance,
    deals: DealBook,
    escrow: IdentityEscrow,
    policy: DkycPolicy,
    bridge: Bridge,
    log: EventLog,
    gas: GasMeter,
    trees: BTreeMap<ProposalId, MemberTree>,
    genesis: BTreeMap<String, u64>,
    seal_rng: ChaCha20Rng,
}

fn deal_fields(d: &crate::deals::Deal, now: u64) -> Fields {
    Fields::new()
        .with("deal_id", d.deal_id)
        .display("status", d.status)
        .with("amount", d.amount)
        .with("collateral", d.collateral)
        .display("token_type", d.token_type)
        .with("escrow_balance", d.escrow_balance)
        .with("timestamp", now)
}

impl Dao {
    pub fn new(config: DaoConfig, policy: DkycPolicy, seed: u64) -> Self {
        Self {
            governance: Governance::new(config.governance.clone()),
            config,
            now: 0,
            tokens: TokenLedger::new(),
            reputation: ReputationLedger::new(),
            deals: DealBook::new(),
            escrow: IdentityEscrow::new(derived_secret(seed, "escrow")),
            policy,
            bridge: Bridge::new(BridgeAuthority::new(derived_secret(seed, "bridge-authority"))),
            log: EventLog::new(),
            gas: GasMeter::default(),
            trees: BTreeMap::new(),
            genesis: BTreeMap::new(),
            seal_rng: rng_stream(seed, "token_ledger"),
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn config(&self) -> &DaoConfig {
        &self.config
    }

    pub fn tokens(&self) -> &TokenLedger {
        &self.tokens
    }

    pub fn reputation(&self) -> &ReputationLedger {
        &self.reputation
    }

    pub fn governance(&self) -> &Governance {
        &self.governance
    }

    pub fn deals(&self) -> &DealBook {
        &self.deals
    }

    pub fn escrow(&self) -> &IdentityEscrow {
        &self.escrow
    }

    /// Raw escrow access, used to inject storage faults.
    pub fn escrow_mut(&mut self) -> &mut IdentityEscrow {
        &mut self.escrow
    }

    pub fn policy(&self) -> &DkycPolicy {
        &self.policy
    }

    pub fn bridge(&self) -> &Bridge {
        &self.bridge
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    pub fn gas_meter(&self) -> &GasMeter {
        &self.gas
    }

    /// Member tree snapshotted when the proposal was created.
    pub fn tree_for(&self, proposal: &ProposalId) -> Option<&MemberTree> {
        self.trees.get(proposal)
    }

    pub fn balance(&self, owner: &PublicKey, asset: &str) -> u64 {
        self.bridge.execution.balance(owner, asset)
    }

    fn emit(&mut self, module: &str, kind: &str, fields: Fields) {
        self.log.emit(self.now, module, kind, fields);
    }

    /// Append a record for something that happened outside the state
    /// machine, e.g. an agent deviating from the script.
    pub fn note(&mut self, module: &str, kind: &str, fields: Fields) {
        self.emit(module, kind, fields);
    }

    fn reject<T>(&mut self, module: &str, op: &str, err: DaoError, fields: Fields) -> Result<T, DaoError> {
        let f = fields.with("reason", err.code()).display("error", &err);
        self.emit(module, &format!("{op}_rejected"), f);
        Err(err)
    }

    fn charge(&mut self, op: OpKind, n: u64) {
        self.gas.charge(&self.config.gas.gas, op, n).expect("gas table validated at load");
    }

    pub fn advance_clock(&mut self, to: u64) -> Result<(), DaoError> {
        if to < self.now {
            return self.reject("clock", "advance", DaoError::ClockRegression { now: self.now, to }, Fields::new());
        }
        if to > self.now {
            let from = self.now;
            self.now = to;
            self.emit("clock", "advanced", Fields::new().with("from", from).with("to", to));
        }
        Ok(())
    }

    /// Genesis allocation on either chain.
    pub fn credit(&mut self, owner: PublicKey, chain: ChainId, asset: &str, amount: u64) {
        self.bridge.chain_mut(chain).credit(owner, asset, amount);
        *self.genesis.entry(asset.to_string()).or_insert(0) += amount;
        self.emit(
            "bridge",
            "genesis_credit",
            Fields::new().display("owner", owner).display("chain", chain).with("asset", asset).with("amount", amount),
        );
    }

    // ---- onboarding -------------------------------------------------------

    pub fn onboard(&mut self, keys: &KeyPair, identity: &[u8]) -> Result<TokenId, DaoError> {
        let owner = keys.public_key;
        let base = Fields::new().display("owner", owner);
        let record = match self.escrow.prepare(identity) {
            Ok(r) => r,
            Err(e) => return self.reject("token_ledger", "onboard", e.into(), base),
        };
        let dkyc_ok = self.policy.verify(identity);
        let commitment = record.commitment;
        let token = match self.tokens.mint_auth(owner, keys.sealing_key(), commitment, dkyc_ok, self.now) {
            Ok(t) => t,
            Err(e) => return self.reject("token_ledger", "onboard", e.into(), base.display("commitment", commitment)),
        };
        self.charge(OpKind::AuthMint, 1);
        self.emit(
            "token_ledger",
            "auth_minted",
            Fields::new()
                .with("token_id", token.token_id)
                .display("owner", owner)
                .display("commitment", commitment)
                .with("member_count", self.tokens.member_count() as u64),
        );
        self.escrow.deposit(owner, record);
        self.emit("identity", "escrow_deposited", Fields::new().display("owner", owner).display("commitment", commitment));
        if self.reputation.score(&owner).is_none() {
            self.reputation.register(owner, self.now);
            self.emit("reputation", "registered", Fields::new().display("member", owner).with("score", 0));
        }
        Ok(token.token_id)
    }

    // ---- token ledger -----------------------------------------------------

    pub fn restrict(&mut self, owner: PublicKey, token_type: TokenType) -> Result<(), DaoError> {
        let f = Fields::new().display("owner", owner).display("token_type", token_type);
        match self.tokens.restrict_type(owner, token_type) {
            Ok(()) => {
                self.emit("token_ledger", "restricted", f);
                Ok(())
            }
            Err(e) => self.reject("token_ledger", "restrict", e.into(), f),
        }
    }

    pub fn lift_restriction(&mut self, owner: PublicKey, token_type: TokenType) -> Result<(), DaoError> {
        let f = Fields::new().display("owner", owner).display("token_type", token_type);
        match self.tokens.lift_restriction(owner, token_type) {
            Ok(()) => {
                self.emit("token_ledger", "restriction_lifted", f);
                Ok(())
            }
            Err(e) => self.reject("token_ledger", "lift_restriction", e.into(), f),
        }
    }

    /// Always refused; logged so scripted attempts show up.
    pub fn transfer_auth(&mut self, from: PublicKey, to: PublicKey) -> Result<(), DaoError> {
        let token_id = self.tokens.active_token_of(&from).map_or(u64::MAX, |t| t.token_id);
        let err = self.tokens.transfer_auth(token_id, from, to).expect_err("auth tokens are soulbound");
        self.reject("token_ledger", "transfer_auth", err.into(), Fields::new().display("from", from).display("to", to))
    }

    pub fn transfer_priv(&mut self, from: PublicKey, to: PublicKey, token_type: TokenType, quantity: u64) -> Result<(), DaoError> {
        let f = Fields::new()
            .display("from", from)
            .display("to", to)
            .display("token_type", token_type)
            .with("quantity", quantity);
        match self.tokens.transfer_priv(from, to, token_type, quantity) {
            Ok(()) => {
                self.emit("token_ledger", "priv_transferred", f);
                Ok(())
            }
            Err(e) => self.reject("token_ledger", "transfer_priv", e.into(), f),
        }
    }

    /// Interaction records are best effort: a party that cannot hold the
    /// type (restricted or removed) is skipped with a log entry.
    fn record_grants(&mut self, owners: &[PublicKey], token_type: TokenType, memo: &str) {
        let mut minted = 0;
        for owner in owners {
            match self.tokens.mint_priv(*owner, token_type, 1, memo.as_bytes(), &mut self.seal_rng) {
                Ok(grant_id) => {
                    minted += 1;
                    self.emit(
                        "token_ledger",
                        "grant_minted",
                        Fields::new()
                            .with("grant_id", grant_id)
                            .display("owner", owner)
                            .display("token_type", token_type)
                            .with("quantity", 1),
                    );
                }
                Err(e) => {
                    let err: DaoError = e.into();
                    self.emit(
                        "token_ledger",
                        "grant_skipped",
                        Fields::new().display("owner", owner).display("token_type", token_type).with("reason", err.code()),
                    );
                }
            }
        }
        if minted > 0 {
            self.charge(OpKind::PrivMint, minted);
        }
    }

    // ---- reputation -------------------------------------------------------

    fn rep_apply(&mut self, member: PublicKey, delta: i64, reason: &str) -> i64 {
        let applied = self.reputation.apply(&member, delta, reason, self.now).expect("parties are registered at onboarding");
        let score = self.reputation.score(&member).expect("registered");
        self.emit(
            "reputation",
            "updated",
            Fields::new()
                .display("member", member)
                .with("delta", delta)
                .with("applied", applied)
                .with("score", score)
                .with("reason", reason),
        );
        applied
    }

    pub fn reputation_batch(&mut self, members: &[PublicKey], deltas: &[i64]) -> Result<(), DaoError> {
        let f = Fields::new().with("n", members.len() as u64);
        if let Err(e) = self.reputation.batch_update(members, deltas, self.now) {
            return self.reject("reputation", "batch_update", e.into(), f);
        }
        if !members.is_empty() {
            self.charge(OpKind::BatchUpdate, members.len() as u64);
        }
        let members_hex: Vec<String> = members.iter().map(|m| m.to_hex()).collect();
        self.emit("reputation", "batch_updated", f.with("members", members_hex).with("deltas", deltas.to_vec()));
        Ok(())
    }

    // ---- deals ------------------------------------------------------------

    pub fn create_private_deal(
        &mut self,
        buyer: PublicKey,
        provider: PublicKey,
        token_type: TokenType,
        amount: u64,
        deadline: u64,
        payment_type: &str,
    ) -> Result<DealId, DaoError> {
        let f = Fields::new().display("buyer", buyer).display("provider", provider).with("amount", amount);
        let checks = (|| -> Result<(), DaoError> {
            for p in [&buyer, &provider] {
                if !self.tokens.is_member(p) {
                    return Err(LedgerError::NotMember.into());
                }
            }
            DealBook::validate_create(&buyer, &provider, token_type, amount, deadline, self.now)?;
            for p in [&buyer, &provider] {
                if self.tokens.is_restricted(p, token_type) {
                    return Err(LedgerError::TypeRestricted { token_type }.into());
                }
            }
            Ok(())
        })();
        if let Err(e) = checks {
            return self.reject("deals", "create", e, f);
        }
        let deal = self.deals.create(buyer, provider, token_type, amount, deadline, payment_type, self.now)?.clone();
        self.charge(OpKind::DealCreate, 1);
        let fields = deal_fields(&deal, self.now)
            .display("buyer", buyer)
            .display("provider", provider)
            .with("deadline", deadline)
            .with("payment_type", payment_type);
        self.emit("deals", "created", fields);
        self.record_grants(&[buyer, provider], token_type, &format!("deal:{}", deal.deal_id));
        Ok(deal.deal_id)
    }

    pub fn fund(&mut self, deal_id: DealId, caller: PublicKey) -> Result<(), DaoError> {
        let f = Fields::new().with("deal_id", deal_id).display("caller", caller);
        let asset = match self.deals.deal(deal_id) {
            Ok(d) => d.payment_type.clone(),
            Err(e) => return self.reject("deals", "fund", e.into(), f),
        };
        let available = self.bridge.execution.balance(&caller, &asset);
        let need = match self.deals.fund(deal_id, &caller, available, self.now) {
            Ok(n) => n,
            Err(e) => return self.reject("deals", "fund", e.into(), f),
        };
        self.bridge.execution.debit(&caller, &asset, need).expect("balance checked by fund");
        let deal = self.deals.deal(deal_id).expect("exists").clone();
        self.emit("deals", "funded", deal_fields(&deal, self.now).with("debited", need));
        Ok(())
    }

    pub fn mark_complete(&mut self, deal_id: DealId, caller: PublicKey) -> Result<(), DaoError> {
        if let Err(e) = self.deals.mark_complete(deal_id, &caller, self.now) {
            return self.reject("deals", "mark_complete", e.into(), Fields::new().with("deal_id", deal_id).display("caller", caller));
        }
        let deal = self.deals.deal(deal_id).expect("exists").clone();
        self.emit("deals", "provider_completed", deal_fields(&deal, self.now));
        Ok(())
    }

    pub fn confirm(&mut self, deal_id: DealId, caller: PublicKey) -> Result<(), DaoError> {
        let out = match self.deals.confirm(deal_id, &caller) {
            Ok(o) => o,
            Err(e) => return self.reject("deals", "confirm", e.into(), Fields::new().with("deal_id", deal_id).display("caller", caller)),
        };
        let deal = self.deals.deal(deal_id).expect("exists").clone();
        self.bridge.execution.credit(deal.buyer, &deal.payment_type, out.to_buyer);
        self.bridge.execution.credit(deal.provider, &deal.payment_type, out.to_provider);
        self.charge(OpKind::Confirm, 1);
        self.emit(
            "deals",
            "confirmed",
            deal_fields(&deal, self.now).with("to_buyer", out.to_buyer).with("to_provider", out.to_provider),
        );
        self.rep_apply(deal.provider, PROVIDER_REWARD, "completion_provider");
        self.rep_apply(deal.buyer, BUYER_REWARD, "completion_buyer");
        self.record_grants(&[deal.buyer, deal.provider], TokenType::T4, &format!("completed:{deal_id}"));
        Ok(())
    }

    pub fn initiate_dispute(&mut self, deal_id: DealId, complainant: PublicKey, evidence: &[u8]) -> Result<u64, DaoError> {
        let dispute_id = match self.deals.open_dispute(deal_id, &complainant, evidence) {
            Ok(id) => id,
            Err(e) => {
                let f = Fields::new().with("deal_id", deal_id).display("complainant", complainant);
                return self.reject("deals", "dispute", e.into(), f);
            }
        };
        let deal = self.deals.deal(deal_id).expect("exists").clone();
        self.charge(OpKind::Dispute, 1);
        self.emit(
            "deals",
            "dispute_opened",
            deal_fields(&deal, self.now).with("dispute_id", dispute_id).display("complainant", complainant),
        );
        let pb = -self.rep_apply(deal.buyer, -DISPUTE_PENALTY, "dispute_penalty");
        let pp = -self.rep_apply(deal.provider, -DISPUTE_PENALTY, "dispute_penalty");
        self.deals.record_penalties(dispute_id, pb as u64, pp as u64)?;
        self.record_grants(&[deal.buyer, deal.provider], TokenType::T3, &format!("dispute:{dispute_id}"));
        Ok(dispute_id)
    }

    fn dispute_of(&self, deal_id: DealId) -> Result<u64, DaoError> {
        self.deals.deal(deal_id)?.dispute.ok_or(DaoError::NoDispute(deal_id))
    }

    pub fn advance_to_mediation(&mut self, deal_id: DealId) -> Result<u64, DaoError> {
        let window = self.config.mediation_window;
        let res = self.dispute_of(deal_id).and_then(|id| Ok((id, self.deals.advance_to_mediation(id, self.now, window)?)));
        match res {
            Ok((dispute_id, deadline)) => {
                self.emit(
                    "deals",
                    "mediation_started",
                    Fields::new().with("deal_id", deal_id).with("dispute_id", dispute_id).with("deadline", deadline),
                );
                Ok(deadline)
            }
            Err(e) => self.reject("deals", "mediate", e, Fields::new().with("deal_id", deal_id)),
        }
    }

    pub fn settle(&mut self, deal_id: DealId, outcome: Outcome) -> Result<(), DaoError> {
        let now = self.now;
        let res = self.dispute_of(deal_id).and_then(|id| Ok(self.deals.record_settlement(id, outcome, now)?));
        let f = Fields::new().with("deal_id", deal_id).display("outcome", outcome);
        match res {
            Ok(()) => {
                self.emit("deals", "settlement_recorded", f);
                Ok(())
            }
            Err(e) => self.reject("deals", "settle", e, f),
        }
    }

    /// Mediation expired without settlement: put the complainant's remedy to a vote.
    pub fn mediation_timeout(&mut self, deal_id: DealId) -> Result<ProposalId, DaoError> {
        let f = Fields::new().with("deal_id", deal_id);
        let staged = (|| -> Result<(u64, Outcome, PublicKey), DaoError> {
            let dispute_id = self.dispute_of(deal_id)?;
            let proposed = self.deals.check_timeout(dispute_id, self.now)?;
            Ok((dispute_id, proposed, self.deals.dispute(dispute_id)?.complainant))
        })();
        let (dispute_id, proposed, complainant) = match staged {
            Ok(v) => v,
            Err(e) => return self.reject("deals", "mediation_timeout", e, f),
        };
        let kind = ProposalKind::DisputeResolution { dispute_id };
        let pid = self.open_proposal(complainant, kind, self.config.dispute_quorum, DecisionRule::QuorumMajority)?;
        self.deals.enter_voting(dispute_id, pid, proposed)?;
        self.emit(
            "deals",
            "voting_started",
            f.with("dispute_id", dispute_id).display("proposal_id", pid).display("proposed", proposed),
        );
        Ok(pid)
    }

    /// Apply the dispute outcome: a passed vote applies the proposed remedy,
    /// a failed one dismisses the complaint, and a mediated settlement
    /// applies as recorded.
    pub fn enforce(&mut self, deal_id: DealId) -> Result<Enforcement, DaoError> {
        let f = Fields::new().with("deal_id", deal_id);
        let decided = (|| -> Result<(u64, Outcome, Option<ProposalId>), DaoError> {
            let dispute_id = self.dispute_of(deal_id)?;
            let d = self.deals.dispute(dispute_id)?;
            match &d.stage {
                DisputeStage::Voting { proposal_id, proposed } => {
                    let p = self.governance.proposal(proposal_id).ok_or(GovernanceError::UnknownProposal)?;
                    match p.status {
                        ProposalStatus::Open => Err(DealError::VoteNotFinal.into()),
                        ProposalStatus::Passed | ProposalStatus::Executed => Ok((dispute_id, *proposed, Some(*proposal_id))),
                        ProposalStatus::Failed => Ok((dispute_id, d.rejected_outcome(), None)),
                    }
                }
                DisputeStage::Mediation { .. } if d.settlement.is_some() => {
                    Ok((dispute_id, d.settlement.expect("checked"), None))
                }
                other => Err(DealError::WrongStage(other.name().into()).into()),
            }
        })();
        let (dispute_id, outcome, passed) = match decided {
            Ok(v) => v,
            Err(e) => return self.reject("deals", "enforce", e, f),
        };
        let (_, out) = self.deals.enforce(dispute_id, outcome)?;
        let deal = self.deals.deal(deal_id).expect("exists").clone();
        self.bridge.execution.credit(deal.buyer, &deal.payment_type, out.to_buyer);
        self.bridge.execution.credit(deal.provider, &deal.payment_type, out.to_provider);
        self.emit(
            "deals",
            "resolved",
            deal_fields(&deal, self.now)
                .with("dispute_id", dispute_id)
                .display("outcome", outcome)
                .with("to_buyer", out.to_buyer)
                .with("to_provider", out.to_provider),
        );
        if let Some(pid) = passed {
            if self.governance.mark_executed(&pid).is_ok() {
                self.emit("governance", "executed", Fields::new().display("proposal_id", pid).display("status", ProposalStatus::Executed));
            }
        }
        if let Some(winner) = outcome.prevailing() {
            let d = self.deals.dispute(dispute_id).expect("exists");
            let penalty = match winner {
                Party::Buyer => d.penalty_buyer,
                Party::Provider => d.penalty_provider,
            };
            if penalty > 0 {
                self.rep_apply(deal.key_of(winner), penalty as i64, "penalty_refund");
            }
        }
        let mut removal_proposal = None;
        if let Outcome::RevokeAccess { offender } = outcome {
            let target = deal.key_of(offender);
            let initiator = deal.key_of(offender.other());
            if let Ok(pid) = self.propose_removal(initiator, target, None) {
                removal_proposal = Some(pid);
            }
        }
        Ok(Enforcement { outcome, removal_proposal })
    }

    // ---- governance -------------------------------------------------------

    fn open_proposal(
        &mut self,
        initiator: PublicKey,
        kind: ProposalKind,
        quorum: Fraction,
        rule: DecisionRule,
    ) -> Result<ProposalId, DaoError> {
        let f = Fields::new().display("initiator", initiator).with("kind", kind.name());
        let members = self.tokens.members();
        let tree = match MemberTree::build(&members) {
            Ok(t) => t,
            Err(_) => return self.reject("governance", "propose", GovernanceError::NotMember.into(), f),
        };
        let period = self.config.voting_period;
        let p = match self.governance.initiate_proposal(&initiator, kind, quorum, rule, period, self.now, &tree) {
            Ok(p) => p.clone(),
            Err(e) => return self.reject("governance", "propose", e.into(), f),
        };
        self.trees.insert(p.id, tree);
        self.charge(OpKind::ProposalCreate, 1);
        let mut fields = Fields::new()
            .display("proposal_id", p.id)
            .with("kind", p.kind.name())
            .display("root", p.member_root)
            .with("quorum", rational::display(&p.quorum))
            .with("deadline", p.voting_deadline)
            .with("member_count", p.member_count_at_creation)
            .display("status", p.status);
        if let ProposalKind::Removal { target } = p.kind {
            fields = fields.display("target", target);
        }
        self.emit("governance", "proposal_created", fields);
        Ok(p.id)
    }

    pub fn propose_removal(&mut self, initiator: PublicKey, target: PublicKey, quorum: Option<Fraction>) -> Result<ProposalId, DaoError> {
        if !self.tokens.is_member(&target) {
            let f = Fields::new().display("initiator", initiator).display("target", target);
            return self.reject("governance", "propose", GovernanceError::TargetNotMember.into(), f);
        }
        let q = quorum.unwrap_or(self.config.removal_quorum);
        self.open_proposal(initiator, ProposalKind::Removal { target }, q, self.config.removal_rule)
    }

    pub fn propose_generic(&mut self, initiator: PublicKey, payload: Digest, quorum: Fraction, rule: DecisionRule) -> Result<ProposalId, DaoError> {
        self.open_proposal(initiator, ProposalKind::Generic { payload }, quorum, rule)
    }

    pub fn cast_vote(&mut self, ballot: &Ballot) -> Result<(), DaoError> {
        let f = Fields::new()
            .display("proposal_id", ballot.proposal_id)
            .display("nullifier", ballot.nullifier)
            .display("commitment", ballot.commitment);
        match self.governance.cast_vote(ballot, self.now) {
            Ok(()) => {
                self.charge(OpKind::Vote, 1);
                self.emit("governance", "vote_cast", f);
                Ok(())
            }
            Err(e) => self.reject("governance", "vote", e.into(), f),
        }
    }

    pub fn finalize(&mut self, proposal: ProposalId, openings: &[(u8, [u8; 32])]) -> Result<(ProposalStatus, Tally), DaoError> {
        match self.governance.finalize(&proposal, openings, self.now) {
            Ok((status, tally)) => {
                self.emit(
                    "governance",
                    "finalized",
                    Fields::new()
                        .display("proposal_id", proposal)
                        .with("tally_total", tally.total)
                        .with("tally_yes", tally.yes)
                        .display("status", status),
                );
                Ok((status, tally))
            }
            Err(e) => self.reject("governance", "finalize", e.into(), Fields::new().display("proposal_id", proposal)),
        }
    }

    pub fn execute_removal(&mut self, proposal: ProposalId) -> Result<PublicKey, DaoError> {
        let token_id = self
            .governance
            .proposal(&proposal)
            .and_then(|p| match p.kind {
                ProposalKind::Removal { target } => self.tokens.active_token_of(&target),
                _ => None,
            })
            .map(|t| t.token_id);
        let target = match self.governance.execute_removal(&proposal, &mut self.tokens, self.now) {
            Ok(t) => t,
            Err(e) => return self.reject("governance", "execute_removal", e.into(), Fields::new().display("proposal_id", proposal)),
        };
        self.emit(
            "governance",
            "removal_executed",
            Fields::new().display("proposal_id", proposal).display("target", target).display("status", ProposalStatus::Executed),
        );
        let token = self.tokens.auth_token(token_id.expect("execute_removal succeeded")).expect("exists").clone();
        self.emit(
            "token_ledger",
            "auth_burned",
            Fields::new()
                .with("token_id", token.token_id)
                .display("owner", token.owner)
                .display("commitment", token.identity_commitment)
                .with("member_count", self.tokens.member_count() as u64),
        );
        Ok(target)
    }

    pub fn force_disclose(&mut self, target: PublicKey) -> Result<Disclosure, DaoError> {
        match self.governance.force_disclose(&target, &self.escrow, &self.tokens) {
            Ok(d) => {
                self.emit(
                    "governance",
                    "identity_disclosed",
                    Fields::new()
                        .display("target", target)
                        .with("identity", String::from_utf8_lossy(&d.identity).into_owned())
                        .display("commitment", d.commitment)
                        .display("proposal_id", d.authorized_by),
                );
                Ok(d)
            }
            Err(e) => self.reject("governance", "disclose", e.into(), Fields::new().display("target", target)),
        }
    }

    // ---- bridge -----------------------------------------------------------

    pub fn bridge_initiate(
        &mut self,
        from: ChainId,
        sender: PublicKey,
        asset: &str,
        amount: u64,
        recipient: PublicKey,
    ) -> Result<TransferProof, DaoError> {
        let direction = format!("{}_to_{}", from, from.other());
        let f = Fields::new().with("direction", direction.as_str()).with("asset", asset).with("amount", amount);
        match self.bridge.initiate(from, &sender, asset, amount, recipient, self.now) {
            Ok(proof) => {
                self.charge(OpKind::BridgeLock, 1);
                let status = if from == ChainId::Settlement { "locked" } else { "burned" };
                self.emit("bridge", "transfer", f.display("transfer_id", proof.transfer_id).with("status", status));
                Ok(proof)
            }
            Err(e) => self.reject("bridge", "transfer", e.into(), f.with("status", "rejected")),
        }
    }

    pub fn bridge_complete(&mut self, proof: &TransferProof) -> Result<(), DaoError> {
        let direction = format!("{}_to_{}", proof.source, proof.source.other());
        let f = Fields::new()
            .display("transfer_id", proof.transfer_id)
            .with("direction", direction)
            .with("asset", proof.asset.as_str())
            .with("amount", proof.amount);
        match self.bridge.complete(proof) {
            Ok(()) => {
                self.charge(OpKind::BridgeMint, 1);
                let status = if proof.source == ChainId::Settlement { "minted" } else { "released" };
                self.emit("bridge", "transfer", f.with("status", status));
                Ok(())
            }
            Err(e) => self.reject("bridge", "complete", e.into(), f.with("status", "rejected")),
        }
    }

    // ---- accounting -------------------------------------------------------

    /// Balances on both chains + deal escrow + in-flight bridge value.
    pub fn supply(&self, asset: &str) -> u64 {
        self.bridge.supply(asset) + self.deals.escrow_for(asset)
    }

    pub fn genesis_supply(&self) -> &BTreeMap<String, u64> {
        &self.genesis
    }

    /// Assets whose supply drifted from genesis, plus terminal deals holding escrow.
    pub fn conservation_violations(&self) -> Vec<SupplyViolation> {
        let mut out: Vec<SupplyViolation> = self
            .genesis
            .iter()
            .filter_map(|(asset, expected)| {
                let actual = self.supply(asset);
                (actual != *expected).then(|| SupplyViolation { asset: asset.clone(), expected: *expected, actual })
            })
            .collect();
        for d in self.deals.deals() {
            if d.status.is_terminal() && d.escrow_balance != 0 {
                out.push(SupplyViolation { asset: format!("deal:{}", d.deal_id), expected: 0, actual: d.escrow_balance });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use rand::RngCore;

    use super::*;
    use crate::identity::keygen;

    const USD: &str = "USDC";

    struct World {
        dao: Dao,
        keys: Vec<KeyPair>,
    }

    fn world(n: u8, balance: u64) -> World {
        let mut dao = Dao::new(DaoConfig::default(), DkycPolicy::new(true), 7);
        let keys: Vec<KeyPair> = (0..n).map(|i| keygen([i + 1; 32])).collect();
        for (i, k) in keys.iter().enumerate() {
            dao.onboard(k, format!("member-{i}").as_bytes()).unwrap();
            dao.credit(k.public_key, ChainId::Execution, USD, balance);
        }
        World { dao, keys }
    }

    fn pk(w: &World, i: usize) -> PublicKey {
        w.keys[i].public_key
    }

    fn vote_all(w: &mut World, pid: ProposalId, voters: &[usize], vote: u8) -> Vec<(u8, [u8; 32])> {
        let mut rng = rng_stream(1, "test-votes");
        let mut openings = Vec::new();
        for &i in voters {
            let mut r = [0u8; 32];
            rng.fill_bytes(&mut r);
            let p = w.dao.governance().proposal(&pid).unwrap().clone();
            let tree = w.dao.tree_for(&pid).unwrap().clone();
            let b = Ballot::honest(&w.keys[i], &p, &tree, vote, r).unwrap();
            w.dao.cast_vote(&b).unwrap();
            openings.push((vote, r));
        }
        openings
    }

    #[test]
    fn happy_path_deal() {
        let mut w = world(3, 1100);
        let (b, p) = (pk(&w, 0), pk(&w, 1));
        let id = w.dao.create_private_deal(b, p, TokenType::T2, 1000, 10, USD).unwrap();
        assert_eq!(w.dao.deals().deal(id).unwrap().collateral, 100);
        w.dao.fund(id, b).unwrap();
        assert_eq!(w.dao.balance(&b, USD), 0);
        w.dao.mark_complete(id, p).unwrap();
        w.dao.confirm(id, b).unwrap();
        assert_eq!(w.dao.balance(&b, USD), 100);
        assert_eq!(w.dao.balance(&p, USD), 2100);
        assert_eq!(w.dao.reputation().score(&p), Some(5));
        assert_eq!(w.dao.reputation().score(&b), Some(1));
        assert_eq!(w.dao.tokens().balance(&b, TokenType::T4), 1);
        assert_eq!(w.dao.tokens().balance(&p, TokenType::T2), 1);
        assert!(w.dao.conservation_violations().is_empty());
        assert!(w.dao.confirm(id, b).is_err());
    }

    #[test]
    fn restricted_party_cannot_open_deal() {
        let mut w = world(2, 0);
        let (b, p) = (pk(&w, 0), pk(&w, 1));
        w.dao.restrict(b, TokenType::T2).unwrap();
        let err = w.dao.create_private_deal(b, p, TokenType::T2, 1000, 10, USD).unwrap_err();
        assert_eq!(err, DaoError::Ledger(LedgerError::TypeRestricted { token_type: TokenType::T2 }));
        assert_eq!(err.code(), "type_restricted");
        assert!(w.dao.create_private_deal(b, p, TokenType::T1, 1000, 10, USD).is_ok());
        assert_eq!(w.dao.log().records().last().unwrap().kind, "grant_minted");
    }

    #[test]
    fn sybil_clone_rejected_by_commitment() {
        let mut w = world(1, 0);
        let clone = keygen([99; 32]);
        let err = w.dao.onboard(&clone, b"member-0").unwrap_err();
        assert_eq!(err.code(), "duplicate_identity");
        assert_eq!(w.dao.log().records().last().unwrap().kind, "onboard_rejected");
    }

    #[test]
    fn dispute_vote_refund_and_removal() {
        let mut w = world(10, 1100);
        let (b, p) = (pk(&w, 0), pk(&w, 1));
        w.dao.reputation_batch(&[b, p], &[3, 1]).unwrap();
        let id = w.dao.create_private_deal(b, p, TokenType::T2, 1000, 10, USD).unwrap();
        w.dao.fund(id, b).unwrap();
        w.dao.advance_clock(11).unwrap();
        w.dao.initiate_dispute(id, b, b"no delivery").unwrap();
        assert_eq!(w.dao.reputation().score(&b), Some(1));
        assert_eq!(w.dao.reputation().score(&p), Some(0));
        w.dao.advance_to_mediation(id).unwrap();
        assert_eq!(w.dao.mediation_timeout(id).unwrap_err().code(), "not_yet_expired");
        w.dao.advance_clock(16).unwrap();
        let pid = w.dao.mediation_timeout(id).unwrap();
        assert_eq!(w.dao.enforce(id).unwrap_err().code(), "vote_not_final");
        let openings = vote_all(&mut w, pid, &[0, 2, 3, 4, 5, 6], 1);
        w.dao.advance_clock(26).unwrap();
        assert_eq!(w.dao.finalize(pid, &openings).unwrap().0, ProposalStatus::Passed);
        let e = w.dao.enforce(id).unwrap();
        assert_eq!(e.outcome, Outcome::RefundBuyer);
        assert_eq!(w.dao.balance(&b, USD), 1100);
        // buyer prevailed: its penalty of 2 is refunded, provider's 1 is kept
        assert_eq!(w.dao.reputation().score(&b), Some(3));
        assert_eq!(w.dao.reputation().score(&p), Some(0));

        let rid = w.dao.propose_removal(b, p, None).unwrap();
        let openings = vote_all(&mut w, rid, &[0, 2, 3, 4, 5, 6], 1);
        assert_eq!(w.dao.force_disclose(p).unwrap_err().code(), "no_authorizing_proposal");
        w.dao.advance_clock(36).unwrap();
        w.dao.finalize(rid, &openings).unwrap();
        assert_eq!(w.dao.execute_removal(rid).unwrap(), p);
        assert!(!w.dao.tokens().is_member(&p));
        let d = w.dao.force_disclose(p).unwrap();
        assert_eq!(d.identity, b"member-1");
        assert!(w.dao.conservation_violations().is_empty());
        // banned identity cannot come back under a fresh key
        assert_eq!(w.dao.onboard(&keygen([77; 32]), b"member-1").unwrap_err().code(), "banned_identity");
    }

    #[test]
    fn failed_vote_dismisses_complaint() {
        let mut w = world(4, 1100);
        let (b, p) = (pk(&w, 0), pk(&w, 1));
        let id = w.dao.create_private_deal(b, p, TokenType::T2, 1000, 10, USD).unwrap();
        w.dao.fund(id, b).unwrap();
        w.dao.initiate_dispute(id, b, b"").unwrap();
        w.dao.advance_to_mediation(id).unwrap();
        w.dao.advance_clock(5).unwrap();
        let pid = w.dao.mediation_timeout(id).unwrap();
        w.dao.advance_clock(15).unwrap();
        assert_eq!(w.dao.finalize(pid, &[]).unwrap().0, ProposalStatus::Failed);
        assert_eq!(w.dao.enforce(id).unwrap().outcome, Outcome::PayProvider);
        assert_eq!(w.dao.balance(&p, USD), 2100);
        assert_eq!(w.dao.balance(&b, USD), 100);
    }

    #[test]
    fn revoke_access_settlement_opens_removal() {
        let mut w = world(3, 1100);
        let (b, p) = (pk(&w, 0), pk(&w, 1));
        let id = w.dao.create_private_deal(b, p, TokenType::T2, 1000, 10, USD).unwrap();
        w.dao.fund(id, b).unwrap();
        w.dao.initiate_dispute(id, p, b"").unwrap();
        w.dao.advance_to_mediation(id).unwrap();
        w.dao.settle(id, Outcome::RevokeAccess { offender: Party::Buyer }).unwrap();
        let e = w.dao.enforce(id).unwrap();
        let rid = e.removal_proposal.unwrap();
        assert!(matches!(w.dao.governance().proposal(&rid).unwrap().kind, ProposalKind::Removal { target } if target == b));
        assert_eq!(w.dao.balance(&p, USD), 1100 + 100);
        assert_eq!(w.dao.balance(&b, USD), 1000);
    }

    #[test]
    fn bridge_round_trip_conserves() {
        let mut w = world(2, 0);
        let (a, b) = (pk(&w, 0), pk(&w, 1));
        w.dao.credit(a, ChainId::Settlement, USD, 500);
        let proof = w.dao.bridge_initiate(ChainId::Settlement, a, USD, 200, b).unwrap();
        assert!(w.dao.conservation_violations().is_empty());
        w.dao.bridge_complete(&proof).unwrap();
        assert_eq!(w.dao.bridge_complete(&proof).unwrap_err().code(), "already_redeemed");
        assert_eq!(w.dao.balance(&b, USD), 200);
        let back = w.dao.bridge_initiate(ChainId::Execution, b, USD, 50, a).unwrap();
        w.dao.bridge_complete(&back).unwrap();
        assert_eq!(w.dao.bridge().settlement.balance(&a, USD), 350);
        assert!(w.dao.conservation_violations().is_empty());
        assert_eq!(w.dao.bridge().unbacked_count(), 0);
    }

    #[test]
    fn every_rejection_is_logged() {
        let mut w = world(2, 0);
        let before = w.dao.log().len();
        assert!(w.dao.fund(42, pk(&w, 0)).is_err());
        assert!(w.dao.transfer_auth(pk(&w, 0), pk(&w, 1)).is_err());
        assert!(w.dao.advance_clock(0).is_ok());
        w.dao.advance_clock(3).unwrap();
        assert!(w.dao.advance_clock(2).is_err());
        let kinds: Vec<&str> = w.dao.log().records()[before..].iter().map(|r| r.kind.as_str()).collect();
        assert_eq!(kinds, ["fund_rejected", "transfer_auth_rejected", "advanced", "advance_rejected"]);
    }
}
