//! Proposals and the two voting rules.
//!
//! Private voting follows commit / Merkle membership / nullifier:
//!
//! 1. a proposal snapshots the member tree root;
//! 2. each ballot carries a vote commitment, a per-(member, proposal)
//!    nullifier and a proof object binding both to the root;
//! 3. after the deadline, openings are matched against the commitments and
//!    the quorum-then-strict-majority rule decides.
//!
//! The proof object is an *emulation* of a zero-knowledge proof: it carries
//! the prover's witness, the verifier re-derives every public value from it
//! and then drops it. Soundness is enforced exactly; zero knowledge is only
//! modeled, since the verifier technically sees the witness.
//!
//! The plain threshold rule (`yes >= Q * n`) is available per proposal via
//! [`DecisionRule::Threshold`] and as the standalone [`threshold_decision`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hash::{tag, tagged, Digest, PublicKey, TaggedHasher};
use crate::identity::{open_commitment, IdentityEscrow, KeyPair, SecretKey};
use crate::merkle::{member_leaf, verify_membership, MemberTree, MembershipProof};
use crate::rational::{self, Fraction};
use crate::token_ledger::{LedgerError, TokenLedger};

pub type ProposalId = Digest;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GovernanceError {
    #[error("initiator is not a member")]
    NotMember,
    #[error("quorum {0} is outside (0, 1] or not an allowed value")]
    BadQuorum(String),
    #[error("voting period must be positive")]
    ZeroPeriod,
    #[error("a proposal with this id already exists")]
    DuplicateProposal,
    #[error("unknown proposal")]
    UnknownProposal,
    #[error("voting is closed")]
    VotingClosed,
    #[error("vote must be 0 or 1")]
    MalformedVote,
    #[error("membership proof does not verify against the proposal root")]
    InvalidMembershipProof,
    #[error("vote proof does not bind commitment, nullifier and root")]
    InvalidVoteProof,
    #[error("nullifier already used for this proposal")]
    DoubleVote,
    #[error("voting is still open")]
    VotingStillOpen,
    #[error("openings do not match the recorded commitments")]
    OpeningMismatch,
    #[error("more votes than members")]
    TooManyVotes,
    #[error("proposal has not passed")]
    NotPassed,
    #[error("proposal already executed")]
    AlreadyExecuted,
    #[error("proposal kind does not support this action")]
    WrongKind,
    #[error("proposal already finalized")]
    AlreadyFinalized,
    #[error("removal target is not a member")]
    TargetNotMember,
    #[error("no executed removal authorizes disclosure")]
    NoAuthorizingProposal,
    #[error("escrow holds no opening for the target")]
    NoEscrowRecord,
    #[error("escrowed opening does not match the on-record commitment")]
    CommitmentMismatch,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProposalKind {
    Removal { target: PublicKey },
    DisputeResolution { dispute_id: u64 },
    Generic { payload: Digest },
}

impl ProposalKind {
    pub fn payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(33);
        match self {
            Self::Removal { target } => {
                out.push(0);
                out.extend_from_slice(target.as_bytes());
            }
            Self::DisputeResolution { dispute_id } => {
                out.push(1);
                out.extend_from_slice(&dispute_id.to_be_bytes());
            }
            Self::Generic { payload } => {
                out.push(2);
                out.extend_from_slice(payload.as_bytes());
            }
        }
        out
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Removal { .. } => "removal",
            Self::DisputeResolution { .. } => "dispute_resolution",
            Self::Generic { .. } => "generic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// `total >= Q * n` then `yes > total / 2`.
    #[default]
    QuorumMajority,
    /// `yes >= Q * n`.
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalStatus {
    Open,
    Passed,
    Failed,
    Executed,
}

impl fmt::Display for ProposalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Open => "open",
            Self::Passed => "passed",
            Self::Failed => "failed",
            Self::Executed => "executed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub total: u64,
    pub yes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub id: ProposalId,
    pub kind: ProposalKind,
    pub initiator: PublicKey,
    pub member_root: Digest,
    pub quorum: Fraction,
    pub rule: DecisionRule,
    pub created_at: u64,
    pub voting_deadline: u64,
    pub member_count_at_creation: u64,
    pub status: ProposalStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VoteState {
    pub commitments: Vec<Digest>,
    pub nullifiers: BTreeSet<Digest>,
    pub tally: Option<Tally>,
}

pub fn derive_nullifier(secret_key: &SecretKey, proposal_id: &ProposalId) -> Digest {
    tagged(tag::NULLIFIER, &[secret_key.as_bytes(), proposal_id.as_bytes()])
}

/// `H(tag || vote || randomness)`; the vote byte is taken as given so
/// out-of-domain values still hash.
pub fn vote_commitment(vote: u8, randomness: &[u8; 32]) -> Digest {
    tagged(tag::VOTE, &[&[vote], randomness])
}

pub fn proposal_id(kind: &ProposalKind, now: u64) -> ProposalId {
    TaggedHasher::new(tag::PROPOSAL).field(&kind.payload()).u64(now).finish()
}

/// Private witness consumed by the emulated verifier.
#[derive(Clone, PartialEq, Eq)]
struct VoteWitness {
    secret_key: SecretKey,
    vote: u8,
    randomness: [u8; 32],
}

impl fmt::Debug for VoteWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("VoteWitness(..)")
    }
}

/// Emulated zero-knowledge proof of "the committed vote is 0 or 1, the
/// nullifier belongs to a leaf under `root`".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteProof {
    pub commitment: Digest,
    pub nullifier: Digest,
    pub root: Digest,
    witness: VoteWitness,
}

impl VoteProof {
    fn verify(&self, membership: &MembershipProof, proposal: &ProposalId) -> Result<(), GovernanceError> {
        if self.witness.vote > 1 {
            return Err(GovernanceError::MalformedVote);
        }
        let voter = KeyPair::from_secret(self.witness.secret_key.clone()).public_key;
        if !verify_membership(&self.root, &member_leaf(&voter), membership) {
            return Err(GovernanceError::InvalidMembershipProof);
        }
        if vote_commitment(self.witness.vote, &self.witness.randomness) != self.commitment
            || derive_nullifier(&self.witness.secret_key, proposal) != self.nullifier
        {
            return Err(GovernanceError::InvalidVoteProof);
        }
        Ok(())
    }
}

/// What a voter submits. Built client-side by [`Ballot::prepare`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ballot {
    pub proposal_id: ProposalId,
    pub commitment: Digest,
    pub nullifier: Digest,
    pub membership_proof: MembershipProof,
    pub proof: VoteProof,
}

impl Ballot {
    pub fn prepare(
        voter: &KeyPair,
        proposal: &Proposal,
        vote: u8,
        membership_proof: MembershipProof,
        nullifier: Digest,
        randomness: [u8; 32],
    ) -> Self {
        let commitment = vote_commitment(vote, &randomness);
        Self {
            proposal_id: proposal.id,
            commitment,
            nullifier,
            membership_proof,
            proof: VoteProof {
                commitment,
                nullifier,
                root: proposal.member_root,
                witness: VoteWitness { secret_key: voter.secret_key.clone(), vote, randomness },
            },
        }
    }

    /// Convenience for honest voters: proof from `tree`, canonical nullifier.
    pub fn honest(
        voter: &KeyPair,
        proposal: &Proposal,
        tree: &MemberTree,
        vote: u8,
        randomness: [u8; 32],
    ) -> Result<Self, GovernanceError> {
        let proof = tree.prove(&voter.public_key).map_err(|_| GovernanceError::InvalidMembershipProof)?;
        let nullifier = derive_nullifier(&voter.secret_key, &proposal.id);
        Ok(Self::prepare(voter, proposal, vote, proof, nullifier, randomness))
    }
}

/// `sum(votes) >= Q * n`, compared exactly.
pub fn threshold_decision(votes: &[u8], quorum: Fraction, n: u64) -> Result<bool, GovernanceError> {
    if votes.len() as u64 > n {
        return Err(GovernanceError::TooManyVotes);
    }
    if votes.iter().any(|v| *v > 1) {
        return Err(GovernanceError::MalformedVote);
    }
    let yes: i128 = votes.iter().map(|v| *v as i128).sum();
    Ok(Fraction::from_integer(yes) >= quorum * Fraction::from_integer(n as i128))
}

/// The finalization rule applied to a revealed tally.
pub fn decide(rule: DecisionRule, tally: Tally, quorum: Fraction, n: u64) -> bool {
    let need = quorum * Fraction::from_integer(n as i128);
    match rule {
        DecisionRule::QuorumMajority => {
            // total >= ceil(Q * n) is the same test as total >= Q * n for integer totals
            Fraction::from_integer(tally.total as i128) >= need && 2 * tally.yes > tally.total
        }
        DecisionRule::Threshold => Fraction::from_integer(tally.yes as i128) >= need,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GovernanceConfig {
    pub allowed_quorums: Vec<Fraction>,
}

impl Default for GovernanceConfig {
    fn default() -> Self {
        Self { allowed_quorums: vec![Fraction::new(1, 2), Fraction::new(13, 20)] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disclosure {
    pub target: PublicKey,
    pub identity: Vec<u8>,
    pub commitment: Digest,
    pub authorized_by: ProposalId,
}

#[derive(Debug, Clone, Default)]
pub struct Governance {
    pub config: GovernanceConfig,
    proposals: BTreeMap<ProposalId, (Proposal, VoteState)>,
    order: Vec<ProposalId>,
}

impl Governance {
    pub fn new(config: GovernanceConfig) -> Self {
        Self { config, proposals: BTreeMap::new(), order: Vec::new() }
    }

    pub fn initiate_proposal(
        &mut self,
        initiator: &PublicKey,
        kind: ProposalKind,
        quorum: Fraction,
        rule: DecisionRule,
        period: u64,
        now: u64,
        tree: &MemberTree,
    ) -> Result<&Proposal, GovernanceError> {
        if !tree.contains(initiator) {
            return Err(GovernanceError::NotMember);
        }
        let zero = Fraction::from_integer(0);
        let one = Fraction::from_integer(1);
        if quorum <= zero || quorum > one || !self.config.allowed_quorums.contains(&quorum) {
            return Err(GovernanceError::BadQuorum(rational::display(&quorum)));
        }
        if period == 0 {
            return Err(GovernanceError::ZeroPeriod);
        }
        let id = proposal_id(&kind, now);
        if self.proposals.contains_key(&id) {
            return Err(GovernanceError::DuplicateProposal);
        }
        let proposal = Proposal {
            id,
            kind,
            initiator: *initiator,
            member_root: tree.root(),
            quorum,
            rule,
            created_at: now,
            voting_deadline: now.saturating_add(period),
            member_count_at_creation: tree.len() as u64,
            status: ProposalStatus::Open,
        };
        self.order.push(id);
        self.proposals.insert(id, (proposal, VoteState::default()));
        Ok(&self.proposals[&id].0)
    }

    pub fn proposal(&self, id: &ProposalId) -> Option<&Proposal> {
        self.proposals.get(id).map(|(p, _)| p)
    }

    pub fn votes(&self, id: &ProposalId) -> Option<&VoteState> {
        self.proposals.get(id).map(|(_, v)| v)
    }

    /// Proposals in creation order.
    pub fn proposals(&self) -> impl Iterator<Item = &Proposal> {
        self.order.iter().map(move |id| &self.proposals[id].0)
    }

    pub fn cast_vote(&mut self, ballot: &Ballot, now: u64) -> Result<(), GovernanceError> {
        let (proposal, state) = self.proposals.get_mut(&ballot.proposal_id).ok_or(GovernanceError::UnknownProposal)?;
        if proposal.status != ProposalStatus::Open || now >= proposal.voting_deadline {
            return Err(GovernanceError::VotingClosed);
        }
        if ballot.proof.root != proposal.member_root {
            // the proof was produced against some other member set
            return Err(GovernanceError::InvalidMembershipProof);
        }
        ballot.proof.verify(&ballot.membership_proof, &proposal.id)?;
        if ballot.proof.commitment != ballot.commitment || ballot.proof.nullifier != ballot.nullifier {
            return Err(GovernanceError::InvalidVoteProof);
        }
        if state.nullifiers.contains(&ballot.nullifier) {
            return Err(GovernanceError::DoubleVote);
        }
        state.nullifiers.insert(ballot.nullifier);
        state.commitments.push(ballot.commitment);
        Ok(())
    }

    /// Match openings to commitments as multisets and apply the proposal's rule.
    pub fn finalize(
        &mut self,
        id: &ProposalId,
        openings: &[(u8, [u8; 32])],
        now: u64,
    ) -> Result<(ProposalStatus, Tally), GovernanceError> {
        let (proposal, state) = self.proposals.get_mut(id).ok_or(GovernanceError::UnknownProposal)?;
        if proposal.status != ProposalStatus::Open {
            return Err(GovernanceError::AlreadyFinalized);
        }
        if now < proposal.voting_deadline {
            return Err(GovernanceError::VotingStillOpen);
        }
        if openings.len() != state.commitments.len() || openings.iter().any(|(v, _)| *v > 1) {
            return Err(GovernanceError::OpeningMismatch);
        }
        let mut opened: Vec<Digest> = openings.iter().map(|(v, r)| vote_commitment(*v, r)).collect();
        let mut recorded = state.commitments.clone();
        opened.sort();
        recorded.sort();
        if opened != recorded {
            return Err(GovernanceError::OpeningMismatch);
        }
        let tally = Tally { total: openings.len() as u64, yes: openings.iter().filter(|(v, _)| *v == 1).count() as u64 };
        let passed = decide(proposal.rule, tally, proposal.quorum, proposal.member_count_at_creation);
        proposal.status = if passed { ProposalStatus::Passed } else { ProposalStatus::Failed };
        state.tally = Some(tally);
        Ok((proposal.status, tally))
    }

    /// Mark a passed non-removal proposal as carried out.
    pub fn mark_executed(&mut self, id: &ProposalId) -> Result<(), GovernanceError> {
        let (proposal, _) = self.proposals.get_mut(id).ok_or(GovernanceError::UnknownProposal)?;
        match proposal.status {
            ProposalStatus::Executed => Err(GovernanceError::AlreadyExecuted),
            ProposalStatus::Passed => {
                proposal.status = ProposalStatus::Executed;
                Ok(())
            }
            _ => Err(GovernanceError::NotPassed),
        }
    }

    /// Burn the target's auth token (which blacklists its commitment and
    /// freezes its balances) and mark the proposal executed.
    pub fn execute_removal(
        &mut self,
        id: &ProposalId,
        tokens: &mut TokenLedger,
        now: u64,
    ) -> Result<PublicKey, GovernanceError> {
        let (proposal, _) = self.proposals.get_mut(id).ok_or(GovernanceError::UnknownProposal)?;
        let ProposalKind::Removal { target } = proposal.kind else {
            return Err(GovernanceError::WrongKind);
        };
        match proposal.status {
            ProposalStatus::Executed => return Err(GovernanceError::AlreadyExecuted),
            ProposalStatus::Passed => {}
            _ => return Err(GovernanceError::NotPassed),
        }
        let token_id = tokens.active_token_of(&target).ok_or(GovernanceError::TargetNotMember)?.token_id;
        tokens.burn_auth(token_id, now)?;
        proposal.status = ProposalStatus::Executed;
        Ok(target)
    }

    pub fn executed_removal_against(&self, target: &PublicKey) -> Option<&Proposal> {
        self.proposals().find(|p| {
            p.status == ProposalStatus::Executed && matches!(p.kind, ProposalKind::Removal { target: t } if t == *target)
        })
    }

    /// Open the target's escrowed identity commitment. Requires an executed
    /// removal against the target.
    pub fn force_disclose(
        &self,
        target: &PublicKey,
        escrow: &IdentityEscrow,
        tokens: &TokenLedger,
    ) -> Result<Disclosure, GovernanceError> {
        let authorizing = self.executed_removal_against(target).ok_or(GovernanceError::NoAuthorizingProposal)?;
        let on_record = tokens
            .auth_tokens()
            .filter(|t| t.owner == *target && t.burned)
            .last()
            .map(|t| t.identity_commitment)
            .ok_or(GovernanceError::NoAuthorizingProposal)?;
        let record = escrow.get(target).ok_or(GovernanceError::NoEscrowRecord)?;
        if !open_commitment(&on_record, &record.identity, &record.nonce) {
            return Err(GovernanceError::CommitmentMismatch);
        }
        Ok(Disclosure {
            target: *target,
            identity: record.identity.clone(),
            commitment: on_record,
            authorized_by: authorizing.id,
        })
    }
}
