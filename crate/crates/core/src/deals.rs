//! Private deal and dispute state machines.
//!
//! [`DealBook`] owns deal and dispute records and enforces every status and
//! role guard that does not need outside state. Membership, balances,
//! reputation and record grants are wired in by [`crate::dao::Dao`].
//!
//! ```text
//! Created -> Funded -> ProviderCompleted -> Confirmed
//!              \              /
//!               +-> Disputed -+-> Resolved
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::governance::ProposalId;
use crate::hash::PublicKey;
use crate::token_ledger::TokenType;

pub type DealId = u64;
pub type DisputeId = u64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DealError {
    #[error("deal token type must be T1 or T2, got {0}")]
    WrongType(TokenType),
    #[error("buyer and provider must differ")]
    SelfDeal,
    #[error("amount must be positive")]
    ZeroAmount,
    #[error("deadline is not in the future")]
    PastDeadline,
    #[error("unknown deal {0}")]
    UnknownDeal(DealId),
    #[error("unknown dispute {0}")]
    UnknownDispute(DisputeId),
    #[error("caller may not perform this action")]
    WrongCaller,
    #[error("insufficient funds: need {need}, have {have}")]
    InsufficientFunds { need: u64, have: u64 },
    #[error("deadline passed")]
    DeadlinePassed,
    #[error("action not allowed in status {0}")]
    WrongState(DealStatus),
    #[error("complainant is not a party to the deal")]
    NotParty,
    #[error("deal already has an open dispute")]
    DuplicateDispute,
    #[error("action not allowed in dispute stage {0}")]
    WrongStage(String),
    #[error("mediation window has not expired")]
    NotYetExpired,
    #[error("linked vote is not finalized")]
    VoteNotFinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DealStatus {
    Created,
    Funded,
    ProviderCompleted,
    Confirmed,
    Disputed,
    Resolved,
}

impl DealStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Confirmed | Self::Resolved)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Created => "created",
            Self::Funded => "funded",
            Self::ProviderCompleted => "provider_completed",
            Self::Confirmed => "confirmed",
            Self::Disputed => "disputed",
            Self::Resolved => "resolved",
        }
    }

    /// Edges of the declared status graph.
    pub fn can_move_to(self, next: DealStatus) -> bool {
        use DealStatus::*;
        matches!(
            (self, next),
            (Created, Funded)
                | (Funded, ProviderCompleted)
                | (Funded, Disputed)
                | (ProviderCompleted, Confirmed)
                | (ProviderCompleted, Disputed)
                | (Disputed, Resolved)
        )
    }
}

impl fmt::Display for DealStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Buyer,
    Provider,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Buyer => Party::Provider,
            Party::Provider => Party::Buyer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum Outcome {
    RefundBuyer,
    PayProvider,
    SplitEscrow,
    RevokeAccess { offender: Party },
}

impl Outcome {
    /// Party whose temporary penalty is refunded.
    pub fn prevailing(self) -> Option<Party> {
        match self {
            Outcome::RefundBuyer => Some(Party::Buyer),
            Outcome::PayProvider => Some(Party::Provider),
            Outcome::SplitEscrow => None,
            Outcome::RevokeAccess { offender } => Some(offender.other()),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::RefundBuyer => "refund_buyer",
            Outcome::PayProvider => "pay_provider",
            Outcome::SplitEscrow => "split_escrow",
            Outcome::RevokeAccess { offender: Party::Buyer } => "revoke_access_buyer",
            Outcome::RevokeAccess { offender: Party::Provider } => "revoke_access_provider",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "refund_buyer" => Outcome::RefundBuyer,
            "pay_provider" => Outcome::PayProvider,
            "split_escrow" => Outcome::SplitEscrow,
            "revoke_access_buyer" => Outcome::RevokeAccess { offender: Party::Buyer },
            "revoke_access_provider" => Outcome::RevokeAccess { offender: Party::Provider },
            other => return Err(format!("unknown outcome {other:?}")),
        })
    }
}

/// How escrow leaves a deal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Distribution {
    pub to_buyer: u64,
    pub to_provider: u64,
}

impl Distribution {
    pub fn total(&self) -> u64 {
        self.to_buyer + self.to_provider
    }
}

/// Escrow split for a dispute outcome. The buyer receives the floor half of
/// an odd split; collateral goes back to the buyer unless the buyer is the
/// offender in a revocation, in which case it is forfeited to the provider.
pub fn distribute(outcome: Outcome, amount: u64, collateral: u64) -> Distribution {
    match outcome {
        Outcome::RefundBuyer | Outcome::RevokeAccess { offender: Party::Provider } => {
            Distribution { to_buyer: amount + collateral, to_provider: 0 }
        }
        Outcome::RevokeAccess { offender: Party::Buyer } => Distribution { to_buyer: amount, to_provider: collateral },
        Outcome::PayProvider => Distribution { to_buyer: collateral, to_provider: amount },
        Outcome::SplitEscrow => {
            let half = amount / 2;
            Distribution { to_buyer: half + collateral, to_provider: amount - half }
        }
    }
}

/// Zero for T1, `floor(amount / 10)` for T2.
pub fn required_collateral(token_type: TokenType, amount: u64) -> Result<u64, DealError> {
    match token_type {
        TokenType::T1 => Ok(0),
        TokenType::T2 => Ok(amount / 10),
        other => Err(DealError::WrongType(other)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deal {
    pub deal_id: DealId,
    pub buyer: PublicKey,
    pub provider: PublicKey,
    pub token_type: TokenType,
    pub amount: u64,
    pub deadline: u64,
    pub collateral: u64,
    pub escrow_balance: u64,
    pub status: DealStatus,
    pub payment_type: String,
    pub created_at: u64,
    pub dispute: Option<DisputeId>,
}

impl Deal {
    pub fn party_of(&self, who: &PublicKey) -> Option<Party> {
        if *who == self.buyer {
            Some(Party::Buyer)
        } else if *who == self.provider {
            Some(Party::Provider)
        } else {
            None
        }
    }

    pub fn key_of(&self, party: Party) -> PublicKey {
        match party {
            Party::Buyer => self.buyer,
            Party::Provider => self.provider,
        }
    }

    fn advance(&mut self, next: DealStatus) {
        debug_assert!(self.status.can_move_to(next), "{} -> {}", self.status, next);
        self.status = next;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "stage")]
pub enum DisputeStage {
    Initiated,
    Mediation { deadline: u64 },
    Voting { proposal_id: ProposalId, proposed: Outcome },
    Enforced { outcome: Outcome },
}

impl DisputeStage {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Initiated => "initiated",
            Self::Mediation { .. } => "mediation",
            Self::Voting { .. } => "voting",
            Self::Enforced { .. } => "enforced",
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Self::Initiated => 0,
            Self::Mediation { .. } => 1,
            Self::Voting { .. } => 2,
            Self::Enforced { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dispute {
    pub dispute_id: DisputeId,
    pub deal_id: DealId,
    pub complainant: PublicKey,
    pub complainant_party: Party,
    pub evidence: Vec<u8>,
    pub stage: DisputeStage,
    pub settlement: Option<Outcome>,
    /// Reputation actually deducted at initiation, per party.
    pub penalty_buyer: u64,
    pub penalty_provider: u64,
}

impl Dispute {
    /// Outcome put to the vote when mediation times out: the complainant's remedy.
    pub fn proposed_outcome(&self) -> Outcome {
        match self.complainant_party {
            Party::Buyer => Outcome::RefundBuyer,
            Party::Provider => Outcome::PayProvider,
        }
    }

    /// Outcome applied when the vote on `proposed` fails: the complaint is dismissed.
    pub fn rejected_outcome(&self) -> Outcome {
        match self.complainant_party {
            Party::Buyer => Outcome::PayProvider,
            Party::Provider => Outcome::RefundBuyer,
        }
    }

    fn advance(&mut self, next: DisputeStage) {
        debug_assert!(next.rank() > self.stage.rank());
        self.stage = next;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DealBook {
    deals: BTreeMap<DealId, Deal>,
    disputes: BTreeMap<DisputeId, Dispute>,
    next_deal: DealId,
    next_dispute: DisputeId,
}

impl DealBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn deal(&self, id: DealId) -> Result<&Deal, DealError> {
        self.deals.get(&id).ok_or(DealError::UnknownDeal(id))
    }

    pub fn dispute(&self, id: DisputeId) -> Result<&Dispute, DealError> {
        self.disputes.get(&id).ok_or(DealError::UnknownDispute(id))
    }

    pub fn deals(&self) -> impl Iterator<Item = &Deal> {
        self.deals.values()
    }

    pub fn disputes(&self) -> impl Iterator<Item = &Dispute> {
        self.disputes.values()
    }

    pub fn total_escrow(&self) -> u64 {
        self.deals.values().map(|d| d.escrow_balance).sum()
    }

    pub fn escrow_for(&self, asset: &str) -> u64 {
        self.deals.values().filter(|d| d.payment_type == asset).map(|d| d.escrow_balance).sum()
    }

    fn deal_mut(&mut self, id: DealId) -> Result<&mut Deal, DealError> {
        self.deals.get_mut(&id).ok_or(DealError::UnknownDeal(id))
    }

    fn dispute_mut(&mut self, id: DisputeId) -> Result<&mut Dispute, DealError> {
        self.disputes.get_mut(&id).ok_or(DealError::UnknownDispute(id))
    }

    /// Checks that need no outside state. Returns the required collateral.
    pub fn validate_create(
        buyer: &PublicKey,
        provider: &PublicKey,
        token_type: TokenType,
        amount: u64,
        deadline: u64,
        now: u64,
    ) -> Result<u64, DealError> {
        let collateral = required_collateral(token_type, amount)?;
        if buyer == provider {
            return Err(DealError::SelfDeal);
        }
        if amount == 0 {
            return Err(DealError::ZeroAmount);
        }
        if deadline <= now {
            return Err(DealError::PastDeadline);
        }
        Ok(collateral)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn create(
        &mut self,
        buyer: PublicKey,
        provider: PublicKey,
        token_type: TokenType,
        amount: u64,
        deadline: u64,
        payment_type: &str,
        now: u64,
    ) -> Result<&Deal, DealError> {
        let collateral = Self::validate_create(&buyer, &provider, token_type, amount, deadline, now)?;
        let deal_id = self.next_deal;
        self.next_deal += 1;
        self.deals.insert(
            deal_id,
            Deal {
                deal_id,
                buyer,
                provider,
                token_type,
                amount,
                deadline,
                collateral,
                escrow_balance: 0,
                status: DealStatus::Created,
                payment_type: payment_type.to_string(),
                created_at: now,
                dispute: None,
            },
        );
        Ok(&self.deals[&deal_id])
    }

    /// Move the deal to Funded; the caller debits `amount + collateral`
    /// from the buyer, which `available` must cover.
    pub fn fund(&mut self, id: DealId, caller: &PublicKey, available: u64, now: u64) -> Result<u64, DealError> {
        let deal = self.deal_mut(id)?;
        if deal.status != DealStatus::Created {
            return Err(DealError::WrongState(deal.status));
        }
        if *caller != deal.buyer {
            return Err(DealError::WrongCaller);
        }
        if now >= deal.deadline {
            return Err(DealError::DeadlinePassed);
        }
        let need = deal.amount + deal.collateral;
        if available < need {
            return Err(DealError::InsufficientFunds { need, have: available });
        }
        deal.escrow_balance = need;
        deal.advance(DealStatus::Funded);
        Ok(need)
    }

    pub fn mark_complete(&mut self, id: DealId, caller: &PublicKey, now: u64) -> Result<(), DealError> {
        let deal = self.deal_mut(id)?;
        if deal.status != DealStatus::Funded {
            return Err(DealError::WrongState(deal.status));
        }
        if *caller != deal.provider {
            return Err(DealError::WrongCaller);
        }
        if now > deal.deadline {
            return Err(DealError::DeadlinePassed);
        }
        deal.advance(DealStatus::ProviderCompleted);
        Ok(())
    }

    /// Release escrow: amount to the provider, collateral back to the buyer.
    pub fn confirm(&mut self, id: DealId, caller: &PublicKey) -> Result<Distribution, DealError> {
        let deal = self.deal_mut(id)?;
        if deal.status != DealStatus::ProviderCompleted {
            return Err(DealError::WrongState(deal.status));
        }
        if *caller != deal.buyer {
            return Err(DealError::WrongCaller);
        }
        let out = Distribution { to_buyer: deal.collateral, to_provider: deal.amount };
        debug_assert_eq!(out.total(), deal.escrow_balance);
        deal.escrow_balance = 0;
        deal.advance(DealStatus::Confirmed);
        Ok(out)
    }

    pub fn open_dispute(
        &mut self,
        deal_id: DealId,
        complainant: &PublicKey,
        evidence: &[u8],
    ) -> Result<DisputeId, DealError> {
        let dispute_id = self.next_dispute;
        let deal = self.deal_mut(deal_id)?;
        let party = deal.party_of(complainant).ok_or(DealError::NotParty)?;
        if deal.dispute.is_some() {
            return Err(DealError::DuplicateDispute);
        }
        if !matches!(deal.status, DealStatus::Funded | DealStatus::ProviderCompleted) {
            return Err(DealError::WrongState(deal.status));
        }
        deal.advance(DealStatus::Disputed);
        deal.dispute = Some(dispute_id);
        self.next_dispute += 1;
        self.disputes.insert(
            dispute_id,
            Dispute {
                dispute_id,
                deal_id,
                complainant: *complainant,
                complainant_party: party,
                evidence: evidence.to_vec(),
                stage: DisputeStage::Initiated,
                settlement: None,
                penalty_buyer: 0,
                penalty_provider: 0,
            },
        );
        Ok(dispute_id)
    }

    pub fn record_penalties(&mut self, id: DisputeId, buyer: u64, provider: u64) -> Result<(), DealError> {
        let d = self.dispute_mut(id)?;
        d.penalty_buyer = buyer;
        d.penalty_provider = provider;
        Ok(())
    }

    pub fn advance_to_mediation(&mut self, id: DisputeId, now: u64, window: u64) -> Result<u64, DealError> {
        let d = self.dispute_mut(id)?;
        if d.stage != DisputeStage::Initiated {
            return Err(DealError::WrongStage(d.stage.name().into()));
        }
        let deadline = now.saturating_add(window);
        d.advance(DisputeStage::Mediation { deadline });
        Ok(deadline)
    }

    /// Settlements are accepted while the mediation window is open.
    pub fn record_settlement(&mut self, id: DisputeId, outcome: Outcome, now: u64) -> Result<(), DealError> {
        let d = self.dispute_mut(id)?;
        match d.stage {
            DisputeStage::Mediation { deadline } if now < deadline => {
                d.settlement = Some(outcome);
                Ok(())
            }
            DisputeStage::Mediation { .. } => Err(DealError::DeadlinePassed),
            _ => Err(DealError::WrongStage(d.stage.name().into())),
        }
    }

    /// Guard for the mediation timeout. No state change.
    pub fn check_timeout(&self, id: DisputeId, now: u64) -> Result<Outcome, DealError> {
        let d = self.dispute(id)?;
        match d.stage {
            DisputeStage::Mediation { deadline } if d.settlement.is_none() => {
                if now < deadline {
                    Err(DealError::NotYetExpired)
                } else {
                    Ok(d.proposed_outcome())
                }
            }
            _ => Err(DealError::WrongStage(d.stage.name().into())),
        }
    }

    pub fn enter_voting(&mut self, id: DisputeId, proposal_id: ProposalId, proposed: Outcome) -> Result<(), DealError> {
        let d = self.dispute_mut(id)?;
        if !matches!(d.stage, DisputeStage::Mediation { .. }) {
            return Err(DealError::WrongStage(d.stage.name().into()));
        }
        d.advance(DisputeStage::Voting { proposal_id, proposed });
        Ok(())
    }

    /// Terminal step: empty the escrow per `outcome`.
    pub fn enforce(&mut self, id: DisputeId, outcome: Outcome) -> Result<(DealId, Distribution), DealError> {
        let d = self.dispute(id)?;
        let ready = matches!(d.stage, DisputeStage::Voting { .. })
            || (matches!(d.stage, DisputeStage::Mediation { .. }) && d.settlement.is_some());
        if !ready {
            return Err(DealError::WrongStage(d.stage.name().into()));
        }
        let deal_id = d.deal_id;
        let deal = self.deal_mut(deal_id)?;
        let out = distribute(outcome, deal.amount, deal.collateral);
        debug_assert_eq!(out.total(), deal.escrow_balance);
        deal.escrow_balance = 0;
        deal.advance(DealStatus::Resolved);
        self.dispute_mut(id)?.advance(DisputeStage::Enforced { outcome });
        Ok((deal_id, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::keygen;

    fn pk(n: u8) -> PublicKey {
        keygen([n; 32]).public_key
    }

    #[test]
    fn collateral_formula() {
        assert_eq!(required_collateral(TokenType::T2, 1000), Ok(100));
        assert_eq!(required_collateral(TokenType::T1, 1000), Ok(0));
        assert_eq!(required_collateral(TokenType::T2, 999), Ok(99));
        assert_eq!(required_collateral(TokenType::T3, 1), Err(DealError::WrongType(TokenType::T3)));
    }

    #[test]
    fn distributions_conserve_escrow() {
        let cases = [
            (Outcome::RefundBuyer, 1000, 100, 1100, 0),
            (Outcome::PayProvider, 1000, 100, 100, 1000),
            (Outcome::SplitEscrow, 1001, 100, 600, 501),
            (Outcome::RevokeAccess { offender: Party::Provider }, 1000, 100, 1100, 0),
            (Outcome::RevokeAccess { offender: Party::Buyer }, 1000, 100, 1000, 100),
        ];
        for (o, s, c, b, p) in cases {
            let d = distribute(o, s, c);
            assert_eq!((d.to_buyer, d.to_provider), (b, p), "{o}");
            assert_eq!(d.total(), s + c);
        }
    }

    #[test]
    fn create_guards() {
        let mut book = DealBook::new();
        let (a, b) = (pk(1), pk(2));
        let d = book.create(a, b, TokenType::T2, 1000, 10, "USDC", 0).unwrap();
        assert_eq!((d.collateral, d.status), (100, DealStatus::Created));
        assert_eq!(book.create(a, a, TokenType::T1, 1, 10, "USDC", 0).unwrap_err(), DealError::SelfDeal);
        assert_eq!(book.create(a, b, TokenType::T1, 0, 10, "USDC", 0).unwrap_err(), DealError::ZeroAmount);
        assert_eq!(book.create(a, b, TokenType::T1, 1, 5, "USDC", 5).unwrap_err(), DealError::PastDeadline);
        assert_eq!(book.create(a, b, TokenType::T4, 1, 5, "USDC", 0).unwrap_err(), DealError::WrongType(TokenType::T4));
    }

    #[test]
    fn happy_path_and_guards() {
        let mut book = DealBook::new();
        let (a, b) = (pk(1), pk(2));
        let id = book.create(a, b, TokenType::T2, 1000, 10, "USDC", 0).unwrap().deal_id;
        assert_eq!(book.confirm(id, &a), Err(DealError::WrongState(DealStatus::Created)));
        assert_eq!(book.fund(id, &b, 5000, 1), Err(DealError::WrongCaller));
        assert_eq!(book.fund(id, &a, 1099, 1), Err(DealError::InsufficientFunds { need: 1100, have: 1099 }));
        assert_eq!(book.deal(id).unwrap().escrow_balance, 0);
        assert_eq!(book.fund(id, &a, 1100, 1), Ok(1100));
        assert_eq!(book.mark_complete(id, &a, 2), Err(DealError::WrongCaller));
        book.mark_complete(id, &b, 10).unwrap();
        let out = book.confirm(id, &a).unwrap();
        assert_eq!(out, Distribution { to_buyer: 100, to_provider: 1000 });
        assert_eq!(book.deal(id).unwrap().escrow_balance, 0);
        assert_eq!(book.confirm(id, &a), Err(DealError::WrongState(DealStatus::Confirmed)));
    }

    #[test]
    fn deadlines() {
        let mut book = DealBook::new();
        let (a, b) = (pk(1), pk(2));
        let id = book.create(a, b, TokenType::T1, 10, 10, "USDC", 0).unwrap().deal_id;
        assert_eq!(book.fund(id, &a, 10, 10), Err(DealError::DeadlinePassed));
        book.fund(id, &a, 10, 9).unwrap();
        assert_eq!(book.mark_complete(id, &b, 11), Err(DealError::DeadlinePassed));
    }

    #[test]
    fn dispute_lifecycle() {
        let mut book = DealBook::new();
        let (a, b, c) = (pk(1), pk(2), pk(3));
        let id = book.create(a, b, TokenType::T2, 1000, 10, "USDC", 0).unwrap().deal_id;
        assert_eq!(book.open_dispute(id, &a, b""), Err(DealError::WrongState(DealStatus::Created)));
        book.fund(id, &a, 1100, 1).unwrap();
        assert_eq!(book.open_dispute(id, &c, b""), Err(DealError::NotParty));
        let did = book.open_dispute(id, &a, b"late").unwrap();
        assert_eq!(book.open_dispute(id, &a, b""), Err(DealError::DuplicateDispute));
        assert!(matches!(book.enforce(did, Outcome::RefundBuyer), Err(DealError::WrongStage(_))));
        assert!(matches!(book.check_timeout(did, 100), Err(DealError::WrongStage(_))));
        let deadline = book.advance_to_mediation(did, 20, 10).unwrap();
        assert_eq!(deadline, 30);
        assert!(matches!(book.advance_to_mediation(did, 21, 10), Err(DealError::WrongStage(_))));
        assert_eq!(book.check_timeout(did, 29), Err(DealError::NotYetExpired));
        assert_eq!(book.check_timeout(did, 30), Ok(Outcome::RefundBuyer));
        book.enter_voting(did, ProposalId::default(), Outcome::RefundBuyer).unwrap();
        let (_, out) = book.enforce(did, Outcome::RefundBuyer).unwrap();
        assert_eq!(out, Distribution { to_buyer: 1100, to_provider: 0 });
        assert_eq!(book.deal(id).unwrap().status, DealStatus::Resolved);
        assert!(matches!(book.enforce(did, Outcome::RefundBuyer), Err(DealError::WrongStage(_))));
    }

    #[test]
    fn settlement_path() {
        let mut book = DealBook::new();
        let (a, b) = (pk(1), pk(2));
        let id = book.create(a, b, TokenType::T1, 1001, 10, "USDC", 0).unwrap().deal_id;
        book.fund(id, &a, 1001, 1).unwrap();
        let did = book.open_dispute(id, &b, b"").unwrap();
        assert!(matches!(book.record_settlement(did, Outcome::SplitEscrow, 2), Err(DealError::WrongStage(_))));
        book.advance_to_mediation(did, 2, 5).unwrap();
        assert_eq!(book.record_settlement(did, Outcome::SplitEscrow, 7), Err(DealError::DeadlinePassed));
        book.record_settlement(did, Outcome::SplitEscrow, 6).unwrap();
        let (_, out) = book.enforce(did, Outcome::SplitEscrow).unwrap();
        assert_eq!(out, Distribution { to_buyer: 500, to_provider: 501 });
    }

    #[test]
    fn outcome_strings_round_trip() {
        for o in [
            Outcome::RefundBuyer,
            Outcome::PayProvider,
            Outcome::SplitEscrow,
            Outcome::RevokeAccess { offender: Party::Buyer },
            Outcome::RevokeAccess { offender: Party::Provider },
        ] {
            assert_eq!(o.as_str().parse::<Outcome>().unwrap(), o);
        }
        assert!("nope".parse::<Outcome>().is_err());
    }
}
