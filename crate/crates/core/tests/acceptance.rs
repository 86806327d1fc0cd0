//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints its own PASS/FAIL line; exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use pnr_dao::bridge::{Bridge, BridgeAuthority, ChainId, TransferProof};
use pnr_dao::dao::{Dao, DaoConfig};
use pnr_dao::deals::{required_collateral, Outcome, Party};
use pnr_dao::gas_model::{batch_efficiency, cost_of, GasConfig, OpKind};
use pnr_dao::governance::{
    threshold_decision, Ballot, DecisionRule, Governance, GovernanceConfig, GovernanceError, ProposalId, ProposalKind,
    ProposalStatus,
};
use pnr_dao::hash::{Digest, PublicKey};
use pnr_dao::identity::{open_commitment, DkycPolicy, IdentityEscrow, KeyPair};
use pnr_dao::merkle::{member_leaf, verify_membership, MemberTree};
use pnr_dao::rational::Fraction;
use pnr_dao::reputation::ReputationLedger;
use pnr_dao::simulator::{load_scenario, run_detailed};
use pnr_dao::token_ledger::{LedgerError, TokenLedger, TokenType};

use common::{keys, observed_supply, residual_terminal_escrow, scenario_path, USD};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 -------------------------------------------------------------------------

fn formula_exactness() -> Check {
    for amount in 0..=10_000u64 {
        let t1 = required_collateral(TokenType::T1, amount).map_err(|e| e.to_string())?;
        let t2 = required_collateral(TokenType::T2, amount).map_err(|e| e.to_string())?;
        // largest c with 10c <= amount
        let mut c = amount / 10 + 1;
        while 10 * c > amount {
            c -= 1;
        }
        ensure(t1 == 0 && t2 == c, || format!("collateral({amount}) = {t1}/{t2}, expected 0/{c}"))?;
    }

    let pk = keys(1, 9)[0].public_key;
    for r in 0..=100u64 {
        let mut rep = ReputationLedger::new();
        rep.register(pk, 0);
        rep.apply(&pk, r as i64, "seed", 0).map_err(|e| e.to_string())?;
        rep.apply(&pk, -2, "penalty", 0).map_err(|e| e.to_string())?;
        let expect = if r >= 2 { r - 2 } else { 0 };
        ensure(rep.score(&pk) == Some(expect), || format!("penalty from {r}: {:?}", rep.score(&pk)))?;
    }

    // integrated penalty and reward paths over starting reputations 0..=100
    for r in 0..=100i64 {
        for tt in [TokenType::T1, TokenType::T2] {
            let ks = keys(2, 3);
            let (b, p) = (ks[0].public_key, ks[1].public_key);
            let mut dao = Dao::new(DaoConfig::default(), DkycPolicy::new(true), 1);
            dao.onboard(&ks[0], b"buyer").map_err(|e| e.to_string())?;
            dao.onboard(&ks[1], b"provider").map_err(|e| e.to_string())?;
            dao.credit(b, ChainId::Execution, USD, 2_000);
            dao.reputation_batch(&[b, p], &[r, r]).map_err(|e| e.to_string())?;
            let id = dao.create_private_deal(b, p, tt, 1_000, 10, USD).map_err(|e| e.to_string())?;
            dao.fund(id, b).map_err(|e| e.to_string())?;
            dao.mark_complete(id, p).map_err(|e| e.to_string())?;
            let mut disputed = dao.clone();
            dao.confirm(id, b).map_err(|e| e.to_string())?;
            let r = r as u64;
            ensure(dao.reputation().score(&p) == Some(r + 5) && dao.reputation().score(&b) == Some(r + 1), || {
                format!("rewards from {r} on {tt}: {:?}/{:?}", dao.reputation().score(&p), dao.reputation().score(&b))
            })?;
            disputed.initiate_dispute(id, b, b"late").map_err(|e| e.to_string())?;
            let expect = r.max(2) - 2;
            for who in [b, p] {
                ensure(disputed.reputation().score(&who) == Some(expect), || format!("dispute penalty from {r}"))?;
            }
        }
    }

    let table = GasConfig::default().gas;
    let mut checked = 0;
    for op in table.batch.keys().copied() {
        let ind = table.base_gas(op).map_err(|e| e.to_string())?;
        for n in 1..=1_000u64 {
            let batch = table.gas_for(op, n).map_err(|e| e.to_string())?;
            let got = table.batch_efficiency(op, n).map_err(|e| e.to_string())?;
            let via_fn = batch_efficiency(ind, n, batch).map_err(|e| e.to_string())?;
            let total = ind as i128 * n as i128;
            let expect = Fraction::new(100 * total - 100 * batch as i128, total);
            ensure(got == expect && via_fn == expect, || format!("{op} efficiency at n={n}"))?;
            checked += 1;
        }
    }
    Ok(format!("10001 collateral amounts, 101 penalty levels, 202 reward pairs, {checked} efficiency points"))
}

// 2 -------------------------------------------------------------------------

fn voting_oracle() -> Check {
    let quorums = [(1i128, 2i128), (13, 20)];
    let pool = keys(8, 11);
    let mut cases = 0u64;
    for n in 1..=8usize {
        let members: Vec<PublicKey> = pool[..n].iter().map(|k| k.public_key).collect();
        let tree = MemberTree::build(&members).map_err(|e| e.to_string())?;
        for &(qn, qd) in &quorums {
            let q = Fraction::new(qn, qd);
            for k in 0..=n {
                for mask in 0u32..(1 << k) {
                    let votes: Vec<u8> = (0..k).map(|i| ((mask >> i) & 1) as u8).collect();
                    let yes = mask.count_ones() as i128;
                    let total = k as i128;
                    let n_i = n as i128;

                    let threshold = threshold_decision(&votes, q, n as u64).map_err(|e| e.to_string())?;
                    ensure(threshold == (yes * qd >= qn * n_i), || format!("threshold n={n} votes={votes:?}"))?;

                    let mut gov = Governance::new(GovernanceConfig::default());
                    let kind = ProposalKind::Generic { payload: Digest([mask as u8; 32]) };
                    let p = gov
                        .initiate_proposal(&members[0], kind, q, DecisionRule::QuorumMajority, 1, 0, &tree)
                        .map_err(|e| e.to_string())?
                        .clone();
                    let mut openings = Vec::new();
                    for (i, v) in votes.iter().enumerate() {
                        let r = [i as u8 + 1; 32];
                        let ballot = Ballot::honest(&pool[i], &p, &tree, *v, r).map_err(|e| e.to_string())?;
                        gov.cast_vote(&ballot, 0).map_err(|e| e.to_string())?;
                        openings.push((*v, r));
                    }
                    openings.reverse();
                    let (status, tally) = gov.finalize(&p.id, &openings, 1).map_err(|e| e.to_string())?;
                    let passes = total * qd >= qn * n_i && 2 * yes > total;
                    let want = if passes { ProposalStatus::Passed } else { ProposalStatus::Failed };
                    ensure(status == want && tally.total == k as u64 && tally.yes == yes as u64, || {
                        format!("finalize n={n} q={qn}/{qd} votes={votes:?}: {status}")
                    })?;
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("{cases} (member count, quorum, vote vector) cases"))
}

// 3 -------------------------------------------------------------------------

fn anti_double_vote() -> Check {
    let pool = keys(8, 21);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let (mut sequences, mut attempts, mut duplicates) = (0u64, 0u64, 0u64);
    let trees: Vec<MemberTree> = (1..=8)
        .map(|m| MemberTree::build(&pool[..m].iter().map(|k| k.public_key).collect::<Vec<_>>()).expect("non-empty"))
        .collect();
    for s in 0..10_000u64 {
        let m = rng.gen_range(1..=8);
        let tree = &trees[m - 1];
        let mut gov = Governance::new(GovernanceConfig::default());
        let kind = ProposalKind::Generic { payload: Digest([0; 32]) };
        let p = gov
            .initiate_proposal(&pool[0].public_key, kind, Fraction::new(1, 2), DecisionRule::QuorumMajority, 5, s, tree)
            .map_err(|e| e.to_string())?
            .clone();
        let mut voted = BTreeSet::new();
        for _ in 0..rng.gen_range(1..=16) {
            let who = rng.gen_range(0..m);
            let mut r = [0u8; 32];
            rng.fill_bytes(&mut r);
            let ballot = Ballot::honest(&pool[who], &p, tree, rng.gen_range(0..=1), r).map_err(|e| e.to_string())?;
            let res = gov.cast_vote(&ballot, s);
            attempts += 1;
            if voted.insert(who) {
                ensure(res.is_ok(), || format!("first vote rejected: {res:?}"))?;
            } else if res != Err(GovernanceError::DoubleVote) {
                duplicates += 1;
            }
        }
        let state = gov.votes(&p.id).expect("exists");
        if state.nullifiers.len() != voted.len() || state.commitments.len() != voted.len() {
            duplicates += 1;
        }
        sequences += 1;
    }
    ensure(duplicates == 0, || format!("{duplicates} violations"))?;
    Ok(format!("{sequences} sequences, {attempts} ballots, 0 violations"))
}

// 4 -------------------------------------------------------------------------

fn merkle_soundness() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let (mut honest, mut corrupted, mut wrong_root, mut false_accepts) = (0u64, 0u64, 0u64, 0u64);
    for round in 0..128u64 {
        let size = (round % 64 + 1) as usize;
        let members: Vec<PublicKey> = (0..size)
            .map(|_| {
                let mut b = [0u8; 32];
                rng.fill_bytes(&mut b);
                PublicKey(b)
            })
            .collect();
        let tree = MemberTree::build(&members).map_err(|e| e.to_string())?;
        let mut other = [0u8; 32];
        rng.fill_bytes(&mut other);
        let bogus_roots = [Digest(other), MemberTree::build(&members[..size.max(2) - 1]).map_or(Digest(other), |t| t.root())];
        for pk in &members {
            let proof = tree.prove(pk).map_err(|e| e.to_string())?;
            let leaf = member_leaf(pk);
            ensure(verify_membership(&tree.root(), &leaf, &proof), || format!("honest proof rejected at size {size}"))?;
            honest += 1;

            // every byte of every sibling, plus a corrupted leaf
            for (s, sib) in proof.siblings.iter().enumerate() {
                for byte in 0..32 {
                    let mut bad = proof.clone();
                    let mut d = sib.0;
                    d[byte] ^= rng.gen_range(1..=255u8);
                    bad.siblings[s] = Digest(d);
                    corrupted += 1;
                    if verify_membership(&tree.root(), &leaf, &bad) {
                        false_accepts += 1;
                    }
                }
            }
            let mut l = leaf.0;
            l[rng.gen_range(0..32)] ^= rng.gen_range(1..=255u8);
            corrupted += 1;
            if verify_membership(&tree.root(), &Digest(l), &proof) {
                false_accepts += 1;
            }

            for root in &bogus_roots {
                if *root == tree.root() {
                    continue;
                }
                wrong_root += 1;
                if verify_membership(root, &leaf, &proof) {
                    false_accepts += 1;
                }
            }
        }
    }
    ensure(false_accepts == 0, || format!("{false_accepts} false accepts"))?;
    Ok(format!("{honest} honest proofs, {corrupted} corrupted, {wrong_root} wrong-root checks, 0 false accepts"))
}

// 5 -------------------------------------------------------------------------

fn soulbound_exclusion() -> Check {
    let pool = keys(6, 51);
    let identities: Vec<Vec<u8>> = (0..4).map(|i| format!("person-{i}").into_bytes()).collect();
    let escrow = IdentityEscrow::new([5; 32]);
    let commitments: Vec<Digest> =
        identities.iter().map(|id| escrow.prepare(id).expect("non-empty").commitment).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let (mut ops, mut violations) = (0u64, 0u64);
    let mut refused_rejoins = 0u64;

    for _ in 0..10_000 {
        let mut ledger = TokenLedger::new();
        let mut banned: BTreeSet<Digest> = BTreeSet::new();
        // expected soulbound balances: grants and batch deltas only
        let mut soulbound: BTreeMap<(PublicKey, TokenType), u64> = BTreeMap::new();
        for _ in 0..rng.gen_range(5..30) {
            ops += 1;
            let a = &pool[rng.gen_range(0..pool.len())];
            let b = &pool[rng.gen_range(0..pool.len())];
            let tt = TokenType::ALL[rng.gen_range(0..5)];
            let owners_before: Vec<(u64, PublicKey)> = ledger.auth_tokens().map(|t| (t.token_id, t.owner)).collect();
            match rng.gen_range(0..7) {
                0 | 1 => {
                    let c = commitments[rng.gen_range(0..commitments.len())];
                    let res = ledger.mint_auth(a.public_key, a.sealing_key(), c, true, 0);
                    if banned.contains(&c) {
                        if res.is_ok() {
                            violations += 1;
                        } else {
                            refused_rejoins += 1;
                        }
                    }
                }
                2 => {
                    if let Some(t) = ledger.active_token_of(&a.public_key).cloned() {
                        ledger.burn_auth(t.token_id, 0).map_err(|e| e.to_string())?;
                        banned.insert(t.identity_commitment);
                    }
                }
                3 => {
                    let id = ledger.active_token_of(&a.public_key).map_or(rng.gen(), |t| t.token_id);
                    if ledger.transfer_auth(id, a.public_key, b.public_key) != Err(LedgerError::SoulboundViolation) {
                        violations += 1;
                    }
                }
                4 => {
                    let q = rng.gen_range(1..4);
                    if ledger.mint_priv(a.public_key, tt, q, b"m", &mut rng).is_ok() && tt.is_soulbound() {
                        *soulbound.entry((a.public_key, tt)).or_insert(0) += q;
                    }
                }
                5 => {
                    let before = (ledger.balance(&a.public_key, tt), ledger.balance(&b.public_key, tt));
                    let res = ledger.transfer_priv(a.public_key, b.public_key, tt, rng.gen_range(1..4));
                    if tt.is_soulbound() {
                        let after = (ledger.balance(&a.public_key, tt), ledger.balance(&b.public_key, tt));
                        if res != Err(LedgerError::SoulboundViolation) || before != after {
                            violations += 1;
                        }
                    }
                }
                _ => {
                    let d: i64 = rng.gen_range(-2..=3);
                    if ledger.batch_update_priv(&[(a.public_key, tt, d)]).is_ok() && tt.is_soulbound() {
                        let slot = soulbound.entry((a.public_key, tt)).or_insert(0);
                        *slot = (*slot as i64 + d) as u64;
                    }
                }
            }
            for (id, owner) in owners_before {
                if ledger.auth_token(id).map(|t| t.owner) != Some(owner) {
                    violations += 1;
                }
            }
            for k in &pool {
                for tt in [TokenType::T3, TokenType::T4, TokenType::T5] {
                    if ledger.balance(&k.public_key, tt) != soulbound.get(&(k.public_key, tt)).copied().unwrap_or(0) {
                        violations += 1;
                    }
                }
            }
            for t in ledger.auth_tokens().filter(|t| !t.burned) {
                if ledger.is_banned(&t.identity_commitment) {
                    violations += 1;
                }
            }
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok(format!("10000 sequences, {ops} operations, {refused_rejoins} banned rejoins refused, 0 violations"))
}

// 6 -------------------------------------------------------------------------

const OUTCOMES: [Outcome; 5] = [
    Outcome::RefundBuyer,
    Outcome::PayProvider,
    Outcome::SplitEscrow,
    Outcome::RevokeAccess { offender: Party::Buyer },
    Outcome::RevokeAccess { offender: Party::Provider },
];

struct Fuzz {
    dao: Dao,
    keys: Vec<KeyPair>,
    holders: Vec<PublicKey>,
    genesis: u64,
    deals: Vec<u64>,
    proposals: Vec<ProposalId>,
    openings: BTreeMap<ProposalId, Vec<(u8, [u8; 32])>>,
    proofs: Vec<TransferProof>,
}

impl Fuzz {
    fn new(seed: u64, rng: &mut ChaCha20Rng) -> Self {
        let config = DaoConfig { voting_period: 3, mediation_window: 2, ..DaoConfig::default() };
        let mut dao = Dao::new(config, DkycPolicy::new(true), seed);
        let keys = keys(6, seed as u8);
        let mut genesis = 0;
        for (i, k) in keys.iter().enumerate() {
            dao.onboard(k, format!("m{i}").as_bytes()).expect("fresh identity");
            let (e, s) = (rng.gen_range(0..2_000), rng.gen_range(0..1_000));
            dao.credit(k.public_key, ChainId::Execution, USD, e);
            dao.credit(k.public_key, ChainId::Settlement, USD, s);
            genesis += e + s;
        }
        let holders = keys.iter().map(|k| k.public_key).collect();
        Self { dao, keys, holders, genesis, deals: vec![], proposals: vec![], openings: BTreeMap::new(), proofs: vec![] }
    }

    fn key(&self, rng: &mut ChaCha20Rng) -> PublicKey {
        self.holders[rng.gen_range(0..self.holders.len())]
    }

    fn pick<T: Copy>(items: &[T], rng: &mut ChaCha20Rng) -> Option<T> {
        (!items.is_empty()).then(|| items[rng.gen_range(0..items.len())])
    }

    fn step(&mut self, rng: &mut ChaCha20Rng) {
        let deal = Self::pick(&self.deals, rng);
        let party = |f: &Fuzz, id: u64, buyer: bool| {
            f.dao.deals().deal(id).map(|d| if buyer { d.buyer } else { d.provider }).ok()
        };
        match rng.gen_range(0..20) {
            16..=19 => {
                if let Some(id) = deal {
                    self.progress(id, rng);
                }
            }
            0 | 1 => {
                let (b, p) = (self.key(rng), self.key(rng));
                let tt = if rng.gen() { TokenType::T1 } else { TokenType::T2 };
                let deadline = self.dao.now() + rng.gen_range(0..8);
                if let Ok(id) = self.dao.create_private_deal(b, p, tt, rng.gen_range(0..900), deadline, USD) {
                    self.deals.push(id);
                }
            }
            2 => {
                if let Some(id) = deal {
                    let who = if rng.gen_bool(0.9) { party(self, id, true) } else { Some(self.key(rng)) };
                    let _ = self.dao.fund(id, who.expect("known deal"));
                }
            }
            3 => {
                if let Some(id) = deal {
                    let _ = self.dao.mark_complete(id, party(self, id, false).expect("known deal"));
                }
            }
            4 => {
                if let Some(id) = deal {
                    let who = if rng.gen_bool(0.9) { party(self, id, true) } else { Some(self.key(rng)) };
                    let _ = self.dao.confirm(id, who.expect("known deal"));
                }
            }
            5 => {
                if let Some(id) = deal {
                    let who = party(self, id, rng.gen()).expect("known deal");
                    let _ = self.dao.initiate_dispute(id, who, b"evidence");
                }
            }
            6 => {
                if let Some(id) = deal {
                    let _ = self.dao.advance_to_mediation(id);
                }
            }
            7 => {
                if let Some(id) = deal {
                    let _ = self.dao.settle(id, OUTCOMES[rng.gen_range(0..OUTCOMES.len())]);
                }
            }
            8 => {
                if let Some(id) = deal {
                    if let Ok(pid) = self.dao.mediation_timeout(id) {
                        self.proposals.push(pid);
                    }
                }
            }
            9 | 10 => {
                if let Some(pid) = Self::pick(&self.proposals, rng) {
                    let voter = &self.keys[rng.gen_range(0..self.keys.len())];
                    let (Some(p), Some(tree)) = (self.dao.governance().proposal(&pid), self.dao.tree_for(&pid)) else {
                        return;
                    };
                    let mut r = [0u8; 32];
                    rng.fill_bytes(&mut r);
                    let v = rng.gen_bool(0.7) as u8;
                    if let Ok(ballot) = Ballot::honest(voter, p, tree, v, r) {
                        if self.dao.cast_vote(&ballot).is_ok() {
                            self.openings.entry(pid).or_default().push((v, r));
                        }
                    }
                }
            }
            11 => {
                if let Some(pid) = Self::pick(&self.proposals, rng) {
                    let openings = self.openings.get(&pid).cloned().unwrap_or_default();
                    let _ = self.dao.finalize(pid, &openings);
                    let _ = self.dao.execute_removal(pid);
                }
            }
            12 => {
                if let Some(id) = deal {
                    if let Ok(e) = self.dao.enforce(id) {
                        self.proposals.extend(e.removal_proposal);
                    }
                }
            }
            13 => {
                let from = if rng.gen() { ChainId::Settlement } else { ChainId::Execution };
                let (s, r) = (self.key(rng), self.key(rng));
                if let Ok(proof) = self.dao.bridge_initiate(from, s, USD, rng.gen_range(0..600), r) {
                    self.proofs.push(proof);
                }
            }
            14 => {
                if !self.proofs.is_empty() {
                    let proof = self.proofs[rng.gen_range(0..self.proofs.len())].clone();
                    let _ = self.dao.bridge_complete(&proof);
                }
            }
            _ => {
                let to = self.dao.now() + rng.gen_range(1..3);
                self.dao.advance_clock(to).expect("forward");
            }
        }
    }

    /// The next lifecycle step for a deal, with a random remedy where one is needed.
    fn progress(&mut self, id: u64, rng: &mut ChaCha20Rng) {
        let Ok(d) = self.dao.deals().deal(id).cloned() else { return };
        use pnr_dao::deals::{DealStatus, DisputeStage};
        match d.status {
            DealStatus::Created => drop(self.dao.fund(id, d.buyer)),
            DealStatus::Funded if rng.gen_bool(0.8) => drop(self.dao.mark_complete(id, d.provider)),
            DealStatus::ProviderCompleted if rng.gen_bool(0.6) => drop(self.dao.confirm(id, d.buyer)),
            DealStatus::Funded | DealStatus::ProviderCompleted => {
                drop(self.dao.initiate_dispute(id, if rng.gen() { d.buyer } else { d.provider }, b"e"))
            }
            DealStatus::Disputed => {
                let stage = d.dispute.and_then(|x| self.dao.deals().dispute(x).ok()).map(|x| x.stage.clone());
                match stage {
                    Some(DisputeStage::Initiated) => drop(self.dao.advance_to_mediation(id)),
                    Some(DisputeStage::Mediation { deadline }) => {
                        if rng.gen_bool(0.4) {
                            let _ = self.dao.settle(id, OUTCOMES[rng.gen_range(0..OUTCOMES.len())]);
                            let _ = self.dao.enforce(id);
                        } else if self.dao.now() < deadline {
                            self.dao.advance_clock(deadline).expect("forward");
                        } else if let Ok(pid) = self.dao.mediation_timeout(id) {
                            self.proposals.push(pid);
                        }
                    }
                    Some(DisputeStage::Voting { proposal_id, .. }) => {
                        let deadline = self.dao.governance().proposal(&proposal_id).map_or(0, |p| p.voting_deadline);
                        if self.dao.now() < deadline && rng.gen_bool(0.7) {
                            let who = &self.keys[rng.gen_range(0..self.keys.len())];
                            let (Some(p), Some(tree)) =
                                (self.dao.governance().proposal(&proposal_id), self.dao.tree_for(&proposal_id))
                            else {
                                return;
                            };
                            let mut r = [0u8; 32];
                            rng.fill_bytes(&mut r);
                            let v = rng.gen_bool(0.7) as u8;
                            if let Ok(b) = Ballot::honest(who, p, tree, v, r) {
                                if self.dao.cast_vote(&b).is_ok() {
                                    self.openings.entry(proposal_id).or_default().push((v, r));
                                }
                            }
                        } else if self.dao.now() < deadline {
                            self.dao.advance_clock(deadline).expect("forward");
                        } else {
                            let openings = self.openings.get(&proposal_id).cloned().unwrap_or_default();
                            let _ = self.dao.finalize(proposal_id, &openings);
                            if let Ok(e) = self.dao.enforce(id) {
                                self.proposals.extend(e.removal_proposal);
                            }
                        }
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }

    fn check(&self) -> Result<(), String> {
        let seen = observed_supply(&self.dao, &self.holders, USD);
        ensure(seen == self.genesis, || format!("supply {seen} != genesis {}", self.genesis))?;
        ensure(residual_terminal_escrow(&self.dao) == 0, || "terminal deal holds escrow".into())?;
        ensure(self.dao.conservation_violations().is_empty(), || "ledger reports a violation".into())
    }
}

fn conservation() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut steps = 0u64;
    let mut resolved = 0usize;
    for run in 0..150u64 {
        let mut f = Fuzz::new(run, &mut rng);
        for _ in 0..200 {
            f.step(&mut rng);
            steps += 1;
            f.check().map_err(|e| format!("fuzz run {run}: {e}"))?;
        }
        resolved += f.dao.deals().deals().filter(|d| d.status.is_terminal()).count();
    }
    let mut scripted = 0;
    for name in ["removal.toml", "marketplace.toml", "sybil.toml", "minimal.toml"] {
        let doc = std::fs::read_to_string(scenario_path(name)).map_err(|e| e.to_string())?;
        let sc = load_scenario(&doc).map_err(|e| e.to_string())?;
        let genesis: u64 = sc.agents.iter().map(|a| a.balance + a.settlement_balance).sum();
        let out = run_detailed(&sc);
        let holders = common::holders(&out.keys);
        let seen = observed_supply(&out.dao, &holders, &sc.config.asset);
        ensure(seen == genesis, || format!("{name}: supply {seen} != {genesis}"))?;
        ensure(residual_terminal_escrow(&out.dao) == 0, || format!("{name}: residual escrow"))?;
        ensure(out.log.of_kind("simulator", "conservation_violated").next().is_none(), || format!("{name}: logged violation"))?;
        scripted += 1;
    }
    Ok(format!("150 fuzz runs ({steps} steps, {resolved} terminal deals), {scripted} scripted runs"))
}

// 7 -------------------------------------------------------------------------

fn tampered(proof: &TransferProof, rng: &mut ChaCha20Rng) -> Vec<TransferProof> {
    let flip = |d: &Digest, rng: &mut ChaCha20Rng| {
        let mut b = d.0;
        b[rng.gen_range(0..32)] ^= rng.gen_range(1..=255u8);
        b
    };
    let mut out = Vec::new();
    let mut p = proof.clone();
    p.transfer_id = Digest(flip(&proof.transfer_id, rng));
    out.push(p);
    let mut p = proof.clone();
    p.source = proof.source.other();
    out.push(p);
    let mut p = proof.clone();
    p.recipient = PublicKey(flip(&Digest(proof.recipient.0), rng));
    out.push(p);
    let mut p = proof.clone();
    p.asset = format!("{}x", proof.asset);
    out.push(p);
    let mut p = proof.clone();
    p.asset = "ETH".into();
    out.push(p);
    for delta in [1u64, proof.amount] {
        let mut p = proof.clone();
        p.amount = proof.amount.wrapping_add(delta);
        out.push(p);
    }
    let mut p = proof.clone();
    p.amount = proof.amount - 1;
    out.push(p);
    let mut p = proof.clone();
    p.attestation = Digest(flip(&proof.attestation, rng));
    out.push(p);
    out
}

fn bridge_safety() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let users = keys(4, 71);
    let (mut mints, mut unbacked, mut replays, mut replay_attempts) = (0u64, 0u64, 0u64, 0u64);
    let (mut mutations, mut undetected) = (0u64, 0u64);
    for run in 0..300u64 {
        let mut bridge = Bridge::new(BridgeAuthority::new([run as u8; 32]));
        let mut genesis = 0;
        for u in &users {
            let amt = rng.gen_range(0..3_000);
            bridge.settlement.credit(u.public_key, USD, amt);
            genesis += amt;
        }
        let mut issued: Vec<TransferProof> = Vec::new();
        let mut redeemed: BTreeSet<Digest> = BTreeSet::new();
        for now in 0..60u64 {
            let s = &users[rng.gen_range(0..users.len())];
            let r = &users[rng.gen_range(0..users.len())];
            match rng.gen_range(0..4) {
                0 | 1 => {
                    let from = if rng.gen() { ChainId::Settlement } else { ChainId::Execution };
                    if let Ok(p) = bridge.initiate(from, &s.public_key, USD, rng.gen_range(1..1_500), r.public_key, now) {
                        for bad in tampered(&p, &mut rng) {
                            mutations += 1;
                            let mut probe = bridge.clone();
                            if probe.complete(&bad).is_ok() {
                                undetected += 1;
                            }
                        }
                        issued.push(p);
                    }
                }
                _ => {
                    if issued.is_empty() {
                        continue;
                    }
                    let p = issued[rng.gen_range(0..issued.len())].clone();
                    let replay = redeemed.contains(&p.transfer_id);
                    if replay {
                        replay_attempts += 1;
                    }
                    if bridge.complete(&p).is_ok() {
                        mints += 1;
                        if replay {
                            replays += 1;
                        }
                        redeemed.insert(p.transfer_id);
                    }
                }
            }
            unbacked += bridge.unbacked_count() as u64;
            // a redemption must match an issued proof exactly
            for chain in [ChainId::Settlement, ChainId::Execution] {
                for id in &redeemed {
                    let known = issued.iter().any(|p| p.transfer_id == *id && p.source != chain);
                    if bridge.chain(chain).is_redeemed(id) && !known {
                        unbacked += 1;
                    }
                }
            }
            ensure(bridge.supply(USD) == genesis, || format!("bridge run {run}: supply drift"))?;
        }
    }
    ensure(unbacked == 0, || format!("{unbacked} minted without lock"))?;
    ensure(replays == 0, || format!("{replays} replayed mints"))?;
    ensure(undetected == 0, || format!("{undetected}/{mutations} tampered proofs accepted"))?;
    Ok(format!(
        "300 runs, {mints} redemptions, {replay_attempts} replays refused, {mutations} single-field mutations all detected"
    ))
}

// 8 -------------------------------------------------------------------------

fn gas_figures() -> Check {
    let cfg = GasConfig::default();
    let table = &cfg.gas;
    let to_f = |f: &Fraction| *f.numer() as f64 / *f.denom() as f64;
    let l1 = to_f(&cost_of(OpKind::Vote, 1, &cfg.network.l1, table).map_err(|e| e.to_string())?.usd);
    let l2 = to_f(&cost_of(OpKind::Vote, 1, &cfg.network.l2, table).map_err(|e| e.to_string())?.usd);
    // independent arithmetic from the raw parameters
    let vote = table.base_gas(OpKind::Vote).map_err(|e| e.to_string())? as f64;
    let price = |p: &pnr_dao::gas_model::NetworkParams| p.gas_price_wei as f64 * 1e-18 * to_f(&p.native_token_usd);
    ensure((l1 - vote * price(&cfg.network.l1)).abs() < 1e-9, || "L1 cost arithmetic".into())?;
    ensure((l2 - vote * price(&cfg.network.l2)).abs() < 1e-9, || "L2 cost arithmetic".into())?;
    ensure(table.base_gas(OpKind::AuthMint) == Ok(45_000), || "auth mint gas".into())?;
    ensure(cfg.network.l1.gas_price_wei == 25_000_000_000, || "L1 gas price".into())?;
    ensure((l1 - 0.96).abs() <= 0.96 * 0.05, || format!("L1 vote {l1:.6} USD"))?;
    ensure((l2 - 0.007).abs() <= 0.007 * 0.05, || format!("L2 vote {l2:.6} USD"))?;
    let reduction = (1.0 - l2 / l1) * 100.0;
    ensure(reduction >= 97.0, || format!("reduction {reduction:.4}%"))?;
    let batch = table.gas_for(OpKind::BatchUpdate, 50).map_err(|e| e.to_string())? as f64;
    let single = table.base_gas(OpKind::BatchUpdate).map_err(|e| e.to_string())? as f64;
    let eff = (single * 50.0 - batch) / (single * 50.0) * 100.0;
    let eff_model = to_f(&table.batch_efficiency(OpKind::BatchUpdate, 50).map_err(|e| e.to_string())?);
    ensure((eff - eff_model).abs() < 1e-9 && eff >= 68.0, || format!("batch efficiency {eff:.4}%"))?;
    Ok(format!("vote L1 {l1:.6} USD, L2 {l2:.6} USD, reduction {reduction:.4}%, batch@50 {eff:.4}%"))
}

// 9 -------------------------------------------------------------------------

fn removal_scenario() -> Check {
    let doc = std::fs::read_to_string(scenario_path("removal.toml")).map_err(|e| e.to_string())?;
    let sc = load_scenario(&doc).map_err(|e| e.to_string())?;
    let runs: Vec<_> = (0..3).map(|_| run_detailed(&sc)).collect();
    let logs: Vec<String> = runs.iter().map(|r| r.log.to_jsonl()).collect();
    let metrics: Vec<String> = runs.iter().map(|r| r.metrics.to_csv()).collect();
    ensure(logs.windows(2).all(|w| w[0] == w[1]), || "event logs differ between runs".into())?;
    ensure(metrics.windows(2).all(|w| w[0] == w[1]), || "metrics differ between runs".into())?;

    let out = &runs[0];
    let cheater = out.keys["mallory"];
    let honest = out.keys["alice"];
    let tokens = out.dao.tokens();
    ensure(!tokens.is_member(&cheater), || "cheater still a member".into())?;
    let burned = tokens
        .auth_tokens()
        .find(|t| t.owner == cheater && t.burned)
        .ok_or_else(|| "cheater has no burned auth token".to_string())?;
    ensure(tokens.is_banned(&burned.identity_commitment), || "commitment not blacklisted".into())?;

    let disclosed = out
        .log
        .of_kind("governance", "identity_disclosed")
        .next()
        .ok_or_else(|| "no disclosure event".to_string())?;
    let identity = disclosed.str_field("identity").unwrap_or_default();
    ensure(identity == sc.agent("mallory").expect("declared").identity, || format!("disclosed {identity:?}"))?;
    let commitment: Digest = disclosed.str_field("commitment").unwrap_or_default().parse().map_err(|_| "bad hex")?;
    ensure(commitment == burned.identity_commitment, || "disclosed commitment differs from the burned token".into())?;
    let record = out.dao.escrow().get(&cheater).ok_or_else(|| "no escrow record".to_string())?;
    ensure(open_commitment(&commitment, identity.as_bytes(), &record.nonce), || "disclosure does not open".into())?;

    let resolved = out.log.of_kind("deals", "resolved").next().ok_or_else(|| "deal never resolved".to_string())?;
    ensure(resolved.str_field("outcome") == Some("refund_buyer"), || "outcome was not a refund".into())?;
    let start = sc.agent("alice").expect("declared").balance;
    let end = out.dao.balance(&honest, &sc.config.asset);
    ensure(end == start, || format!("honest buyer ends with {end}, started with {start}"))?;
    Ok(format!("{} events, identical over 3 runs; cheater burned and disclosed, buyer refunded {end}", out.log.len()))
}

// 10 ------------------------------------------------------------------------

fn reputation_batches() -> Check {
    let pool = keys(32, 101);
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let mut elements = 0usize;
    for i in 0..1_000 {
        let mut rep = ReputationLedger::new();
        let mut oracle: BTreeMap<PublicKey, i128> = BTreeMap::new();
        for k in &pool {
            rep.register(k.public_key, 0);
            let start = rng.gen_range(0..30i64);
            rep.apply(&k.public_key, start, "seed", 0).map_err(|e| e.to_string())?;
            oracle.insert(k.public_key, start as i128);
        }
        let len = rng.gen_range(0..=256);
        let members: Vec<PublicKey> = (0..len).map(|_| pool[rng.gen_range(0..pool.len())].public_key).collect();
        let deltas: Vec<i64> = (0..len).map(|_| rng.gen_range(-10..=10)).collect();
        rep.batch_update(&members, &deltas, 1).map_err(|e| e.to_string())?;
        for (m, d) in members.iter().zip(&deltas) {
            let s = oracle.get_mut(m).expect("registered");
            *s = (*s + *d as i128).max(0);
        }
        for (m, want) in &oracle {
            ensure(rep.score(m).map(|s| s as i128) == Some(*want), || format!("batch {i} diverges"))?;
        }
        elements += len;
    }
    Ok(format!("1000 batches, {elements} elements"))
}

fn main() {
    let criteria: [(&str, fn() -> Check, Option<Duration>); 10] = [
        ("formula exactness", formula_exactness, Some(Duration::from_secs(5))),
        ("voting oracle equivalence", voting_oracle, Some(Duration::from_secs(10))),
        ("anti-double-vote", anti_double_vote, None),
        ("merkle soundness", merkle_soundness, None),
        ("soulbound and exclusion", soulbound_exclusion, None),
        ("conservation", conservation, None),
        ("bridge safety", bridge_safety, None),
        ("gas figure reproduction", gas_figures, Some(Duration::from_secs(1))),
        ("end-to-end removal scenario", removal_scenario, None),
        ("reputation batch oracle", reputation_batches, None),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut res = check();
        let took = start.elapsed();
        if let (Ok(_), Some(b)) = (&res, budget) {
            if took > *b {
                res = Err(format!("took {took:.2?}, budget {b:?}"));
            }
        }
        match res {
            Ok(detail) => println!("PASS {:>2} {name} ({took:.2?}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({took:.2?}): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
