//! Runs a [`Scenario`] against the integrated state machine.

use std::collections::BTreeMap;

use rand::RngCore;
use rand_chacha::ChaCha20Rng;

use super::metrics::MetricsReport;
use super::scenario::{Action, Agent, Behavior, Direction, Scenario, Strategy};
use crate::bridge::ChainId;
use crate::dao::{rng_stream, Dao, DaoConfig};
use crate::deals::DealId;
use crate::events::{EventLog, Fields};
use crate::gas_model::{format_pct, rows_for_gas, GasConfig};
use crate::governance::{derive_nullifier, Ballot, GovernanceConfig, ProposalId};
use crate::hash::PublicKey;
use crate::identity::{keygen, DkycPolicy, KeyPair};
use crate::merkle::MembershipProof;
use crate::rational::{format_fixed, Fraction};
use crate::reputation::deterrence_margin;

/// Everything a run produced, with the final state for inspection.
pub struct RunOutput {
    pub log: EventLog,
    pub metrics: MetricsReport,
    pub dao: Dao,
    /// Agent name to public key, clones included as `name#i`.
    pub keys: BTreeMap<String, PublicKey>,
}

/// Run `scenario` with its own seed.
pub fn run(scenario: &Scenario) -> (EventLog, MetricsReport) {
    let out = run_detailed(scenario);
    (out.log, out.metrics)
}

pub fn run_detailed(scenario: &Scenario) -> RunOutput {
    let mut engine = Engine::new(scenario);
    for step in &scenario.script {
        if step.at > engine.dao.now() {
            engine.dao.advance_clock(step.at).expect("times are non-decreasing");
        }
        engine.step(&step.action);
        engine.check_conservation();
    }
    let metrics = engine.metrics();
    let keys = engine.names.iter().map(|(pk, n)| (n.clone(), *pk)).collect();
    RunOutput { log: engine.dao.log().clone(), metrics, dao: engine.dao, keys }
}

fn dao_config(sc: &Scenario) -> DaoConfig {
    let c = &sc.config;
    DaoConfig {
        governance: GovernanceConfig { allowed_quorums: c.quorums.clone() },
        removal_quorum: c.removal_quorum,
        dispute_quorum: c.dispute_quorum,
        removal_rule: Default::default(),
        voting_period: c.voting_period,
        mediation_window: c.mediation_window,
        gas: c.gas_config(),
    }
}

struct Engine<'a> {
    sc: &'a Scenario,
    dao: Dao,
    keys: BTreeMap<String, KeyPair>,
    clones: BTreeMap<String, Vec<KeyPair>>,
    names: BTreeMap<PublicKey, String>,
    deals: BTreeMap<String, DealId>,
    proposals: BTreeMap<String, ProposalId>,
    openings: BTreeMap<ProposalId, Vec<(u8, [u8; 32])>>,
    vote_rng: ChaCha20Rng,
    member_series: Vec<(u64, usize)>,
    conservation_violations: u64,
}

fn fresh_key(rng: &mut ChaCha20Rng) -> KeyPair {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    keygen(seed)
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario) -> Self {
        let mut policy = DkycPolicy::new(false);
        for a in &sc.agents {
            policy.set(a.identity.as_bytes(), a.dkyc_verified);
        }
        let mut dao = Dao::new(dao_config(sc), policy, sc.seed);
        let mut key_rng = rng_stream(sc.seed, "identity");
        let mut keys = BTreeMap::new();
        let mut clones = BTreeMap::new();
        let mut names = BTreeMap::new();
        for a in &sc.agents {
            let kp = fresh_key(&mut key_rng);
            names.insert(kp.public_key, a.name.clone());
            keys.insert(a.name.clone(), kp);
        }
        for a in &sc.agents {
            if let Behavior::Sybil { clones: n } = a.behavior {
                let list: Vec<KeyPair> = (0..n).map(|_| fresh_key(&mut key_rng)).collect();
                for (i, kp) in list.iter().enumerate() {
                    names.insert(kp.public_key, format!("{}#{}", a.name, i + 1));
                }
                clones.insert(a.name.clone(), list);
            }
        }
        let asset = sc.config.asset.clone();
        for a in &sc.agents {
            let pk = keys[&a.name].public_key;
            if a.balance > 0 {
                dao.credit(pk, ChainId::Execution, &asset, a.balance);
            }
            if a.settlement_balance > 0 {
                dao.credit(pk, ChainId::Settlement, &asset, a.settlement_balance);
            }
        }
        Self {
            sc,
            dao,
            keys,
            clones,
            names,
            deals: BTreeMap::new(),
            proposals: BTreeMap::new(),
            openings: BTreeMap::new(),
            vote_rng: rng_stream(sc.seed, "governance"),
            member_series: vec![(0, 0)],
            conservation_violations: 0,
        }
    }

    fn agent(&self, name: &str) -> &Agent {
        self.sc.agent(name).expect("validated reference")
    }

    fn pk(&self, name: &str) -> PublicKey {
        self.keys[name].public_key
    }

    fn strategy(&self, name: &str) -> Option<Strategy> {
        match self.agent(name).behavior {
            Behavior::Cheater(s) => Some(s),
            _ => None,
        }
    }

    fn deviate(&mut self, agent: &str, strategy: Strategy, action: &str) {
        let f = Fields::new().with("agent", agent).with("strategy", strategy.as_str()).with("action", action);
        self.dao.note("simulator", "behavior_deviation", f);
    }

    fn unresolved(&mut self, action: &str, label: &str) {
        let f = Fields::new().with("action", action).with("label", label).with("reason", "unresolved_label");
        self.dao.note("simulator", "action_skipped", f);
    }

    fn deal(&mut self, action: &str, label: &str) -> Option<DealId> {
        let id = self.deals.get(label).copied();
        if id.is_none() {
            self.unresolved(action, label);
        }
        id
    }

    fn proposal(&mut self, action: &str, label: &str) -> Option<ProposalId> {
        let id = self.proposals.get(label).copied();
        if id.is_none() {
            self.unresolved(action, label);
        }
        id
    }

    fn step(&mut self, action: &Action) {
        let name = action.name();
        // outcomes are all in the log; errors need no handling here
        match action {
            Action::Onboard { agent } => {
                let a = self.agent(agent).clone();
                let _ = self.dao.onboard(&self.keys[agent].clone(), a.identity.as_bytes());
                for kp in self.clones.get(agent).cloned().unwrap_or_default() {
                    let _ = self.dao.onboard(&kp, a.identity.as_bytes());
                }
            }
            Action::CreateDeal { deal, buyer, provider, token_type, amount, deadline, asset } => {
                let asset = asset.clone().unwrap_or_else(|| self.sc.config.asset.clone());
                let (b, p) = (self.pk(buyer), self.pk(provider));
                if let Ok(id) = self.dao.create_private_deal(b, p, *token_type, *amount, *deadline, &asset) {
                    self.deals.insert(deal.clone(), id);
                }
            }
            Action::Fund { deal } => {
                if let Some(id) = self.deal(name, deal) {
                    let buyer = self.dao.deals().deal(id).expect("known").buyer;
                    let _ = self.dao.fund(id, buyer);
                }
            }
            Action::Complete { deal } => {
                if let Some(id) = self.deal(name, deal) {
                    let provider = self.dao.deals().deal(id).expect("known").provider;
                    let who = self.names[&provider].clone();
                    if self.strategy(&who) == Some(Strategy::NeverDeliver) {
                        self.deviate(&who, Strategy::NeverDeliver, name);
                    } else {
                        let _ = self.dao.mark_complete(id, provider);
                    }
                }
            }
            Action::Confirm { deal } => {
                if let Some(id) = self.deal(name, deal) {
                    let buyer = self.dao.deals().deal(id).expect("known").buyer;
                    let who = self.names[&buyer].clone();
                    if self.strategy(&who) == Some(Strategy::NeverConfirm) {
                        self.deviate(&who, Strategy::NeverConfirm, name);
                    } else {
                        let _ = self.dao.confirm(id, buyer);
                    }
                }
            }
            Action::Dispute { deal, by, evidence } => {
                if let Some(id) = self.deal(name, deal) {
                    let _ = self.dao.initiate_dispute(id, self.pk(by), evidence.as_bytes());
                }
            }
            Action::Mediate { deal } => {
                if let Some(id) = self.deal(name, deal) {
                    let _ = self.dao.advance_to_mediation(id);
                }
            }
            Action::Settle { deal, outcome } => {
                if let Some(id) = self.deal(name, deal) {
                    let _ = self.dao.settle(id, *outcome);
                }
            }
            Action::MediationTimeout { deal, proposal } => {
                if let Some(id) = self.deal(name, deal) {
                    if let (Ok(pid), Some(label)) = (self.dao.mediation_timeout(id), proposal) {
                        self.proposals.insert(label.clone(), pid);
                    }
                }
            }
            Action::Enforce { deal, removal_proposal } => {
                if let Some(id) = self.deal(name, deal) {
                    if let Ok(e) = self.dao.enforce(id) {
                        if let (Some(pid), Some(label)) = (e.removal_proposal, removal_proposal) {
                            self.proposals.insert(label.clone(), pid);
                        }
                    }
                }
            }
            Action::ProposeRemoval { proposal, by, target, quorum } => {
                if let Ok(pid) = self.dao.propose_removal(self.pk(by), self.pk(target), *quorum) {
                    self.proposals.insert(proposal.clone(), pid);
                }
            }
            Action::Vote { proposal, voter, vote } => {
                if let Some(pid) = self.proposal(name, proposal) {
                    self.vote(pid, voter, *vote);
                    if self.strategy(voter) == Some(Strategy::DoubleVote) {
                        self.deviate(voter, Strategy::DoubleVote, name);
                        self.vote(pid, voter, 1 - (*vote).min(1));
                    }
                }
            }
            Action::Finalize { proposal } => {
                if let Some(pid) = self.proposal(name, proposal) {
                    let openings = self.openings.get(&pid).cloned().unwrap_or_default();
                    let _ = self.dao.finalize(pid, &openings);
                }
            }
            Action::ExecuteRemoval { proposal } => {
                if let Some(pid) = self.proposal(name, proposal) {
                    let _ = self.dao.execute_removal(pid);
                }
            }
            Action::Disclose { target } => {
                let _ = self.dao.force_disclose(self.pk(target));
            }
            Action::Restrict { agent, token_type } => {
                let _ = self.dao.restrict(self.pk(agent), *token_type);
            }
            Action::LiftRestriction { agent, token_type } => {
                let _ = self.dao.lift_restriction(self.pk(agent), *token_type);
            }
            Action::TransferAuth { from, to } => {
                let _ = self.dao.transfer_auth(self.pk(from), self.pk(to));
            }
            Action::TransferPriv { from, to, token_type, quantity } => {
                let _ = self.dao.transfer_priv(self.pk(from), self.pk(to), *token_type, *quantity);
            }
            Action::ReputationBatch { members, deltas } => {
                let pks: Vec<PublicKey> = members.iter().map(|m| self.pk(m)).collect();
                let _ = self.dao.reputation_batch(&pks, deltas);
            }
            Action::BridgeTransfer { from, to, amount, direction, complete, replay } => {
                let chain = match direction {
                    Direction::ToExecution => ChainId::Settlement,
                    Direction::ToSettlement => ChainId::Execution,
                };
                let asset = self.sc.config.asset.clone();
                if let Ok(proof) = self.dao.bridge_initiate(chain, self.pk(from), &asset, *amount, self.pk(to)) {
                    if *complete && self.dao.bridge_complete(&proof).is_ok() && *replay {
                        let _ = self.dao.bridge_complete(&proof);
                    }
                }
            }
            Action::AdvanceClock { to } => {
                let _ = self.dao.advance_clock(*to);
            }
        }
        let (now, members) = (self.dao.now(), self.dao.tokens().member_count());
        match self.member_series.last_mut() {
            Some((t, n)) if *t == now => *n = members,
            Some((_, n)) if *n == members => {}
            _ => self.member_series.push((now, members)),
        }
    }

    /// Honest ballot for a member; non-members submit an empty proof that
    /// the verifier rejects.
    fn vote(&mut self, pid: ProposalId, voter: &str, vote: u8) {
        let kp = self.keys[voter].clone();
        let mut r = [0u8; 32];
        self.vote_rng.fill_bytes(&mut r);
        let Some(proposal) = self.dao.governance().proposal(&pid).cloned() else { return };
        let tree = self.dao.tree_for(&pid).expect("tree stored with proposal");
        let membership = tree.prove(&kp.public_key).unwrap_or(MembershipProof { index: 0, siblings: vec![] });
        let nullifier = derive_nullifier(&kp.secret_key, &pid);
        let ballot = Ballot::prepare(&kp, &proposal, vote, membership, nullifier, r);
        if self.dao.cast_vote(&ballot).is_ok() {
            self.openings.entry(pid).or_default().push((vote, r));
        }
    }

    fn check_conservation(&mut self) {
        for v in self.dao.conservation_violations() {
            self.conservation_violations += 1;
            let f = Fields::new().with("asset", v.asset).with("expected", v.expected).with("actual", v.actual);
            self.dao.note("simulator", "conservation_violated", f);
        }
    }

    fn name_of(&self, pk: &PublicKey) -> String {
        self.names.get(pk).cloned().unwrap_or_else(|| pk.to_hex())
    }

    fn metrics(&self) -> MetricsReport {
        let mut m = MetricsReport::new();
        let log = self.dao.log();
        if self.dao.tokens().auth_tokens().next().is_some() {
            for (t, n) in &self.member_series {
                m.push("members", t, "count", n);
            }
        }

        let cast = log.of_kind("governance", "vote_cast").count();
        let mut rejected: BTreeMap<String, usize> = BTreeMap::new();
        for r in log.of_kind("governance", "vote_rejected") {
            *rejected.entry(r.str_field("reason").unwrap_or("unknown").to_string()).or_default() += 1;
        }
        if cast > 0 || !rejected.is_empty() {
            m.push("votes", "cast", "count", cast);
            m.push("votes", "rejected", "count", rejected.values().sum::<usize>());
            for (reason, n) in &rejected {
                m.push("votes", "rejected", reason, n);
            }
        }

        let mut by_status: BTreeMap<&str, usize> = BTreeMap::new();
        for d in self.dao.deals().deals() {
            *by_status.entry(d.status.as_str()).or_default() += 1;
        }
        for (s, n) in &by_status {
            m.push("deals", s, "count", n);
        }

        let scores = self.dao.reputation().scores();
        if !scores.is_empty() {
            let mut named: Vec<(String, u64)> = scores.iter().map(|(pk, s)| (self.name_of(pk), *s)).collect();
            named.sort();
            for (n, s) in &named {
                m.push("reputation", n, "score", s);
            }
            let total: u64 = named.iter().map(|(_, s)| s).sum();
            let mean = Fraction::new(total as i128, named.len() as i128);
            m.push("reputation", "*", "min", named.iter().map(|(_, s)| *s).min().unwrap_or(0));
            m.push("reputation", "*", "max", named.iter().map(|(_, s)| *s).max().unwrap_or(0));
            m.push("reputation", "*", "mean", format_fixed(&mean, 4));

            let d = &self.sc.config.deterrence;
            for (n, s) in &named {
                let dm = deterrence_margin(*s, d.value_per_point as i128, d.cheating_gain as i128, d.factor)
                    .expect("factor validated positive");
                m.push("deterrence", n, "loss", dm.loss);
                m.push("deterrence", &n, "margin", dm.margin);
                m.push("deterrence", &n, "satisfied", dm.satisfied);
            }
        }

        let gas_cfg: &GasConfig = &self.dao.config().gas;
        let meter = self.dao.gas_meter();
        for (op, e) in &meter.per_op {
            m.push("gas", op, "count", e.count);
            for row in rows_for_gas(op.as_str(), e.gas, gas_cfg).expect("gas table is valid") {
                push_cost(&mut m, &row);
            }
        }
        if !meter.per_op.is_empty() {
            for row in rows_for_gas("total", meter.total_gas(), gas_cfg).expect("gas table is valid") {
                push_cost(&mut m, &row);
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for (op, n, eff) in &meter.batches {
            if seen.insert((*op, *n)) {
                m.push("batch", format!("{op}@{n}"), "efficiency_pct", format_pct(eff));
            }
        }

        let dup = count_reason(log, "duplicate_identity");
        let banned = count_reason(log, "banned_identity");
        if dup + banned > 0 {
            m.push("sybil", "duplicate_identity", "count", dup);
            m.push("sybil", "banned_identity", "count", banned);
        }
        if !self.dao.genesis_supply().is_empty() {
            m.push("conservation", "*", "violations", self.conservation_violations);
        }
        m
    }
}

fn count_reason(log: &EventLog, reason: &str) -> usize {
    log.of_kind("token_ledger", "onboard_rejected").filter(|r| r.str_field("reason") == Some(reason)).count()
}

fn push_cost(m: &mut MetricsReport, row: &crate::gas_model::CostRow) {
    let [op, layer, gas, usd, red] = row.fields();
    let key = format!("{op}:{layer}");
    m.push("cost", &key, "gas", gas);
    m.push("cost", &key, "usd", usd);
    if !red.is_empty() {
        m.push("cost", &key, "reduction_pct", red);
    }
}
