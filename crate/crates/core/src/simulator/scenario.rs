//! Scenario documents (TOML) and their validation.
//!
//! The schema is published in `schema/scenario.schema.json`. A document has a
//! `seed`, an optional `[config]` table, `[[agents]]` and a `[[script]]` of
//! timed actions, each tagged by its `action` field.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Deserializer};

use crate::deals::Outcome;
use crate::gas_model::{GasConfig, GasTable, Networks};
use crate::rational::{serde_fraction, serde_fraction_vec, Fraction};
use crate::token_ledger::TokenType;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("parse error at {0}")]
    ParseError(String),
    #[error("schema violation in {0}")]
    SchemaViolation(String),
    #[error("unknown agent {0:?}")]
    UnknownAgentReference(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub seed: u64,
    pub config: ScenarioConfig,
    pub agents: Vec<Agent>,
    pub script: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    seed: u64,
    #[serde(default)]
    config: ScenarioConfig,
    #[serde(default)]
    agents: Vec<Agent>,
}

fn default_quorums() -> Vec<Fraction> {
    vec![Fraction::new(1, 2), Fraction::new(13, 20)]
}

fn half() -> Fraction {
    Fraction::new(1, 2)
}

fn default_asset() -> String {
    "USDC".into()
}

fn default_voting_period() -> u64 {
    10
}

fn default_mediation_window() -> u64 {
    5
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Quorum values a proposer may pick from.
    #[serde(default = "default_quorums", with = "serde_fraction_vec")]
    pub quorums: Vec<Fraction>,
    #[serde(default = "half", with = "serde_fraction")]
    pub removal_quorum: Fraction,
    #[serde(default = "half", with = "serde_fraction")]
    pub dispute_quorum: Fraction,
    #[serde(default = "default_voting_period")]
    pub voting_period: u64,
    #[serde(default = "default_mediation_window")]
    pub mediation_window: u64,
    #[serde(default = "default_asset")]
    pub asset: String,
    #[serde(default)]
    pub deterrence: DeterrenceConfig,
    #[serde(default)]
    pub gas: Option<GasTable>,
    #[serde(default)]
    pub network: Option<Networks>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            quorums: default_quorums(),
            removal_quorum: half(),
            dispute_quorum: half(),
            voting_period: default_voting_period(),
            mediation_window: default_mediation_window(),
            asset: default_asset(),
            deterrence: DeterrenceConfig::default(),
            gas: None,
            network: None,
        }
    }
}

impl ScenarioConfig {
    /// Shipped gas defaults with any table or network overrides applied.
    pub fn gas_config(&self) -> GasConfig {
        let mut cfg = GasConfig::default();
        if let Some(t) = &self.gas {
            cfg.gas = t.clone();
        }
        if let Some(n) = &self.network {
            cfg.network = n.clone();
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeterrenceConfig {
    #[serde(with = "serde_fraction")]
    pub factor: Fraction,
    pub value_per_point: i64,
    pub cheating_gain: i64,
}

impl Default for DeterrenceConfig {
    fn default() -> Self {
        Self { factor: Fraction::new(23, 10), value_per_point: 100, cheating_gain: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Agent {
    pub name: String,
    pub identity: String,
    #[serde(default = "yes")]
    pub dkyc_verified: bool,
    /// Execution-chain balance of the scenario asset.
    #[serde(default)]
    pub balance: u64,
    #[serde(default)]
    pub settlement_balance: u64,
    #[serde(default)]
    pub behavior: Behavior,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior {
    #[default]
    Honest,
    Cheater(Strategy),
    Sybil { clones: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Never marks deals complete.
    NeverDeliver,
    /// Never confirms delivered deals.
    NeverConfirm,
    /// Follows every vote with a second ballot.
    DoubleVote,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NeverDeliver => "never_deliver",
            Self::NeverConfirm => "never_confirm",
            Self::DoubleVote => "double_vote",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ToExecution,
    ToSettlement,
}

fn parsed<'de, D, T>(d: D) -> Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr<Err = String>,
{
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

fn parsed_fraction_opt<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Fraction>, D::Error> {
    serde_fraction::deserialize(d).map(Some)
}

fn empty() -> String {
    String::new()
}

fn yes_u8() -> u8 {
    1
}

/// One scripted action. Labels (`deal`, `proposal`) name objects created
/// earlier in the script.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    Onboard {
        agent: String,
    },
    CreateDeal {
        deal: String,
        buyer: String,
        provider: String,
        #[serde(deserialize_with = "parsed")]
        token_type: TokenType,
        amount: u64,
        deadline: u64,
        #[serde(default)]
        asset: Option<String>,
    },
    Fund {
        deal: String,
    },
    Complete {
        deal: String,
    },
    Confirm {
        deal: String,
    },
    Dispute {
        deal: String,
        by: String,
        #[serde(default = "empty")]
        evidence: String,
    },
    Mediate {
        deal: String,
    },
    Settle {
        deal: String,
        #[serde(deserialize_with = "parsed")]
        outcome: Outcome,
    },
    MediationTimeout {
        deal: String,
        #[serde(default)]
        proposal: Option<String>,
    },
    Enforce {
        deal: String,
        /// Label for the removal proposal a revocation opens.
        #[serde(default)]
        removal_proposal: Option<String>,
    },
    ProposeRemoval {
        proposal: String,
        by: String,
        target: String,
        #[serde(default, deserialize_with = "parsed_fraction_opt")]
        quorum: Option<Fraction>,
    },
    Vote {
        proposal: String,
        voter: String,
        #[serde(default = "yes_u8")]
        vote: u8,
    },
    Finalize {
        proposal: String,
    },
    ExecuteRemoval {
        proposal: String,
    },
    Disclose {
        target: String,
    },
    Restrict {
        agent: String,
        #[serde(deserialize_with = "parsed")]
        token_type: TokenType,
    },
    LiftRestriction {
        agent: String,
        #[serde(deserialize_with = "parsed")]
        token_type: TokenType,
    },
    TransferAuth {
        from: String,
        to: String,
    },
    TransferPriv {
        from: String,
        to: String,
        #[serde(deserialize_with = "parsed")]
        token_type: TokenType,
        quantity: u64,
    },
    ReputationBatch {
        members: Vec<String>,
        deltas: Vec<i64>,
    },
    BridgeTransfer {
        from: String,
        to: String,
        amount: u64,
        direction: Direction,
        /// Redeem the proof right away.
        #[serde(default = "yes")]
        complete: bool,
        /// Submit the proof a second time after redeeming it.
        #[serde(default)]
        replay: bool,
    },
    AdvanceClock {
        to: u64,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Onboard { .. } => "onboard",
            Self::CreateDeal { .. } => "create_deal",
            Self::Fund { .. } => "fund",
            Self::Complete { .. } => "complete",
            Self::Confirm { .. } => "confirm",
            Self::Dispute { .. } => "dispute",
            Self::Mediate { .. } => "mediate",
            Self::Settle { .. } => "settle",
            Self::MediationTimeout { .. } => "mediation_timeout",
            Self::Enforce { .. } => "enforce",
            Self::ProposeRemoval { .. } => "propose_removal",
            Self::Vote { .. } => "vote",
            Self::Finalize { .. } => "finalize",
            Self::ExecuteRemoval { .. } => "execute_removal",
            Self::Disclose { .. } => "disclose",
            Self::Restrict { .. } => "restrict",
            Self::LiftRestriction { .. } => "lift_restriction",
            Self::TransferAuth { .. } => "transfer_auth",
            Self::TransferPriv { .. } => "transfer_priv",
            Self::ReputationBatch { .. } => "reputation_batch",
            Self::BridgeTransfer { .. } => "bridge_transfer",
            Self::AdvanceClock { .. } => "advance_clock",
        }
    }

    pub const NAMES: [&'static str; 22] = [
        "onboard",
        "create_deal",
        "fund",
        "complete",
        "confirm",
        "dispute",
        "mediate",
        "settle",
        "mediation_timeout",
        "enforce",
        "propose_removal",
        "vote",
        "finalize",
        "execute_removal",
        "disclose",
        "restrict",
        "lift_restriction",
        "transfer_auth",
        "transfer_priv",
        "reputation_batch",
        "bridge_transfer",
        "advance_clock",
    ];

    fn agents(&self) -> Vec<&str> {
        match self {
            Self::Onboard { agent } | Self::Restrict { agent, .. } | Self::LiftRestriction { agent, .. } => vec![agent],
            Self::CreateDeal { buyer, provider, .. } => vec![buyer, provider],
            Self::Dispute { by, .. } => vec![by],
            Self::ProposeRemoval { by, target, .. } => vec![by, target],
            Self::Vote { voter, .. } => vec![voter],
            Self::Disclose { target } => vec![target],
            Self::TransferAuth { from, to } | Self::TransferPriv { from, to, .. } | Self::BridgeTransfer { from, to, .. } => {
                vec![from, to]
            }
            Self::ReputationBatch { members, .. } => members.iter().map(String::as_str).collect(),
            _ => vec![],
        }
    }

    /// Deal label used, and whether this action defines it.
    fn deal_ref(&self) -> Option<(&str, bool)> {
        match self {
            Self::CreateDeal { deal, .. } => Some((deal, true)),
            Self::Fund { deal }
            | Self::Complete { deal }
            | Self::Confirm { deal }
            | Self::Dispute { deal, .. }
            | Self::Mediate { deal }
            | Self::Settle { deal, .. }
            | Self::MediationTimeout { deal, .. }
            | Self::Enforce { deal, .. } => Some((deal, false)),
            _ => None,
        }
    }

    /// Proposal labels used and defined, as `(field, label, defines)`.
    fn proposal_refs(&self) -> Vec<(&'static str, &str, bool)> {
        match self {
            Self::MediationTimeout { proposal: Some(p), .. } => vec![("proposal", p, true)],
            Self::Enforce { removal_proposal: Some(p), .. } => vec![("removal_proposal", p, true)],
            Self::ProposeRemoval { proposal, .. } => vec![("proposal", proposal, true)],
            Self::Vote { proposal, .. } | Self::Finalize { proposal } | Self::ExecuteRemoval { proposal } => {
                vec![("proposal", proposal, false)]
            }
            _ => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    /// Logical time at which the action runs.
    pub at: u64,
    pub action: Action,
}

fn schema_err<E: std::fmt::Display>(prefix: &str, e: serde_path_to_error::Error<E>) -> ScenarioError {
    let path = e.path().to_string();
    let at = match (prefix.is_empty(), path.as_str()) {
        (true, ".") => "document".to_string(),
        (true, _) => path,
        (false, ".") => prefix.to_string(),
        (false, _) => format!("{prefix}.{path}"),
    };
    ScenarioError::SchemaViolation(format!("{at}: {}", e.inner()))
}

impl FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(doc: &str) -> Result<Self, Self::Err> {
        load_scenario(doc)
    }
}

/// Parse and validate a scenario document.
pub fn load_scenario(doc: &str) -> Result<Scenario, ScenarioError> {
    let mut table: toml::Table = doc.parse().map_err(|e: toml::de::Error| {
        let loc = match e.span() {
            Some(span) => {
                let before = &doc[..span.start.min(doc.len())];
                let line = before.matches('\n').count() + 1;
                let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                format!("line {line}, column {col}")
            }
            None => "document".to_string(),
        };
        ScenarioError::ParseError(format!("{loc}: {}", e.message()))
    })?;

    let raw_script = match table.remove("script") {
        None => Vec::new(),
        Some(toml::Value::Array(a)) => a,
        Some(_) => return Err(ScenarioError::SchemaViolation("script: expected an array of tables".into())),
    };
    let header: Header =
        serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| schema_err("", e))?;

    let mut script = Vec::with_capacity(raw_script.len());
    for (i, entry) in raw_script.into_iter().enumerate() {
        let loc = format!("script[{i}]");
        let toml::Value::Table(mut t) = entry else {
            return Err(ScenarioError::SchemaViolation(format!("{loc}: expected a table")));
        };
        let at = match t.remove("at") {
            Some(toml::Value::Integer(v)) if v >= 0 => v as u64,
            Some(_) => return Err(ScenarioError::SchemaViolation(format!("{loc}.at: expected a non-negative integer"))),
            None => return Err(ScenarioError::SchemaViolation(format!("{loc}.at: missing field"))),
        };
        let action: Action = serde_path_to_error::deserialize(toml::Value::Table(t)).map_err(|e| schema_err(&loc, e))?;
        script.push(Step { at, action });
    }

    let scenario = Scenario { seed: header.seed, config: header.config, agents: header.agents, script };
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    pub fn agent(&self, name: &str) -> Option<&Agent> {
        self.agents.iter().find(|a| a.name == name)
    }

    /// Structural checks beyond the schema: unique names, known references,
    /// labels defined before use, non-decreasing times.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut names = BTreeSet::new();
        for (i, a) in self.agents.iter().enumerate() {
            if a.name.is_empty() || !names.insert(a.name.as_str()) {
                return Err(ScenarioError::SchemaViolation(format!("agents[{i}].name: duplicate or empty")));
            }
            if a.identity.is_empty() {
                return Err(ScenarioError::SchemaViolation(format!("agents[{i}].identity: empty")));
            }
        }
        let c = &self.config;
        if c.quorums.is_empty() || c.quorums.iter().any(|q| *q <= Fraction::from_integer(0) || *q > Fraction::from_integer(1)) {
            return Err(ScenarioError::SchemaViolation("config.quorums".into()));
        }
        if c.voting_period == 0 {
            return Err(ScenarioError::SchemaViolation("config.voting_period".into()));
        }
        if c.deterrence.factor <= Fraction::from_integer(0) {
            return Err(ScenarioError::SchemaViolation("config.deterrence.factor".into()));
        }
        if let Err(e) = c.gas_config().validate() {
            return Err(ScenarioError::SchemaViolation(format!("config.gas: {e}")));
        }

        let mut deals = BTreeSet::new();
        let mut proposals = BTreeSet::new();
        let mut last = 0;
        for (i, step) in self.script.iter().enumerate() {
            if step.at < last {
                return Err(ScenarioError::SchemaViolation("script".into()));
            }
            last = step.at;
            for name in step.action.agents() {
                if !names.contains(name) {
                    return Err(ScenarioError::UnknownAgentReference(name.to_string()));
                }
            }
            if let Some((label, defines)) = step.action.deal_ref() {
                if defines != !deals.contains(label) {
                    return Err(ScenarioError::SchemaViolation(format!("script[{i}].deal")));
                }
                deals.insert(label);
            }
            for (field, label, defines) in step.action.proposal_refs() {
                if defines != !proposals.contains(label) {
                    return Err(ScenarioError::SchemaViolation(format!("script[{i}].{field}")));
                }
                proposals.insert(label);
            }
            match &step.action {
                Action::ReputationBatch { members, deltas } if members.len() != deltas.len() => {
                    return Err(ScenarioError::SchemaViolation(format!("script[{i}].deltas")));
                }
                Action::AdvanceClock { to } if *to < step.at => {
                    return Err(ScenarioError::SchemaViolation(format!("script[{i}].to")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Count of scripted actions by name.
    pub fn action_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::new();
        for s in &self.script {
            *out.entry(s.action.name()).or_insert(0) += 1;
        }
        out
    }
}
