//! Parametric gas and USD cost model.
//!
//! All arithmetic is exact: gas is integral, USD and percentages are
//! [`Fraction`]s. Defaults ship in `config/default.toml`, which documents how
//! each calibrated constant was derived.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::rational::{format_fixed, serde_fraction, Fraction};

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

const WEI_PER_NATIVE: i128 = 1_000_000_000_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GasError {
    #[error("batch size must be at least 1")]
    ZeroN,
    #[error("gas values must be positive")]
    ZeroGas,
    #[error("operation {0} is not in the gas table")]
    UnknownOp(OpKind),
    #[error("invalid gas table: {0}")]
    InvalidTable(String),
    #[error("cannot parse gas config: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    AuthMint,
    PrivMint,
    BatchUpdate,
    Vote,
    ProposalCreate,
    DealCreate,
    Confirm,
    Dispute,
    BridgeLock,
    BridgeMint,
}

impl OpKind {
    pub const ALL: [OpKind; 10] = [
        Self::AuthMint,
        Self::PrivMint,
        Self::BatchUpdate,
        Self::Vote,
        Self::ProposalCreate,
        Self::DealCreate,
        Self::Confirm,
        Self::Dispute,
        Self::BridgeLock,
        Self::BridgeMint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AuthMint => "auth_mint",
            Self::PrivMint => "priv_mint",
            Self::BatchUpdate => "batch_update",
            Self::Vote => "vote",
            Self::ProposalCreate => "proposal_create",
            Self::DealCreate => "deal_create",
            Self::Confirm => "confirm",
            Self::Dispute => "dispute",
            Self::BridgeLock => "bridge_lock",
            Self::BridgeMint => "bridge_mint",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpKind {
    type Err = String;

    /// Accepts `auth_mint`, `AuthMint` or `authmint`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| *c != '_' && *c != '-').collect::<String>().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|op| op.as_str().replace('_', "") == norm)
            .ok_or_else(|| format!("unknown operation {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchCost {
    pub fixed: u64,
    pub marginal: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasTable {
    pub base: BTreeMap<OpKind, u64>,
    #[serde(default)]
    pub batch: BTreeMap<OpKind, BatchCost>,
}

impl GasTable {
    pub fn validate(&self) -> Result<(), GasError> {
        if let Some((op, _)) = self.base.iter().find(|(_, g)| **g == 0) {
            return Err(GasError::InvalidTable(format!("{op} has zero base gas")));
        }
        for (op, b) in &self.batch {
            let base = self.base.get(op).ok_or_else(|| GasError::InvalidTable(format!("batch entry {op} has no base gas")))?;
            if b.fixed == 0 || b.marginal == 0 {
                return Err(GasError::InvalidTable(format!("{op} batch costs must be positive")));
            }
            if b.marginal >= *base {
                return Err(GasError::InvalidTable(format!("{op} marginal gas must be below its individual gas")));
            }
        }
        Ok(())
    }

    pub fn base_gas(&self, op: OpKind) -> Result<u64, GasError> {
        self.base.get(&op).copied().ok_or(GasError::UnknownOp(op))
    }

    /// Gas for `n` operations: one batch transaction for batchable ops,
    /// otherwise `n` standalone transactions.
    pub fn gas_for(&self, op: OpKind, n: u64) -> Result<u64, GasError> {
        let base = self.base_gas(op)?;
        if n == 0 {
            return Ok(0);
        }
        Ok(match self.batch.get(&op) {
            Some(b) => b.fixed + b.marginal * n,
            None => base * n,
        })
    }

    /// Savings of one `n`-element batch over `n` standalone transactions.
    pub fn batch_efficiency(&self, op: OpKind, n: u64) -> Result<Fraction, GasError> {
        let b = self.batch.get(&op).ok_or(GasError::UnknownOp(op))?;
        batch_efficiency(self.base_gas(op)?, n, b.fixed + b.marginal * n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    L1,
    L2,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Layer::L1 => "L1",
            Layer::L2 => "L2",
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layer: Layer,
    pub gas_price_wei: u64,
    #[serde(with = "serde_fraction")]
    pub native_token_usd: Fraction,
}

impl NetworkParams {
    pub fn usd_for_gas(&self, gas: u64) -> Fraction {
        Fraction::new(gas as i128 * self.gas_price_wei as i128, WEI_PER_NATIVE) * self.native_token_usd
    }

    fn validate(&self) -> Result<(), GasError> {
        if self.gas_price_wei == 0 || self.native_token_usd <= Fraction::from_integer(0) {
            return Err(GasError::InvalidTable(format!("{} network parameters must be positive", self.layer)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Networks {
    pub l1: NetworkParams,
    pub l2: NetworkParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasConfig {
    pub gas: GasTable,
    pub network: Networks,
}

impl GasConfig {
    pub fn from_toml(doc: &str) -> Result<Self, GasError> {
        let cfg: GasConfig = toml::from_str(doc).map_err(|e| GasError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), GasError> {
        self.gas.validate()?;
        self.network.l1.validate()?;
        self.network.l2.validate()
    }

    pub fn params(&self, layer: Layer) -> &NetworkParams {
        match layer {
            Layer::L1 => &self.network.l1,
            Layer::L2 => &self.network.l2,
        }
    }
}

impl Default for GasConfig {
    fn default() -> Self {
        Self::from_toml(DEFAULT_CONFIG).expect("shipped default gas config is valid")
    }
}

/// `((individual * n - batch) / (individual * n)) * 100`.
pub fn batch_efficiency(gas_individual: u64, n: u64, gas_batch: u64) -> Result<Fraction, GasError> {
    if n == 0 {
        return Err(GasError::ZeroN);
    }
    if gas_individual == 0 || gas_batch == 0 {
        return Err(GasError::ZeroGas);
    }
    let total = gas_individual as i128 * n as i128;
    Ok(Fraction::new((total - gas_batch as i128) * 100, total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cost {
    pub gas: u64,
    pub usd: Fraction,
}

pub fn cost_of(op: OpKind, n: u64, params: &NetworkParams, table: &GasTable) -> Result<Cost, GasError> {
    let gas = table.gas_for(op, n)?;
    Ok(Cost { gas, usd: params.usd_for_gas(gas) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrgCost {
    pub base_gas: u64,
    pub per_member_gas: u64,
    pub gas: u64,
    pub usd: Fraction,
}

/// `base + members * per_member`, with base = proposal creation plus the
/// batch fixed overhead and per-member = one auth mint plus one vote.
pub fn total_org_cost(members: u64, params: &NetworkParams, table: &GasTable) -> Result<OrgCost, GasError> {
    let overhead = table.batch.get(&OpKind::BatchUpdate).map_or(0, |b| b.fixed);
    let base_gas = table.base_gas(OpKind::ProposalCreate)? + overhead;
    let per_member_gas = table.base_gas(OpKind::AuthMint)? + table.base_gas(OpKind::Vote)?;
    let gas = base_gas + members * per_member_gas;
    Ok(OrgCost { base_gas, per_member_gas, gas, usd: params.usd_for_gas(gas) })
}

/// `(1 - usd_l2 / usd_l1) * 100` for a single operation.
pub fn l1_l2_reduction(op: OpKind, l1: &NetworkParams, l2: &NetworkParams, table: &GasTable) -> Result<Fraction, GasError> {
    let a = cost_of(op, 1, l1, table)?.usd;
    let b = cost_of(op, 1, l2, table)?.usd;
    if a == Fraction::from_integer(0) {
        return Err(GasError::ZeroGas);
    }
    Ok((Fraction::from_integer(1) - b / a) * Fraction::from_integer(100))
}

pub const USD_PLACES: u32 = 6;
pub const PCT_PLACES: u32 = 4;

pub fn format_usd(v: &Fraction) -> String {
    format_fixed(v, USD_PLACES)
}

pub fn format_pct(v: &Fraction) -> String {
    format_fixed(v, PCT_PLACES)
}

/// One line of a cost report: `op,layer,gas,usd,reduction_pct`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostRow {
    pub op: String,
    pub layer: Layer,
    pub gas: u64,
    pub usd: Fraction,
    /// L2 savings versus L1; only set on L2 rows.
    pub reduction_pct: Option<Fraction>,
}

impl CostRow {
    pub const HEADER: [&'static str; 5] = ["op", "layer", "gas", "usd", "reduction_pct"];

    pub fn fields(&self) -> [String; 5] {
        [
            self.op.clone(),
            self.layer.to_string(),
            self.gas.to_string(),
            format_usd(&self.usd),
            self.reduction_pct.as_ref().map(format_pct).unwrap_or_default(),
        ]
    }
}

/// L1 and L2 rows for `n` operations of kind `op`.
pub fn cost_rows(op: OpKind, n: u64, cfg: &GasConfig) -> Result<Vec<CostRow>, GasError> {
    rows_for_gas(op.as_str(), cfg.gas.gas_for(op, n)?, cfg)
}

/// L1 and L2 rows for an already-known gas amount.
pub fn rows_for_gas(label: &str, gas: u64, cfg: &GasConfig) -> Result<Vec<CostRow>, GasError> {
    let l1 = cfg.network.l1.usd_for_gas(gas);
    let l2 = cfg.network.l2.usd_for_gas(gas);
    let reduction = if l1 == Fraction::from_integer(0) {
        None
    } else {
        Some((Fraction::from_integer(1) - l2 / l1) * Fraction::from_integer(100))
    };
    Ok(vec![
        CostRow { op: label.to_string(), layer: Layer::L1, gas, usd: l1, reduction_pct: None },
        CostRow { op: label.to_string(), layer: Layer::L2, gas, usd: l2, reduction_pct: reduction },
    ])
}

pub fn cost_rows_csv(rows: &[CostRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CostRow::HEADER).expect("in-memory csv");
    for r in rows {
        w.write_record(r.fields()).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

/// Gas used per operation kind during a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GasMeter {
    pub per_op: BTreeMap<OpKind, MeterEntry>,
    /// `(op, n, efficiency_pct)` for every batched call.
    pub batches: Vec<(OpKind, u64, Fraction)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MeterEntry {
    pub count: u64,
    pub gas: u64,
}

impl GasMeter {
    pub fn charge(&mut self, table: &GasTable, op: OpKind, n: u64) -> Result<u64, GasError> {
        let gas = table.gas_for(op, n)?;
        let e = self.per_op.entry(op).or_default();
        e.count += n;
        e.gas += gas;
        if table.batch.contains_key(&op) && n > 1 {
            self.batches.push((op, n, table.batch_efficiency(op, n)?));
        }
        Ok(gas)
    }

    pub fn total_gas(&self) -> u64 {
        self.per_op.values().map(|e| e.gas).sum()
    }
}
