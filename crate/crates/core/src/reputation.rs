//! Reputation scores with clamped additive updates and the deterrence margin.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::hash::PublicKey;
use crate::rational::{trunc_to_int, Fraction};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReputationError {
    #[error("members and deltas differ in length ({members} vs {deltas})")]
    LengthMismatch { members: usize, deltas: usize },
    #[error("unknown member")]
    UnknownMember,
    #[error("deterrence factor must be positive")]
    BadFactor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub member: PublicKey,
    pub delta: i64,
    pub reason: String,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReputationLedger {
    scores: BTreeMap<PublicKey, u64>,
    last_updated: BTreeMap<PublicKey, u64>,
    history: Vec<HistoryEntry>,
}

fn clamp_add(score: u64, delta: i64) -> u64 {
    let v = score as i128 + delta as i128;
    v.clamp(0, u64::MAX as i128) as u64
}

impl ReputationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// New members start at zero. Re-registering keeps the existing score.
    pub fn register(&mut self, member: PublicKey, now: u64) {
        self.scores.entry(member).or_insert(0);
        self.last_updated.entry(member).or_insert(now);
    }

    pub fn score(&self, member: &PublicKey) -> Option<u64> {
        self.scores.get(member).copied()
    }

    pub fn scores(&self) -> &BTreeMap<PublicKey, u64> {
        &self.scores
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    /// Apply one delta with the zero floor. Returns the change actually applied.
    pub fn apply(&mut self, member: &PublicKey, delta: i64, reason: &str, now: u64) -> Result<i64, ReputationError> {
        let slot = self.scores.get_mut(member).ok_or(ReputationError::UnknownMember)?;
        let before = *slot;
        *slot = clamp_add(before, delta);
        let applied = *slot as i128 - before as i128;
        self.last_updated.insert(*member, now);
        self.history.push(HistoryEntry { member: *member, delta, reason: reason.to_string(), timestamp: now });
        Ok(applied as i64)
    }

    /// Sequential load-add-store over the batch, clamping at zero after every
    /// element. Validates everything before touching state.
    pub fn batch_update(&mut self, members: &[PublicKey], deltas: &[i64], now: u64) -> Result<(), ReputationError> {
        if members.len() != deltas.len() {
            return Err(ReputationError::LengthMismatch { members: members.len(), deltas: deltas.len() });
        }
        if members.iter().any(|m| !self.scores.contains_key(m)) {
            return Err(ReputationError::UnknownMember);
        }
        for (m, d) in members.iter().zip(deltas) {
            self.apply(m, *d, "batch", now).expect("membership checked");
        }
        Ok(())
    }

    /// Rebuild scores from scratch by replaying the history.
    pub fn replay(&self) -> BTreeMap<PublicKey, u64> {
        let mut scores: BTreeMap<PublicKey, u64> = self.scores.keys().map(|k| (*k, 0)).collect();
        for e in &self.history {
            let s = scores.entry(e.member).or_insert(0);
            *s = clamp_add(*s, e.delta);
        }
        scores
    }

    pub fn deterrence_margin(
        &self,
        member: &PublicKey,
        value_per_point: i128,
        cheating_gain: i128,
        factor: Fraction,
    ) -> Result<DeterrenceMargin, ReputationError> {
        let score = self.score(member).ok_or(ReputationError::UnknownMember)?;
        deterrence_margin(score, value_per_point, cheating_gain, factor)
    }

    /// `member,score,last_updated` with hex member keys.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["member", "score", "last_updated"]).expect("in-memory csv");
        for (m, s) in &self.scores {
            let t = self.last_updated.get(m).copied().unwrap_or(0);
            w.write_record([m.to_hex(), s.to_string(), t.to_string()]).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterrenceMargin {
    /// Value lost if the member's standing is wiped out.
    pub loss: i128,
    /// `loss - factor * gain`, truncated toward zero.
    pub margin: i128,
    /// `loss >= factor * gain`, compared exactly.
    pub satisfied: bool,
}

pub fn deterrence_margin(
    score: u64,
    value_per_point: i128,
    cheating_gain: i128,
    factor: Fraction,
) -> Result<DeterrenceMargin, ReputationError> {
    if factor <= Fraction::from_integer(0) {
        return Err(ReputationError::BadFactor);
    }
    let loss = score as i128 * value_per_point;
    let rhs = factor * Fraction::from_integer(cheating_gain);
    let diff = Fraction::from_integer(loss) - rhs;
    Ok(DeterrenceMargin { loss, margin: trunc_to_int(&diff), satisfied: Fraction::from_integer(loss) >= rhs })
}
