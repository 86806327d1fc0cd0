#![allow(dead_code)]

use std::collections::BTreeMap;

use pnr_dao::bridge::ChainId;
use pnr_dao::dao::Dao;
use pnr_dao::hash::PublicKey;
use pnr_dao::identity::{keygen, KeyPair};

pub const USD: &str = "USDC";

pub fn keys(n: usize, salt: u8) -> Vec<KeyPair> {
    (0..n)
        .map(|i| {
            let mut seed = [salt; 32];
            seed[..8].copy_from_slice(&(i as u64).to_le_bytes());
            keygen(seed)
        })
        .collect()
}

/// Supply recomputed from the outside: every known holder on both chains,
/// every deal's escrow, every proof still in flight.
pub fn observed_supply(dao: &Dao, holders: &[PublicKey], asset: &str) -> u64 {
    let b = dao.bridge();
    let held: u64 = holders
        .iter()
        .map(|pk| b.chain(ChainId::Settlement).balance(pk, asset) + b.chain(ChainId::Execution).balance(pk, asset))
        .sum();
    let escrow: u64 = dao.deals().deals().filter(|d| d.payment_type == asset).map(|d| d.escrow_balance).sum();
    let in_flight: u64 = b.pending().filter(|p| p.asset == asset).map(|p| p.amount).sum();
    held + escrow + in_flight
}

pub fn residual_terminal_escrow(dao: &Dao) -> usize {
    dao.deals().deals().filter(|d| d.status.is_terminal() && d.escrow_balance != 0).count()
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

pub fn holders(keys: &BTreeMap<String, PublicKey>) -> Vec<PublicKey> {
    keys.values().copied().collect()
}
