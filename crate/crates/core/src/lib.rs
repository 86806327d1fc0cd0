//! A privacy-preserving member organisation: soulbound membership tokens,
//! anonymous voting, escrowed private deals, reputation, a two-chain bridge,
//! a gas cost model and a seeded scenario simulator.
//!
//! [`dao::Dao`] ties the modules together. The `examples/` directory walks
//! through each capability.

pub mod bridge;
pub mod deals;
pub mod gas_model;
pub mod governance;
pub mod hash;
pub mod identity;
pub mod merkle;
pub mod rational;
pub mod reputation;
pub mod token_ledger;
pub mod dao;
pub mod events;
pub mod simulator;
