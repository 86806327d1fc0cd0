//! Lock on settlement, mint on execution, burn and release back.
//!
//!     cargo run --example bridge_transfer

use pnr_dao::bridge::{Bridge, BridgeAuthority, ChainId};
use pnr_dao::identity::keygen;

fn main() {
    let mut bridge = Bridge::new(BridgeAuthority::new([42; 32]));
    let alice = keygen([1; 32]).public_key;
    bridge.settlement.credit(alice, "USDC", 1_000);

    let proof = bridge.initiate(ChainId::Settlement, &alice, "USDC", 600, alice, 1).unwrap();
    println!("locked 600, id {}", proof.transfer_id);
    println!("in flight {} supply {}", bridge.in_flight("USDC"), bridge.supply("USDC"));

    let mut forged = proof.clone();
    forged.amount = 6_000;
    println!("forged amount: {:?}", bridge.complete(&forged));
    bridge.complete(&proof).unwrap();
    println!("replay: {:?}", bridge.complete(&proof));

    let back = bridge.initiate(ChainId::Execution, &alice, "USDC", 250, alice, 2).unwrap();
    bridge.complete(&back).unwrap();
    println!(
        "settlement {} execution {} locked {} supply {} unbacked {}",
        bridge.settlement.balance(&alice, "USDC"),
        bridge.execution.balance(&alice, "USDC"),
        bridge.outstanding_locked("USDC"),
        bridge.supply("USDC"),
        bridge.unbacked_count()
    );
}
