//! A collateralised T2 deal from creation to confirmation.
//!
//!     cargo run --example private_deal

use pnr_dao::bridge::ChainId;
use pnr_dao::dao::{Dao, DaoConfig};
use pnr_dao::identity::{keygen, DkycPolicy};
use pnr_dao::token_ledger::TokenType;

fn main() {
    let mut dao = Dao::new(DaoConfig::default(), DkycPolicy::new(true), 1);
    let (buyer, provider) = (keygen([1; 32]), keygen([2; 32]));
    dao.onboard(&buyer, b"buyer@example.org").unwrap();
    dao.onboard(&provider, b"provider@example.org").unwrap();
    dao.credit(buyer.public_key, ChainId::Execution, "USDC", 1_500);
    let (b, p) = (buyer.public_key, provider.public_key);

    let id = dao.create_private_deal(b, p, TokenType::T2, 1_000, 20, "USDC").unwrap();
    let d = dao.deals().deal(id).unwrap();
    println!("deal {id}: amount {} collateral {}", d.amount, d.collateral);

    dao.fund(id, b).unwrap();
    println!("funded, escrow {} buyer left {}", dao.deals().deal(id).unwrap().escrow_balance, dao.balance(&b, "USDC"));
    dao.mark_complete(id, p).unwrap();
    dao.confirm(id, b).unwrap();

    println!("confirmed: buyer {} provider {}", dao.balance(&b, "USDC"), dao.balance(&p, "USDC"));
    println!("reputation: buyer {:?} provider {:?}", dao.reputation().score(&b), dao.reputation().score(&p));
    println!("T4 completion records: {} / {}", dao.tokens().balance(&b, TokenType::T4), dao.tokens().balance(&p, TokenType::T4));
    for r in dao.log().records().iter().filter(|r| r.module == "deals") {
        println!("  {} {}", r.kind, r.str_field("status").unwrap_or(""));
    }
}
