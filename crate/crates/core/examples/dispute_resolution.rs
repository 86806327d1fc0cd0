//! Dispute, mediation timeout, member vote, refund, removal and disclosure.
//!
//!     cargo run --example dispute_resolution

use pnr_dao::bridge::ChainId;
use pnr_dao::dao::{Dao, DaoConfig};
use pnr_dao::governance::Ballot;
use pnr_dao::identity::{keygen, DkycPolicy, KeyPair};
use pnr_dao::token_ledger::TokenType;

fn vote_yes(dao: &mut Dao, voters: &[KeyPair], pid: pnr_dao::governance::ProposalId) -> Vec<(u8, [u8; 32])> {
    let p = dao.governance().proposal(&pid).unwrap().clone();
    let tree = dao.tree_for(&pid).unwrap().clone();
    voters
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let r = [i as u8 + 1; 32];
            dao.cast_vote(&Ballot::honest(k, &p, &tree, 1, r).unwrap()).unwrap();
            (1, r)
        })
        .collect()
}

fn main() {
    let mut dao = Dao::new(DaoConfig::default(), DkycPolicy::new(true), 5);
    let members: Vec<KeyPair> = (1..=6u8).map(|i| keygen([i; 32])).collect();
    for (i, k) in members.iter().enumerate() {
        dao.onboard(k, format!("member{i}@example.org").as_bytes()).unwrap();
    }
    let (buyer, cheat) = (members[0].public_key, members[1].public_key);
    dao.credit(buyer, ChainId::Execution, "USDC", 1_100);

    let deal = dao.create_private_deal(buyer, cheat, TokenType::T2, 1_000, 5, "USDC").unwrap();
    dao.fund(deal, buyer).unwrap();
    dao.advance_clock(6).unwrap();
    dao.initiate_dispute(deal, buyer, b"nothing delivered").unwrap();
    let deadline = dao.advance_to_mediation(deal).unwrap();
    dao.advance_clock(deadline).unwrap();

    let pid = dao.mediation_timeout(deal).unwrap();
    let openings = vote_yes(&mut dao, &members[2..6], pid);
    dao.advance_clock(deadline + dao.config().voting_period).unwrap();
    println!("dispute vote: {:?}", dao.finalize(pid, &openings).unwrap());
    let e = dao.enforce(deal).unwrap();
    println!("enforced {} -> buyer holds {}", e.outcome, dao.balance(&buyer, "USDC"));

    let removal = dao.propose_removal(buyer, cheat, None).unwrap();
    let openings = vote_yes(&mut dao, &members[2..6], removal);
    dao.advance_clock(dao.now() + dao.config().voting_period).unwrap();
    dao.finalize(removal, &openings).unwrap();
    dao.execute_removal(removal).unwrap();
    let d = dao.force_disclose(cheat).unwrap();
    println!("removed; disclosed identity {:?}", String::from_utf8_lossy(&d.identity));

    let err = dao.onboard(&keygen([99; 32]), b"member1@example.org").unwrap_err();
    println!("rejoin with a new key: {}", err.code());
    println!("members left: {}", dao.tokens().member_count());
}
