//! Anonymous voting: Merkle membership, nullifiers, commit-then-open tally.
//!
//!     cargo run --example private_voting

use pnr_dao::governance::{
    derive_nullifier, threshold_decision, Ballot, DecisionRule, Governance, GovernanceConfig, ProposalKind,
};
use pnr_dao::hash::Digest;
use pnr_dao::identity::keygen;
use pnr_dao::merkle::MemberTree;
use pnr_dao::rational::Fraction;

fn main() {
    let members: Vec<_> = (1..=10u8).map(|i| keygen([i; 32])).collect();
    let pks: Vec<_> = members.iter().map(|k| k.public_key).collect();
    let tree = MemberTree::build(&pks).unwrap();
    println!("{} members, depth {}, root {}", tree.len(), tree.depth(), tree.root());

    let mut gov = Governance::new(GovernanceConfig::default());
    let kind = ProposalKind::Generic { payload: Digest([7; 32]) };
    let q = Fraction::new(1, 2);
    let p = gov.initiate_proposal(&pks[0], kind, q, DecisionRule::QuorumMajority, 5, 0, &tree).unwrap().clone();

    // six turn out, three in favour
    let votes = [1u8, 1, 1, 0, 0, 0];
    let mut openings = Vec::new();
    for (i, v) in votes.iter().enumerate() {
        let r = [100 + i as u8; 32];
        let ballot = Ballot::honest(&members[i], &p, &tree, *v, r).unwrap();
        gov.cast_vote(&ballot, 1).unwrap();
        openings.push((*v, r));
    }
    let again = Ballot::honest(&members[0], &p, &tree, 0, [9; 32]).unwrap();
    println!("second ballot from member 0: {:?}", gov.cast_vote(&again, 2).unwrap_err());
    println!("nullifier of member 0: {}", derive_nullifier(&members[0].secret_key, &p.id));

    println!("finalize early: {:?}", gov.finalize(&p.id, &openings, 3).unwrap_err());
    let (status, tally) = gov.finalize(&p.id, &openings, 5).unwrap();
    println!("quorum-majority: {status} with {}/{} yes", tally.yes, tally.total);

    // the same votes under the threshold equation: 3 >= 0.5 * 10 is false
    println!("threshold rule: {}", threshold_decision(&votes, q, 10).unwrap());
}
