//! Onboard members, then watch a Sybil clone and an unverified identity bounce.
//!
//!     cargo run --example onboarding

use pnr_dao::dao::{Dao, DaoConfig};
use pnr_dao::identity::{keygen, open_commitment, DkycPolicy};

fn main() {
    let policy = DkycPolicy::new(false).with(b"ada@example.org", true).with(b"bo@example.org", true);
    let mut dao = Dao::new(DaoConfig::default(), policy, 42);

    let ada = keygen([1; 32]);
    let bo = keygen([2; 32]);
    let clone = keygen([3; 32]);
    let stranger = keygen([4; 32]);

    dao.onboard(&ada, b"ada@example.org").unwrap();
    dao.onboard(&bo, b"bo@example.org").unwrap();

    // same identity, fresh keypair
    let err = dao.onboard(&clone, b"ada@example.org").unwrap_err();
    println!("clone of ada: {} ({})", err, err.code());
    let err = dao.onboard(&stranger, b"eve@example.org").unwrap_err();
    println!("unverified:   {} ({})", err, err.code());

    println!("members: {}", dao.tokens().member_count());
    let token = dao.tokens().active_token_of(&ada.public_key).unwrap();
    let record = dao.escrow().get(&ada.public_key).unwrap();
    println!("ada's commitment {}", token.identity_commitment);
    println!("escrowed opening verifies: {}", open_commitment(&token.identity_commitment, &record.identity, &record.nonce));
}
