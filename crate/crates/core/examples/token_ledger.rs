//! Soulbound auth tokens, sealed grant metadata, restrictions and batches.
//!
//!     cargo run --example token_ledger

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use pnr_dao::identity::{decrypt, keygen, IdentityEscrow};
use pnr_dao::token_ledger::{TokenLedger, TokenType};

fn main() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let escrow = IdentityEscrow::new([9; 32]);
    let mut ledger = TokenLedger::new();
    let (a, b) = (keygen([1; 32]), keygen([2; 32]));
    for (k, id) in [(&a, "a@x"), (&b, "b@x")] {
        let rec = escrow.prepare(id.as_bytes()).unwrap();
        ledger.mint_auth(k.public_key, k.sealing_key(), rec.commitment, true, 0).unwrap();
    }
    let tok = ledger.active_token_of(&a.public_key).unwrap().token_id;
    println!("transfer auth token: {:?}", ledger.transfer_auth(tok, a.public_key, b.public_key));

    let g = ledger.mint_priv(a.public_key, TokenType::T1, 3, b"deal 17 terms", &mut rng).unwrap();
    let sealed = ledger.grant_metadata(g).unwrap();
    println!("sealed metadata: {} bytes, owner reads {:?}", sealed.0.len(), String::from_utf8(decrypt(&a, sealed).unwrap()).unwrap());
    println!("other member reads: {:?}", decrypt(&b, sealed).map(|_| ()));

    ledger.transfer_priv(a.public_key, b.public_key, TokenType::T1, 2).unwrap();
    println!("T1 after transfer: a={} b={}", ledger.balance(&a.public_key, TokenType::T1), ledger.balance(&b.public_key, TokenType::T1));

    ledger.mint_priv(a.public_key, TokenType::T4, 1, b"completed", &mut rng).unwrap();
    println!("move a T4 record: {:?}", ledger.transfer_priv(a.public_key, b.public_key, TokenType::T4, 1));

    ledger.restrict_type(b.public_key, TokenType::T1).unwrap();
    println!("restricted receiver: {:?}", ledger.transfer_priv(a.public_key, b.public_key, TokenType::T1, 1));

    // all or nothing: the second entry would go negative
    let before = ledger.to_canonical_json();
    let res = ledger.batch_update_priv(&[(a.public_key, TokenType::T5, 4), (a.public_key, TokenType::T4, -5)]);
    println!("batch: {:?}, unchanged: {}", res, ledger.to_canonical_json() == before);

    ledger.burn_auth(tok, 1).unwrap();
    let rec = escrow.prepare(b"a@x").unwrap();
    let fresh = keygen([3; 32]);
    println!("rejoin after burn: {:?}", ledger.mint_auth(fresh.public_key, fresh.sealing_key(), rec.commitment, true, 2));
}
