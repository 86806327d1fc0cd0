//! Clamped reputation updates and the deterrence margin.
//!
//!     cargo run --example reputation

use pnr_dao::identity::keygen;
use pnr_dao::rational::Fraction;
use pnr_dao::reputation::ReputationLedger;

fn main() {
    let mut rep = ReputationLedger::new();
    let (a, b) = (keygen([1; 32]).public_key, keygen([2; 32]).public_key);
    rep.register(a, 0);
    rep.register(b, 0);

    rep.batch_update(&[a, b, a, b], &[5, 1, 5, -4], 1).unwrap();
    println!("after batch: a={:?} b={:?}", rep.score(&a), rep.score(&b));
    println!("replay agrees: {}", &rep.replay() == rep.scores());

    let factor = Fraction::new(23, 10);
    for score in [0, 5, 7, 10] {
        let m = pnr_dao::reputation::deterrence_margin(score, 100, 300, factor).unwrap();
        println!("score {score:>2}: loss {:>4} margin {:>5} deters {}", m.loss, m.margin, m.satisfied);
    }
    print!("{}", rep.to_csv());
}
