//! Run a scenario file and print its metrics table.
//!
//!     cargo run --example scenario_run -- crates/core/scenarios/removal.toml

use pnr_dao::simulator::{load_scenario, run};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/removal.toml").to_string());
    let doc = std::fs::read_to_string(&path).expect("readable scenario");
    let scenario = match load_scenario(&doc) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{path}: {e}");
            std::process::exit(1);
        }
    };
    let (log, metrics) = run(&scenario);
    for r in log.records().iter().filter(|r| r.module == "governance") {
        println!("t={:<3} {}", r.time, r.kind);
    }
    println!("{} events\n", log.len());
    print!("{}", metrics.to_table());
}
