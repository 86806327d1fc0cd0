//! Cost figures from the shipped gas table.
//!
//!     cargo run --example gas_costs

use pnr_dao::gas_model::{cost_rows, cost_rows_csv, format_pct, format_usd, total_org_cost, GasConfig, OpKind};

fn main() {
    let cfg = GasConfig::default();
    print!("{}", cost_rows_csv(&cost_rows(OpKind::Vote, 1, &cfg).unwrap()));
    print!("{}", cost_rows_csv(&cost_rows(OpKind::AuthMint, 1, &cfg).unwrap()).lines().skip(1).map(|l| format!("{l}\n")).collect::<String>());

    for n in [1, 10, 50, 100] {
        let eff = cfg.gas.batch_efficiency(OpKind::BatchUpdate, n).unwrap();
        println!("batch_update x{n:<3} gas {:>8}  saved {}%", cfg.gas.gas_for(OpKind::BatchUpdate, n).unwrap(), format_pct(&eff));
    }
    for m in [10, 100, 1_000] {
        let l1 = total_org_cost(m, &cfg.network.l1, &cfg.gas).unwrap();
        let l2 = total_org_cost(m, &cfg.network.l2, &cfg.gas).unwrap();
        println!("{m:>5} members: {} gas, L1 ${} L2 ${}", l1.gas, format_usd(&l1.usd), format_usd(&l2.usd));
    }
}
