use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pnr_dao::gas_model::{cost_rows, cost_rows_csv, format_pct, GasConfig, GasError, OpKind};
use pnr_dao::simulator::{load_scenario, run, Format, MetricsReport};

const VALIDATION: u8 = 1;
const RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "pnr-dao", version, about = "Scenario runner and cost calculator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario document against the schema.
    Validate { scenario: PathBuf },
    /// Run a scenario and write events.log and metrics.csv.
    Run {
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Render a metrics file.
    Report {
        metrics: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Gas and USD cost of `n` operations on both layers.
    Gas {
        /// Gas config (TOML); defaults to the shipped table.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        op: String,
        #[arg(long, default_value_t = 1)]
        n: u64,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn read(path: &PathBuf) -> Result<String, ExitCode> {
    fs::read_to_string(path).map_err(|e| fail(RUNTIME, format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Validate { scenario } => {
            let doc = match read(&scenario) {
                Ok(d) => d,
                Err(code) => return code,
            };
            match load_scenario(&doc) {
                Ok(sc) => {
                    println!("ok: {} agents, {} steps", sc.agents.len(), sc.script.len());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(VALIDATION, e),
            }
        }
        Command::Run { scenario, seed, out } => {
            let doc = match read(&scenario) {
                Ok(d) => d,
                Err(code) => return code,
            };
            let mut sc = match load_scenario(&doc) {
                Ok(sc) => sc,
                Err(e) => return fail(VALIDATION, e),
            };
            if let Some(s) = seed {
                sc.seed = s;
            }
            let (log, metrics) = run(&sc);
            let written = fs::create_dir_all(&out)
                .and_then(|_| fs::write(out.join("events.log"), log.to_jsonl()))
                .and_then(|_| fs::write(out.join("metrics.csv"), metrics.to_csv()));
            if let Err(e) = written {
                return fail(RUNTIME, format!("{}: {e}", out.display()));
            }
            println!("{} events, {} metric rows written to {}", log.len(), metrics.rows().len(), out.display());
            ExitCode::SUCCESS
        }
        Command::Report { metrics, format } => {
            let format: Format = match format.parse() {
                Ok(f) => f,
                Err(e) => return fail(VALIDATION, e),
            };
            let text = match read(&metrics) {
                Ok(t) => t,
                Err(code) => return code,
            };
            match MetricsReport::from_csv(&text) {
                Ok(m) => {
                    print!("{}", m.render(format));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(VALIDATION, e),
            }
        }
        Command::Gas { table, op, n } => {
            let cfg = match table {
                None => GasConfig::default(),
                Some(path) => match read(&path).map(|t| GasConfig::from_toml(&t)) {
                    Ok(Ok(c)) => c,
                    Ok(Err(e)) => return fail(VALIDATION, e),
                    Err(code) => return code,
                },
            };
            let op: OpKind = match op.parse() {
                Ok(o) => o,
                Err(e) => return fail(VALIDATION, e),
            };
            if n == 0 {
                return fail(VALIDATION, GasError::ZeroN);
            }
            let rows = match cost_rows(op, n, &cfg) {
                Ok(r) => r,
                Err(e) => return fail(VALIDATION, e),
            };
            print!("{}", cost_rows_csv(&rows));
            if n > 1 {
                if let Ok(eff) = cfg.gas.batch_efficiency(op, n) {
                    println!("batch_efficiency_pct,{}", format_pct(&eff));
                }
            }
            ExitCode::SUCCESS
        }
    }
}
