use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use molguide::cli::{self, Command, RunOptions};

#[derive(Parser)]
#[command(name = "molguide", version, about = "Single-molecule waveguide source toolkit")]
struct Args {
    /// Experiment config (TOML); defaults to the bundled reference device.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named seed override, e.g. `--seed emitter=7`. Repeatable.
    #[arg(long = "seed", global = true, value_parser = parse_seed)]
    seeds: Vec<(String, u64)>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Treat unknown config keys as errors.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Guided modes of the ridge cross-section.
    Modes,
    /// Decay rate, far-field pattern and objective collection in the planar stack.
    Radiate,
    /// Coupling efficiency over emitter height and crystal thickness.
    BetaMap,
    /// Simulated two-detector coincidence measurement with g2 fit.
    SimulateHbt,
    /// Efficiency-budget tables.
    BudgetReport,
    /// The full chain from mode solve to budget tables.
    ReproducePaper,
    /// Checks that every output file is listed by exactly one manifest.
    SelfAudit,
}

fn parse_seed(s: &str) -> Result<(String, u64), String> {
    cli::parse_seed(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let opts = RunOptions { config: args.config, seeds: args.seeds, out: args.out, strict: args.strict };
    let command = match args.command {
        Sub::Modes => Command::Modes,
        Sub::Radiate => Command::Radiate,
        Sub::BetaMap => Command::BetaMap,
        Sub::SimulateHbt => Command::SimulateHbt,
        Sub::BudgetReport => Command::BudgetReport,
        Sub::ReproducePaper => Command::ReproducePaper,
        Sub::SelfAudit => {
            let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            return match cli::self_audit(&dir) {
                Ok(r) => {
                    println!("{} manifests, {} files", r.manifests, r.files);
                    for p in &r.problems {
                        println!("problem: {p}");
                    }
                    if r.is_clean() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            };
        }
    };
    match cli::run(command, &opts) {
        Ok((m, dir)) => {
            println!(
                "{}: {} outputs in {} (seeds {})",
                m.command,
                m.outputs.len(),
                dir.display(),
                cli::describe_seeds(&m.seeds)
            );
            if command == Command::BudgetReport {
                if let Ok(text) = std::fs::read_to_string(dir.join("budget_report.txt")) {
                    print!("{text}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
