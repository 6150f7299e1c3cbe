use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hnn_core::suites::Suite;
use hnn_forge::{builtin_problem, list_builtins, load_config, run, CliError};

#[derive(Parser)]
#[command(name = "hnn-forge", version, about = "Build and certify HNN extensions of finite quantum groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run check suites on a config file or a builtin family.
    Run {
        #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
        config: Option<PathBuf>,
        #[arg(long)]
        builtin: Option<String>,
        /// Truncation length (builtins only; configs set `L`).
        #[arg(long = "L", requires = "builtin")]
        l: Option<usize>,
        /// Suites to run; repeatable. Default: all.
        #[arg(long = "suite", value_parser = parse_suite, requires = "builtin")]
        suites: Vec<Suite>,
        #[arg(long, requires = "builtin")]
        seed: Option<u64>,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the JSON report instead of the summary.
        #[arg(long)]
        json: bool,
    },
    /// List the builtin families with their dimensions.
    List,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: hnn_core::Error| e.to_string())
}

fn config_error(e: CliError) -> ExitCode {
    eprintln!("hnn-forge: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => match list_builtins() {
            Ok(list) => {
                println!("{:<12} {:>5} {:>5} {:>12}  description", "name", "dimA", "dimB", "fock(L=1)");
                for b in list {
                    println!("{:<12} {:>5} {:>5} {:>12}  {}", b.name, b.dim_a, b.dim_b, b.fock_dim_l1, b.description);
                }
                ExitCode::SUCCESS
            }
            Err(e) => config_error(e),
        },
        Command::Run { config, builtin, l, suites, seed, out, json } => {
            let problem = match (config, builtin) {
                (Some(path), _) => load_config(&path),
                (None, Some(name)) => builtin_problem(&name, l, suites, seed),
                (None, None) => unreachable!("clap requires one source"),
            };
            let problem = match problem {
                Ok(p) => p,
                Err(e) => return config_error(e),
            };
            let report = run(&problem);
            if let Some(path) = out {
                if let Err(e) = fs::write(&path, report.to_json()) {
                    return config_error(CliError::Io(path, e));
                }
            }
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.summary());
            }
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
