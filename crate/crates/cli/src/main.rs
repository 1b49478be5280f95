use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mathesis::cli::{self, CliError, Method, Outcome, RunOptions};

#[derive(Parser)]
#[command(name = "mathesis", version, about = "Energy-guided theorem proving on hypergraph proof states")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines; defaults to $MATHESIS_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Configuration override, repeatable; wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for traces, checkpoints and logs.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; runs are bit-exact at the default of 1.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Print the energy report of a problem's premises under its bindings.
    Verify { problem: PathBuf },
    /// Search for a proof and write trace.jsonl.
    Prove {
        problem: PathBuf,
        #[arg(long, default_value = "mcts")]
        method: Method,
    },
    /// Energy-guided policy training on problem files or the synthetic family.
    Train {
        problems: Vec<PathBuf>,
        /// Continue from checkpoint.bin in the output directory.
        #[arg(long)]
        resume: bool,
        /// Episodes to run now; defaults to the train.episodes setting.
        #[arg(long)]
        episodes: Option<u64>,
    },
    /// Behavior cloning on trace files or scripted synthetic traces.
    Bc { traces: Vec<PathBuf> },
    /// Run the faithfulness and finite-difference suites.
    Selftest,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let config = cli::load_config(cli.common.config.as_deref(), &cli.common.overrides, cli.common.seed)?;
    let opts = RunOptions::new(config, cli.common.out, cli.common.workers)?;
    match &cli.command {
        Command::Verify { problem } => cli::cmd_verify(problem, &opts),
        Command::Prove { problem, method } => cli::cmd_prove(problem, *method, &opts),
        Command::Train { problems, resume, episodes } => cli::cmd_train(problems, *episodes, *resume, &opts),
        Command::Bc { traces } => cli::cmd_bc(traces, &opts),
        Command::Selftest => cli::cmd_selftest(&opts),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
