use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use genfl_cli::config::{apply_override, load_config};
use genfl_cli::sweep::{parse_values, run_sweep};
use genfl_cli::{plot_files, run, write_run, CliError};

/// Simulate federated learning assisted by a server-side generator.
#[derive(Debug, Parser)]
#[command(name = "genfl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write metrics.csv and config.txt.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rounds: Option<usize>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment per value of a config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. `0.1,0.3,1.0`.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Give every member the base seed instead of a derived one.
        #[arg(long)]
        shared_seed: bool,
    },
    /// Plot test accuracy per round from metrics CSV files.
    Plot {
        /// Comma-separated CSV paths.
        #[arg(long, value_delimiter = ',', required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test accuracy per round")]
        title: String,
    },
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            seed,
            rounds,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                apply_override(&mut cfg, "seed", &seed.to_string())?;
            }
            if let Some(rounds) = rounds {
                apply_override(&mut cfg, "rounds", &rounds.to_string())?;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let table = run(&cfg)?;
            write_run(&cfg, &table)?;
            println!("{}", cfg.output_dir.join(genfl_cli::METRICS_FILE).display());
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
            shared_seed,
        } => {
            let base = load_config(&config)?;
            let out = out.unwrap_or_else(|| base.output_dir.clone());
            let members = run_sweep(&base, &axis, &parse_values(&values), shared_seed, &out)?;
            for m in &members {
                let last = m.table.rows().last().expect("non-empty table");
                println!("{axis}={}\t{:.4}", m.value, last.test_accuracy);
            }
        }
        Command::Plot { inputs, out, title } => {
            plot_files(&inputs, &out, &title)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GENFL_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("{}", e.one_line());
            ExitCode::FAILURE
        }
    }
}
