use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use seqpd::ErrorCategory;

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "seqpd",
    version,
    about = "Sequential prisoner's dilemma under position uncertainty"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Study configuration (JSON). Defaults to the laboratory game.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Corrected,
    Exact,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Equilibrium thresholds of the configured game, or a CSV grid sweep.
    Equilibrium {
        /// Emit a CSV sweep over the `--n`, `--m` and `--g` grids.
        #[arg(long)]
        sweep: bool,
        /// Group sizes for the sweep.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        /// Sample sizes for the sweep; all admissible ones when omitted.
        #[arg(long, value_delimiter = ',')]
        m: Vec<usize>,
        /// Normalized gains for the sweep; the configured game's when omitted.
        #[arg(long, value_delimiter = ',')]
        g: Vec<f64>,
    },
    /// Simulate a session and write choices.csv, types.csv and plays.csv.
    Simulate,
    /// Fit the mixture model to a choice file and write results.json.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        /// Conditional-cooperator specifications to fit, one column each.
        #[arg(long, value_delimiter = ',')]
        spec: Vec<String>,
    },
    /// Monte Carlo parameter recovery at the configured mixture.
    Recover {
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Cooperation-rate tables and hypothesis tests for a choice file.
    Describe {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = Variant::Corrected)]
        variant: Variant,
    },
    /// Play out strategy-method groups and write the realized actions.
    Realize {
        #[arg(long)]
        data: PathBuf,
    },
    /// Strategy-method versus direct-play comparison.
    CompareMethods {
        /// One file with both parts, or a part-1 file followed by a part-3 file.
        #[arg(long, num_args = 1..=2, required = true)]
        data: Vec<PathBuf>,
    },
    /// Long-format per-round cooperation series for plotting.
    PlotData {
        #[arg(long)]
        data: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Equilibrium { sweep, n, m, g } => {
            commands::equilibrium(&cli.common, sweep, &n, &m, &g)
        }
        Command::Simulate => commands::simulate(&cli.common),
        Command::Estimate { data, spec } => commands::estimate(&cli.common, &data, &spec),
        Command::Recover { iterations } => commands::recover(&cli.common, iterations),
        Command::Describe { data, variant } => commands::describe(&cli.common, &data, variant),
        Command::Realize { data } => commands::realize(&cli.common, &data),
        Command::CompareMethods { data } => commands::compare_methods(&cli.common, &data),
        Command::PlotData { data } => commands::plot_data(&cli.common, &data),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.category() {
                ErrorCategory::Validation => 2,
                ErrorCategory::Numerical => 3,
                ErrorCategory::Io => 4,
            })
        }
    }
}
