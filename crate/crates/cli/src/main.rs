//! `replast`: command-line front end for checkpoint surgery, inspection,
//! weight histograms, run statistics and the synthetic experiment harness.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when the
//! input data is malformed or unsuitable.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use replast::surgery::Scope;

const OUT_DIR_ENV: &str = "REPLAST_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "replast", version, about = "Selective reinitialization of saturated weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reinitialize the lowest-utility weights of a checkpoint.
    Surgery(SurgeryArgs),
    /// Print per-tensor statistics of a checkpoint.
    Inspect(InspectArgs),
    /// Weight histograms of two checkpoints and their per-bin difference.
    Hist(HistArgs),
    /// Compare experimental cases against the base case in a runs file.
    Mwu(MwuArgs),
    /// Run a transfer experiment protocol end to end.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("what").required(true).args(["tag", "config"])))]
struct SurgeryArgs {
    /// Input checkpoint.
    input: PathBuf,
    /// Case tag such as `10M`, `25MN`, `5NS`.
    #[arg(long)]
    tag: Option<String>,
    /// Surgery config file (TOML, or JSON by extension).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed of the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// `per-tensor` or `global`.
    #[arg(long)]
    scope: Option<Scope>,
    #[arg(long, value_enum)]
    bias_reset: Option<OnOff>,
    /// Gradient checkpoint, needed for gradient utility.
    #[arg(long)]
    grads: Option<PathBuf>,
    /// Classification rules file; ignored when the config file has rules.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Output checkpoint.
    #[arg(short, long)]
    output: PathBuf,
    /// Report path; defaults to `<output>.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    checkpoint: PathBuf,
    #[arg(long)]
    rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HistArgs {
    base: PathBuf,
    experimental: PathBuf,
    /// Output path prefix; defaults to `<out-dir>/hist`.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = replast::analysis::DEFAULT_BINS)]
    bins: usize,
    /// Comma-separated subset of base, experimental, diff, overlay.
    #[arg(long, default_value = "base,experimental,diff,overlay")]
    panels: String,
    /// Also write one histogram set per weight tensor.
    #[arg(long)]
    per_layer: bool,
    #[arg(long)]
    rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MwuArgs {
    runs: PathBuf,
    /// Restrict the comparison to one case.
    #[arg(long)]
    case: Option<String>,
    #[arg(long, default_value = replast::stats::BASE_TAG)]
    base: String,
    /// Print JSON instead of the text table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["protocol", "demo"])))]
struct ExperimentArgs {
    /// Protocol file (TOML, or JSON by extension).
    protocol: Option<PathBuf>,
    /// Use the bundled demo protocol.
    #[arg(long)]
    demo: bool,
    #[arg(short = 'o', long, env = OUT_DIR_ENV, default_value = "replast-out")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Surgery(a) => commands::surgery(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::Hist(a) => commands::hist(a),
        Command::Mwu(a) => commands::mwu(a),
        Command::Experiment(a) => commands::experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("replast: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
