use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use clintraj::pipeline::{Pipeline, PipelineConfig, Stage};

#[derive(Parser)]
#[command(name = "clintraj", version, about = "Clinical trajectories from elastic principal trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Pipeline config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides CLINTRAJ_OUT and the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load, filter and quantify the raw table.
    Quantify(Common),
    /// Impute missing values and apply optimal scaling.
    Impute(Common),
    /// Standardize features and project onto principal components.
    Reduce(Common),
    /// Grow, prune and extend the principal tree.
    Fit(Common),
    /// Split the tree into segments and label points.
    Segment(Common),
    /// Pick a root and compute pseudotime.
    Pseudotime {
        #[command(flatten)]
        common: Common,
        /// Root node; overrides the config.
        #[arg(long)]
        root: Option<usize>,
    },
    /// Segment association tests and pseudotime regression.
    Associate(Common),
    /// Cumulative hazards along each trajectory.
    Survival(Common),
    /// 2-D layout and SVG rendering.
    Layout(Common),
    /// Every stage in order.
    All {
        #[command(flatten)]
        common: Common,
        /// Root node for pseudotime; overrides the config.
        #[arg(long)]
        root: Option<usize>,
    },
}

fn pipeline(common: &Common) -> clintraj::Result<Pipeline> {
    let mut cfg = PipelineConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    } else if let Some(out) = std::env::var_os("CLINTRAJ_OUT") {
        cfg.output_dir = PathBuf::from(out);
    }
    Pipeline::new(cfg)
}

fn run(cli: Cli) -> clintraj::Result<()> {
    let stage = |common: &Common, s: Stage| pipeline(common)?.run(s);
    match &cli.command {
        Command::Quantify(c) => stage(c, Stage::Quantify),
        Command::Impute(c) => stage(c, Stage::Impute),
        Command::Reduce(c) => stage(c, Stage::Reduce),
        Command::Fit(c) => stage(c, Stage::Fit),
        Command::Segment(c) => stage(c, Stage::Segment),
        Command::Pseudotime { common, root } => pipeline(common)?.run_pseudotime_with_root(*root),
        Command::Associate(c) => stage(c, Stage::Associate),
        Command::Survival(c) => stage(c, Stage::Survival),
        Command::Layout(c) => stage(c, Stage::Layout),
        Command::All { common, root } => pipeline(common)?.run_all(*root),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
