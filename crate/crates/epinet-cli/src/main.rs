//! `epinet` — run the epistemic-network pipeline or its individual stages.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use epinet::accumulation::CooccurrenceMode;

use epinet_cli::config::PipelineConfig;
use epinet_cli::pipeline;

#[derive(Parser)]
#[command(
    name = "epinet",
    about = "Epistemic network analysis: ingest transcripts, code them, model \
             co-occurrence networks, compare groups, and render plots.",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration file (JSON). Relative paths inside it are
    /// resolved against its own directory.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,

    /// Override the master seed from the config file.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Override the output directory from the config file.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    /// One co-occurrence per code pair present anywhere in a stanza.
    StanzaUnion,
    /// Code pairs must appear on the same line.
    PerLine,
}

impl From<ModeArg> for CooccurrenceMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::StanzaUnion => CooccurrenceMode::StanzaUnion,
            ModeArg::PerLine => CooccurrenceMode::PerLine,
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    common: Common,

    /// Override the co-occurrence mode from the config file.
    #[arg(long, value_enum, value_name = "MODE")]
    mode: Option<ModeArg>,

    /// Override the number of projection dimensions from the config file.
    #[arg(long, value_name = "N")]
    dims: Option<usize>,
}

#[derive(Args)]
struct PoseArgs {
    #[command(flatten)]
    common: Common,

    /// Override the standardized sequence length from the config file.
    #[arg(long, value_name = "N")]
    target_len: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Read and segment the corpus CSV; writes corpus.json.
    Ingest(Common),
    /// Apply the pattern classifier; writes coded_corpus.json.
    Code(Common),
    /// Rate hand codes against classifier codes; writes irr_report.json.
    Irr(Common),
    /// Accumulate networks and fit the projection; writes
    /// unit_networks.json and model.json.
    Model(ModelArgs),
    /// Build group and subtracted networks with score statistics; writes
    /// groups.json, subtracted.json, and stats.json.
    Compare(ModelArgs),
    /// Render the network and comparison SVGs.
    Plot(Common),
    /// Extract MFCC matrices from the configured audio directory.
    Mfcc(Common),
    /// Standardize and rotate the configured pose sequences.
    Pose(PoseArgs),
    /// Run every stage in order.
    Run(ModelArgs),
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn load_model_config(args: &ModelArgs) -> Result<PipelineConfig> {
    let mut config = load_config(&args.common)?;
    if let Some(mode) = args.mode {
        config.cooccurrence_mode = mode.into();
    }
    if let Some(dims) = args.dims {
        config.dims = dims;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let written = match &cli.command {
        Command::Ingest(common) => {
            let config = load_config(common)?;
            config.validate()?;
            pipeline::run_stage(&config, pipeline::stage_ingest)?
        }
        Command::Code(common) => {
            let config = load_config(common)?;
            config.validate()?;
            pipeline::run_stage(&config, pipeline::stage_code)?
        }
        Command::Irr(common) => {
            let config = load_config(common)?;
            config.validate()?;
            pipeline::run_stage(&config, pipeline::stage_irr)?
        }
        Command::Model(args) => {
            let config = load_model_config(args)?;
            config.validate()?;
            pipeline::run_stage(&config, pipeline::stage_model)?
        }
        Command::Compare(args) => {
            let config = load_model_config(args)?;
            config.validate()?;
            pipeline::run_stage(&config, pipeline::stage_compare)?
        }
        Command::Plot(common) => {
            let config = load_config(common)?;
            config.validate()?;
            pipeline::run_stage(&config, pipeline::stage_plot)?
        }
        Command::Mfcc(common) => {
            let config = load_config(common)?;
            config.validate()?;
            pipeline::run_stage(&config, pipeline::stage_mfcc)?
        }
        Command::Pose(args) => {
            let mut config = load_config(&args.common)?;
            if let Some(target_len) = args.target_len {
                config.pose.target_len = target_len;
            }
            config.validate()?;
            pipeline::run_stage(&config, pipeline::stage_pose)?
        }
        Command::Run(args) => {
            let config = load_model_config(args)?;
            config.validate().context("invalid configuration")?;
            pipeline::run_pipeline(&config)?
        }
    };
    Ok(written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
