use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod analyze;
mod show;
mod synth;
mod validate;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "herdlens", version, about = "Behavioral analytics over animal detection, pose and mask files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check interchange files; exit 0 only if every file is valid.
    Validate {
        /// Video directories or roots containing them.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Generate a synthetic dataset with ground truth.
    Synth {
        #[command(subcommand)]
        scenario: synth::Scenario,
    },
    /// Run an analysis and write report.json plus side files.
    Analyze(AnalyzeArgs),
    /// Inspect a written report.
    Report {
        #[command(subcommand)]
        command: ReportCommand,
    },
}

#[derive(Subcommand, Debug)]
enum ReportCommand {
    /// Print a readable summary of report.json.
    Show {
        /// A report file or the output directory holding one.
        path: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Gait clustering and speed profiles of running videos.
    Run,
    /// Grazing index of grazing videos.
    Graze,
    /// Silhouette dispersion of resting videos.
    Rest,
    All,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    /// The 2-D embedding.
    Embedding,
    /// The 34-value pose vectors.
    Pose,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub kind: Kind,
    /// Video directories or roots containing them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Start from a config echo (the `config` object of a report, or a file
    /// holding just that object). Flags below still override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_neighbors: Option<usize>,
    #[arg(long)]
    pub min_dist: Option<f64>,
    #[arg(long)]
    pub kmeans_k: Option<usize>,
    /// Where gait features are clustered.
    #[arg(long, value_enum)]
    pub cluster_space: Option<Space>,
    /// Overrides the manifest frame stride for speed.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub frame_stride: Option<u32>,
    #[arg(long)]
    pub norm_exponent: Option<f64>,
    #[arg(long, env = "HERDLENS_SEED")]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { paths } => validate::run(&paths),
        Command::Synth { scenario } => synth::run(scenario),
        Command::Analyze(args) => analyze::run(&args),
        Command::Report {
            command: ReportCommand::Show { path },
        } => show::run(&path),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
