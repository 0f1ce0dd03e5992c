//! `dialectkit` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "dialectkit", version, about = "Dialect classification experiment pipeline")]
struct Cli {
    /// Experiment config file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent runs; overrides the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory for every artifact the command writes.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with converted counterparts.
    Synth(SynthArgs),
    /// Validate a manifest and print the per-age-group overview.
    Ingest(IngestArgs),
    /// Normalize and cut recordings (and converted audio) into 10 s segments.
    Segment(SegmentArgs),
    /// Add SR-FM copies to a segment catalog.
    Augment(AugmentArgs),
    /// Check converted audio against the originals.
    ValidateConversion(ValidateArgs),
    /// Compute or import segment embeddings.
    Embed(EmbedArgs),
    /// Repeated speaker-disjoint runs per condition and age group.
    Run(RunArgs),
    /// Comparison tables and baseline deltas from run files.
    Report,
    /// Pitch, formant and embedding-projection CSVs.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2)]
    dialects: usize,
    #[arg(long, default_value_t = 12)]
    speakers: usize,
    #[arg(long, default_value_t = 10)]
    recordings: usize,
    #[arg(long, default_value_t = 20.0)]
    seconds: f64,
    /// Write only a manifest shaped like the overview table (20 dialects, no audio).
    #[arg(long)]
    overview: bool,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Conversion manifest whose audio is segmented as well.
    #[arg(long)]
    conversion: Option<PathBuf>,
    /// Conversion modes to take from the conversion manifest.
    #[arg(long, value_delimiter = ',', default_value = "rvc1,rvc3")]
    modes: Vec<String>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Number of SR-FM passes.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Also augment converted segments.
    #[arg(long)]
    include_converted: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    conversion: PathBuf,
    #[arg(long)]
    mode: String,
    /// Target speakers as `young=ID,middle=ID,old=ID`.
    #[arg(long)]
    targets: String,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// `builtin` or the path of a precomputed embedding table.
    #[arg(long, default_value = "builtin")]
    backend: String,
    /// Write the binary table format instead of CSV.
    #[arg(long)]
    binary: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Comma-separated conditions, e.g. `baseline,rvc1,rvc1+srfm6`.
    #[arg(long)]
    conditions: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated age groups, e.g. `all,middle`.
    #[arg(long)]
    groups: Option<String>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    conversion: Option<PathBuf>,
    #[arg(long, default_value = "rvc1")]
    mode: String,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// `pca` or `tsne`.
    #[arg(long, default_value = "pca")]
    method: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            ExitCode::from(e.exit_code())
        }
    }
}
