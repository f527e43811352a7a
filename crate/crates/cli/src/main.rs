use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

mod error;
mod io;
mod iou;
mod merge;
mod plan;
mod toy;

#[derive(Debug, Parser)]
#[command(name = "visionfuse", version, about = "Merge MLLM family checkpoints and plan fused vision-token inputs")]
struct Cli {
    /// Worker threads for per-tensor work (outputs do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Merge source checkpoints into the base per a JSON recipe.
    Merge {
        #[arg(long)]
        recipe: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Required for DARE; overrides the recipe seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Merge structurally mismatched sources, keeping base values for
        /// skipped tensors.
        #[arg(long)]
        force: bool,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Write `model - base` as a safetensors delta file.
    Delta {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Source label stored in the file (defaults to the model file stem).
        #[arg(long)]
        label: Option<String>,
    },
    /// Compare two checkpoints structurally.
    Validate {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Show the fused token layout, pruning result and budget verdict.
    FusePlan {
        #[arg(long)]
        config: PathBuf,
        /// Required for random-drop policies; overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Estimate per-layer inference FLOPs for a fusion config.
    Flops {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Run merge, encode, concatenate and predict on a synthetic family.
    ToyDemo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        recipe: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Comma-separated token ids (random when omitted).
        #[arg(long, value_delimiter = ',')]
        text: Option<Vec<u32>>,
        /// Where to write the averaged text-to-vision attention CSV.
        #[arg(long)]
        attention_out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Top-p% IoU curve between two per-token score CSVs.
    AnalyzeIou {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        ps: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Rank merge coefficients by closeness of the merge to a target model.
    GridSearch {
        #[arg(long)]
        recipe: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// JSON grid; defaults to the standard search ranges for the method.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
}

/// Exits with a usage error when a randomized path has no `--seed`.
pub(crate) fn require_seed(seed: Option<u64>, why: &str) -> u64 {
    seed.unwrap_or_else(|| {
        Cli::command()
            .error(
                clap::error::ErrorKind::MissingRequiredArgument,
                format!("--seed is required {why}"),
            )
            .exit()
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Merge { recipe, out, seed, force, format } => merge::merge(&recipe, &out, seed, force, format),
        Command::Delta { model, base, out, label } => merge::delta(&model, &base, &out, label),
        Command::Validate { a, b, format } => merge::validate(&a, &b, format),
        Command::FusePlan { config, seed, format } => plan::fuse_plan(&config, seed, format),
        Command::Flops { config, format } => plan::flops(&config, format),
        Command::ToyDemo { config, recipe, seed, text, attention_out, format } => {
            toy::toy_demo(&config, &recipe, seed, text, attention_out.as_deref(), format)
        }
        Command::AnalyzeIou { a, b, ps, out, format } => iou::analyze_iou(&a, &b, &ps, out.as_deref(), format),
        Command::GridSearch { recipe, target, grid, seed, format } => {
            merge::grid_search(&recipe, &target, grid.as_deref(), seed, format)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            failure.exit_code()
        }
    }
}
