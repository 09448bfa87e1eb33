use clap::{Parser, Subcommand};
use std::path::PathBuf;
use vlk_cli::config::{Overrides, RunConfig};
use vlk_cli::error::{AppError, EXIT_USAGE};
use vlk_cli::{bench, stages, sweeps};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  usage error
  2  configuration or validation error
  3  missing upstream artifact (run the earlier stage first)
  4  digest mismatch between stages (artifacts from different runs or models)
  5  remote service transport or protocol error
  6  synthetic benchmark criterion failure";

/// Locate, edit, and score value-oriented FFN neurons in small transformer
/// models.
#[derive(Parser)]
#[command(name = "vlk", version, after_help = EXIT_CODES, after_long_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the canonical value hierarchy as tab-separated membership lines
    ExportTree {
        #[arg(long)]
        out: PathBuf,
    },
    /// Create seeded model weights for the configured shape
    InitModel {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print exact dataset counts as JSON
    DatasetStats {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Generate draft items through the configured text-generation service
    GenItems {
        #[arg(long)]
        config: PathBuf,
        /// Template name, e.g. generate-questions
        #[arg(long)]
        template: String,
        /// Placeholder and scaffold values as name=value (repeatable)
        #[arg(long = "slot")]
        slots: Vec<String>,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Write accepted drafts to this JSONL file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Record contrastive activation profiles for one dimension
    Record {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Classify recorded contrast into a neuron catalog and report
    Locate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Answer in-dimension questions under the activation-edit policy
    EditGenerate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score generated responses with the configured judge
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Edit-generate and evaluate across a scaling-factor grid
    SweepGamma {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Re-run locate and downstream stages across a threshold grid
    SweepThreshold {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Build planted fixtures across seeds and check every recovery bound
    SynthBench {
        /// Number of independent fixture rounds
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 0.25)]
        tau: f64,
        #[arg(long, default_value_t = 0.5)]
        target_gap: f64,
        #[arg(long, default_value_t = 500)]
        prompts_per_class: usize,
        /// Write results CSV and the seed-0 fixture bundle here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &PathBuf, overrides: &Overrides) -> Result<RunConfig, AppError> {
    let cfg = RunConfig::load(config)?.apply(overrides);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::ExportTree { out } => stages::export_tree(&out),
        Command::InitModel { config, overrides } => {
            stages::init_model(&load(&config, &overrides)?)
        }
        Command::DatasetStats { dataset } => stages::dataset_stats(&dataset),
        Command::GenItems { config, template, slots, count, out } => {
            let cfg = load(&config, &Overrides::default())?;
            stages::gen_items(&cfg, &template, &slots, count, out.as_deref())
        }
        Command::Record { config, overrides } => stages::record(&load(&config, &overrides)?),
        Command::Locate { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            stages::locate(&cfg, overrides.svg)
        }
        Command::EditGenerate { config, overrides } => {
            stages::edit_generate(&load(&config, &overrides)?)
        }
        Command::Evaluate { config, overrides } => stages::evaluate(&load(&config, &overrides)?),
        Command::SweepGamma { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            sweeps::sweep_gamma(&cfg, overrides.svg)
        }
        Command::SweepThreshold { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            sweeps::sweep_threshold(&cfg, overrides.svg)
        }
        Command::SynthBench { seeds, tau, target_gap, prompts_per_class, out } => {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(AppError::config(format!("tau must lie in (0, 1), got {tau}")));
            }
            let settings = bench::BenchSettings {
                seeds,
                tau,
                target_gap,
                n_prompts_per_class: prompts_per_class,
            };
            bench::synth_bench(&settings, out.as_deref())
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not usage errors
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
