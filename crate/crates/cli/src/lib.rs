//! `tcnn`: synthesize, train, audit, export and tune from the command line.
//!
//! Exit status is 0 on success, 1 for invalid input (bad flags, config,
//! files) and 2 when a run fails (divergence, degenerate surface, every
//! search trial failing).

pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use tcnn_core::audit::{audit_surface, save_surface_csv, SurfaceSource};
use tcnn_core::dataset::Dataset;
use tcnn_core::mlp::ModelParams;
use tcnn_core::oracle::generate_dataset;
use tcnn_core::trainer::{random_search, train};
use tcnn_core::{Error, Result};

use crate::config::{echo_path, RunConfig, SEED_ENV};

#[derive(Debug, Parser)]
#[command(name = "tcnn", version, about = "Thermodynamically consistent TSR surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed and TCNN_SEED.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Trained model JSON.
    #[arg(long, conflicts_with = "oracle")]
    model: Option<PathBuf>,
    /// Use the configured synthetic oracle instead of a model.
    #[arg(long)]
    oracle: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset CSV from the oracle.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes model JSON and a training report.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV (defaults to files.dataset).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// Defaults to `<model>.report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Audit a surface; writes the audit JSON and optionally the surface CSV.
    Audit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        surface: Option<PathBuf>,
    },
    /// Write the surface CSV only.
    Export {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random hyperparameter search; writes the leaderboard JSON.
    Hpo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides search.budget.
        #[arg(long)]
        budget: Option<usize>,
    },
}

/// Parse `argv` (program name first), run, and return the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("tcnn: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let env = std::env::var(SEED_ENV).ok();
    config.resolve_seed(common.seed, env.as_deref())?;
    Ok(config)
}

fn input(flag: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| Error::Usage(format!("no {what} given (flag or config files section)")))
}

fn write_json(path: &Path, text: String) -> Result<()> {
    std::fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

enum Source {
    Model(ModelParams),
    Oracle(tcnn_core::oracle::OracleParams),
}

impl Source {
    fn load(args: SourceArgs, config: &RunConfig) -> Result<Self> {
        if args.oracle {
            return Ok(Source::Oracle(config.oracle.clone()));
        }
        let path = input(args.model, &config.files.model, "model")?;
        Ok(Source::Model(ModelParams::load(&path)?))
    }

    fn as_dyn(&self) -> &dyn SurfaceSource {
        match self {
            Source::Model(m) => m,
            Source::Oracle(o) => o,
        }
    }
}

fn source_audit(source: &Source, config: &RunConfig) -> Result<tcnn_core::audit::Audit> {
    let s = source.as_dyn();
    let domain = s
        .domain()
        .ok_or_else(|| Error::Usage("model has no fitted domain to audit on".into()))?;
    let grid = domain.grid(config.audit.grid.paths, config.audit.grid.stations)?;
    audit_surface(s, &grid, config.audit.tolerances, config.audit.toughness_mode)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth { common, out } => {
            let config = load_config(&common)?;
            let (angles, stations) = config.synth.layout()?;
            let data = generate_dataset(&angles, &stations, &config.oracle)?;
            data.save(&out)?;
            config.write_echo(&echo_path(&out))?;
            println!("wrote {} points on {} paths to {}", data.len(), data.paths.len(), out.display());
        }
        Command::Train {
            common,
            data,
            model,
            report,
        } => {
            let config = load_config(&common)?;
            let dataset = Dataset::load(&input(data, &config.files.dataset, "dataset")?)?;
            let (params, train_report) = train(&config.train, &dataset)?;
            params.save(&model)?;
            let report = report.unwrap_or_else(|| {
                let stem = model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                model.with_file_name(format!("{stem}.report.json"))
            });
            write_json(&report, train_report.to_json())?;
            config.write_echo(&echo_path(&model))?;
            let f = train_report.final_loss;
            println!(
                "trained {} epochs: total {:.6e} (mse {:.3e}, tc1 {:.3e}, tc2 {:.3e}, tc3 {:.3e})",
                train_report.epochs_run, f.total, f.mse, f.tc1, f.tc2, f.tc3
            );
        }
        Command::Audit {
            common,
            source,
            out,
            surface,
        } => {
            let config = load_config(&common)?;
            let audit = source_audit(&Source::load(source, &config)?, &config)?;
            audit.report.save(&out)?;
            if let Some(path) = surface {
                save_surface_csv(&audit.surface_rows(), &path)?;
            }
            config.write_echo(&echo_path(&out))?;
            let f = audit.report.fractions;
            println!(
                "violation fractions: tc1 {:.4} tc2 {:.4} tc3 {:.4} overall {:.4}",
                f.tc1, f.tc2, f.tc3, f.overall
            );
        }
        Command::Export { common, source, out } => {
            let config = load_config(&common)?;
            let audit = source_audit(&Source::load(source, &config)?, &config)?;
            let rows = audit.surface_rows();
            save_surface_csv(&rows, &out)?;
            config.write_echo(&echo_path(&out))?;
            println!("wrote {} surface rows to {}", rows.len(), out.display());
        }
        Command::Hpo {
            common,
            data,
            out,
            budget,
        } => {
            let config = load_config(&common)?;
            let dataset = Dataset::load(&input(data, &config.files.dataset, "dataset")?)?;
            let budget = budget.unwrap_or(config.search.budget);
            let result = random_search(&config.search.space, budget, config.train.seed, &dataset, &config.train)?;
            write_json(&out, result.to_json())?;
            config.write_echo(&echo_path(&out))?;
            let best = &result.leaderboard[0];
            println!(
                "best of {budget}: lr {:.3e} hidden {:?} score {:.4e}",
                best.learning_rate,
                best.hidden,
                best.score.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
