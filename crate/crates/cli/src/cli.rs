use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use artin_kms::model::{load_model, Model};
use artin_kms::{Tolerances, TraceVec};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{self, parse_beta_range, parse_inline_trace, resolve_trace, TraceArg};
use crate::report::Report;

#[derive(Debug, Parser)]
#[command(name = "artin-kms", version, about = "KMS states of right-angled Artin monoid actions")]
pub struct Cli {
    /// Relative positivity tolerance.
    #[arg(long, global = true, default_value_t = Tolerances::default().positivity)]
    pub tol: f64,
    /// Maximum number of series terms or enumerated elements.
    #[arg(long, global = true, default_value_t = Tolerances::default().budget)]
    pub budget: usize,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Name of a trace defined in the model.
    #[arg(long, conflicts_with = "trace_inline")]
    pub trace: Option<String>,
    /// Comma-separated trace values.
    #[arg(long)]
    pub trace_inline: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Subinvariance over all clique subsets.
    Check {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        beta: f64,
    },
    /// Split a subinvariant trace into finite and infinite type parts.
    Wold {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        beta: f64,
    },
    /// Critical inverse temperature and an infinite-type witness.
    Critical {
        /// Model file (JSON).
        #[arg(long)]
        model: PathBuf,
    },
    /// Subinvariance and Gibbs data over a grid of β.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        /// Inclusive grid `A:B:N`.
        #[arg(long)]
        beta_range: String,
    },
    /// Product decomposition along the finite/infinite split of generators.
    Decompose {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        beta: f64,
    },
    /// Weights of the atoms at monoid elements up to a length.
    Atoms {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 8)]
        length: usize,
    },
    /// Built-in checks against known closed forms.
    VerifyExample {
        #[arg(value_enum)]
        example: Example,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Example {
    Optimal,
    Kgraph,
    #[value(alias = "blrs")]
    Semigroup,
}

impl Cli {
    pub fn tolerances(&self) -> Result<Tolerances> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            bail!("--tol must be positive");
        }
        if self.budget == 0 {
            bail!("--budget must be positive");
        }
        Ok(Tolerances { positivity: self.tol, budget: self.budget, ..Tolerances::default() })
    }
}

fn read_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    load_model(&text).with_context(|| format!("invalid model {}", path.display()))
}

fn load(args: &ModelArgs) -> Result<(Model, String, TraceVec)> {
    let model = read_model(&args.model)?;
    let choice = match (&args.trace, &args.trace_inline) {
        (Some(name), _) => Some(TraceArg::Named(name.clone())),
        (None, Some(csv)) => Some(TraceArg::Inline(parse_inline_trace(csv)?)),
        (None, None) => None,
    };
    let (name, trace) = resolve_trace(&model, choice.as_ref())?;
    Ok((model, name, trace))
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs one invocation. `Ok(false)` means a check ran and failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let tol = cli.tolerances()?;
    if cli.format == Format::Csv && !matches!(cli.command, Command::Sweep { .. }) {
        bail!("--format csv is only available for sweep");
    }
    let report: Report = match &cli.command {
        Command::Check { model, beta } => {
            let (m, name, t) = load(model)?;
            commands::cmd_check(&m, (&name, &t), *beta, &tol)?
        }
        Command::Wold { model, beta } => {
            let (m, name, t) = load(model)?;
            commands::cmd_wold(&m, (&name, &t), *beta, &tol)?
        }
        Command::Critical { model } => commands::cmd_critical(&read_model(model)?, &tol)?,
        Command::Sweep { model, beta_range } => {
            let betas = parse_beta_range(beta_range)?;
            let (m, name, t) = load(model)?;
            let (report, rows) = commands::cmd_sweep(&m, (&name, &t), &betas, &tol)?;
            if cli.format == Format::Csv {
                emit(cli, &commands::sweep_csv(&rows))?;
                return Ok(true);
            }
            report
        }
        Command::Decompose { model, beta } => {
            let (m, name, t) = load(model)?;
            commands::cmd_decompose(&m, (&name, &t), *beta, &tol)?
        }
        Command::Atoms { model, beta, length } => {
            let (m, name, t) = load(model)?;
            commands::cmd_atoms(&m, (&name, &t), *beta, *length, &tol)?
        }
        Command::VerifyExample { example, seed, trials } => match example {
            Example::Optimal => commands::verify_optimal(&tol)?,
            Example::Kgraph => commands::verify_kgraph(*seed, *trials, &tol)?,
            Example::Semigroup => commands::verify_semigroup(&tol)?,
        },
    };
    emit(cli, &report.to_json())?;
    Ok(report.pass.unwrap_or(true))
}
