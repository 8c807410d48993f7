//! The `attrseq` command line.
//!
//! Every command reads an optional TOML [`RunConfig`], applies flag
//! overrides, checks all of its inputs, and only then creates `--out` and
//! writes its artifacts, always including `config.resolved.toml`.
//!
//! All randomness comes from `--seed` (or `seed` in the config). Commands
//! split the root generator with fixed ids:
//!
//! | id | stream |
//! |----|--------|
//! | 1  | `generate`: records |
//! | 2  | `generate`: feedback pairs |
//! | 10 | `train`: parameter initialization |
//! | 11 | `train`: train/validation split |
//! | 12 | `train`: feedback pairs derived from labels |
//! | 13 | `train`: pair order, mini-batch draws and dropout |
//! | 14 | `train`: MLAS pre-training |
//!
//! `embed`, `label`, `classify`, `eval` and `inspect-checkpoint` are
//! deterministic. Exit codes: 0 ok, 2 usage or configuration error, 3
//! numerical failure, 4 I/O error.

mod commands;
mod config;
mod csv;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use commands::{classify, embed, eval, generate, inspect, label, train, Artifacts, RESOLVED_CONFIG};
pub use config::{EvalConfig, Overrides, PretrainConfig, RunConfig};
pub use csv::{embeddings_csv, parse_embeddings_csv};

use crate::checkpoint::Framework;
use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Name of the variable that caps the inference worker pool.
pub const THREADS_ENV: &str = "ATTRSEQ_THREADS";

#[derive(Debug, Parser)]
#[command(name = "attrseq", version, about = "Learning on attributed sequences")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory, created after all inputs have been checked.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub framework: Option<Framework>,
    /// Embedding width of the selected framework.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Contrastive margin for MLAS and OLAS.
    #[arg(long, global = true)]
    pub margin: Option<f64>,
    /// Attribute weight of the MLAS pre-training loss.
    #[arg(long = "omega-a", global = true)]
    pub omega_a: Option<f64>,
    /// AMAS adaptive sampling rate.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Neighbour counts for the outlier sweep, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Minimum cluster sizes for the clustering sweep, comma separated.
    #[arg(long = "min-cluster-size", global = true, value_delimiter = ',')]
    pub min_cluster_size: Option<Vec<usize>>,
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            framework: self.framework,
            dim: self.dim,
            lr: self.lr,
            epochs: self.epochs,
            margin: self.margin,
            omega_a: self.omega_a,
            lambda: self.lambda,
            k: self.k.clone(),
            min_cluster_size: self.min_cluster_size.clone(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic corpus with label-derived feedback pairs.
    Generate,
    /// Train the selected framework and write a checkpoint.
    Train {
        /// Dataset JSONL.
        #[arg(long)]
        data: PathBuf,
        /// Feedback JSONL for MLAS and OLAS; derived from labels when absent.
        #[arg(long)]
        feedback: Option<PathBuf>,
    },
    /// Write one embedding per record (NAS, MLAS, OLAS).
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Label queries by their nearest gallery entry.
    Label {
        #[arg(long)]
        checkpoint: PathBuf,
        /// One labeled record per class.
        #[arg(long)]
        gallery: PathBuf,
        /// Query records.
        #[arg(long)]
        data: PathBuf,
    },
    /// Classify records with an AMAS checkpoint.
    Classify {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Outlier, clustering and silhouette sweeps over embedding files.
    Eval {
        /// Embeddings CSV; repeat to compare widths.
        #[arg(long, required = true)]
        embeddings: Vec<PathBuf>,
        /// Dataset JSONL supplying labels for the embedded ids.
        #[arg(long)]
        data: PathBuf,
    },
    /// Print a checkpoint header.
    InspectCheckpoint {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numerical(_) => EXIT_NUMERICAL,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // A pool may already exist when running in-process more than once.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn resolve_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&global.overrides());
    cfg.validate()?;
    Ok(cfg)
}

impl Command {
    fn inputs(&self) -> Vec<&Path> {
        match self {
            Command::Generate => Vec::new(),
            Command::Train { data, feedback } => std::iter::once(data.as_path()).chain(feedback.as_deref()).collect(),
            Command::Embed { checkpoint, data } | Command::Classify { checkpoint, data } => vec![checkpoint, data],
            Command::Label {
                checkpoint,
                gallery,
                data,
            } => vec![checkpoint, gallery, data],
            Command::Eval { embeddings, data } => embeddings.iter().map(PathBuf::as_path).chain([data.as_path()]).collect(),
            Command::InspectCheckpoint { checkpoint } => vec![checkpoint],
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Vec<PathBuf>> {
    configure_threads()?;
    for path in cli.command.inputs().into_iter().chain(cli.global.config.as_deref()) {
        if !path.is_file() {
            return Err(Error::Config(format!("input file {} does not exist", path.display())));
        }
    }
    let cfg = resolve_config(&cli.global)?;
    let out = cli.global.out.as_deref();
    let need_out = || out.ok_or_else(|| Error::Config("--out DIR is required for this command".into()));
    let (artifacts, dir) = match &cli.command {
        Command::Generate => {
            let dir = need_out()?;
            (generate(&cfg)?, dir)
        }
        Command::Train { data, feedback } => {
            let dir = need_out()?;
            (train(&cfg, data, feedback.as_deref())?, dir)
        }
        Command::Embed { checkpoint, data } => {
            let dir = need_out()?;
            (embed(&cfg, checkpoint, data)?, dir)
        }
        Command::Label {
            checkpoint,
            gallery,
            data,
        } => {
            let dir = need_out()?;
            (label(&cfg, checkpoint, gallery, data)?, dir)
        }
        Command::Classify { checkpoint, data } => {
            let dir = need_out()?;
            (classify(&cfg, checkpoint, data)?, dir)
        }
        Command::Eval { embeddings, data } => {
            let dir = need_out()?;
            (eval(&cfg, embeddings, data)?, dir)
        }
        Command::InspectCheckpoint { checkpoint } => {
            let (text, artifacts) = inspect(&cfg, checkpoint)?;
            say(&text);
            match out {
                Some(dir) => (artifacts, dir),
                None => return Ok(Vec::new()),
            }
        }
    };
    artifacts.write_to(dir)
}

/// Prints to stdout, ignoring a closed pipe.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(written) => {
            for path in written {
                say(&format!("wrote {}", path.display()));
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
