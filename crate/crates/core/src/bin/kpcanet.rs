use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kpcanet::cli::{self, RunConfig, Subset};
use kpcanet::Error;

const EXIT_CODES: &str = "\
Exit status:
  0  success
  2  configuration error (bad config file, invalid parameters)
  3  data error (missing or malformed files, shape mismatches, corrupt model)
  4  numeric failure (insufficient positive spectrum)";

/// Kernel-PCA filter-bank networks: train, evaluate, extract features and
/// inspect models.
#[derive(Parser)]
#[command(name = "kpcanet", version, after_help = EXIT_CODES)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    All,
    Train,
    Test,
}

impl From<SplitArg> for Subset {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::All => Subset::All,
            SplitArg::Train => Subset::Train,
            SplitArg::Test => Subset::Test,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Learn filters and the classifier from a run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: `out_dir` from the config, else `.`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report error rate and confusion matrix of a model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Config file whose `data.*` keys name the dataset.
        #[arg(long)]
        data: PathBuf,
        /// Part of the dataset to use, following the file's split settings.
        #[arg(long, value_enum, default_value = "all")]
        split: SplitArg,
        /// Report directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Write pooled feature vectors to a flat binary file.
    Extract {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        split: SplitArg,
        /// Feature file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print spectra and kernel; render linear filters as PGM images.
    Inspect {
        #[arg(long)]
        model: PathBuf,
        /// Directory for filter images (linear kernel only).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn data_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::from_file_unvalidated(path)?;
    if let Some(s) = seed {
        cfg.net.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot set thread count: {e}")))?;
    }
    match cli.command {
        Command::Train { config, out } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if let Some(s) = cli.seed {
                cfg.net.seed = s;
            }
            let out = out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
            let o = cli::train(&cfg, &out)?;
            println!("model written to {}", o.model_path.display());
            println!("train error {:.4}", o.train_error);
            if let Some(e) = o.test_error {
                println!("test error {e:.4}");
            }
        }
        Command::Eval { model, data, split, out } => {
            let ds = cli::load_subset(&data_config(&data, cli.seed)?, split.into())?;
            let e = cli::eval(&model, &ds, &out)?;
            println!("{} samples, error rate {:.4}", e.total(), e.error_rate);
        }
        Command::Extract { model, data, split, out } => {
            let ds = cli::load_subset(&data_config(&data, cli.seed)?, split.into())?;
            let (n, d) = cli::extract(&model, &ds, &out)?;
            println!("wrote {n} feature vectors of length {d} to {}", out.display());
        }
        Command::Inspect { model, out } => {
            let o = cli::inspect(&model, out.as_deref())?;
            print!("{}", o.text);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
