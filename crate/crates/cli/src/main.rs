//! Command-line front end: synthetic data, training, evaluation, noise
//! sweeps, embedding export and nearest-neighbour lookup.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when
//! training diverges numerically.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lpvdn::cluster::nearest_to_index;
use lpvdn::dataio::{make_synthetic_gmm, write_matrix};
use lpvdn::pipeline::{
    embed, evaluate_model, export_embeddings, load_checkpoint, noise_sweep, parse_ablation, train,
    write_report, write_sweep_csv, Embedding, TrainConfig, Variant,
};
use lpvdn::{Dataset, Error, Model, Result};

#[derive(Debug, Parser)]
#[command(
    name = "lpvdn",
    version,
    about = "Deep clustering with local and global structure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a Gaussian-blob dataset as a matrix file (manifest + blob + labels).
    MakeSynthetic {
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        dim: usize,
        #[arg(long, default_value_t = 500)]
        n_per_cluster: usize,
        #[arg(long, default_value_t = 10.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Manifest path, e.g. `data/blobs.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pretrain and train a model, writing checkpoint, report and log.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint against its dataset.
    Evaluate {
        #[command(flatten)]
        ckpt: CheckpointArgs,
        /// Where to write the report; printed to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train every (sigma, variant, seed) combination on corrupted data.
    NoiseSweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated noise levels.
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3")]
        sigmas: Vec<f64>,
        /// Comma-separated variants out of full, lg+lp, lg+mi, lg.
        #[arg(long, value_delimiter = ',', default_value = "full,lg")]
        variants: Vec<String>,
        /// Comma-separated seeds; defaults to the config seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Export per-sample embeddings as CSV.
    Embed {
        #[command(flatten)]
        ckpt: CheckpointArgs,
        /// `o_prime` (locality mapper output) or `mu_tilde` (encoder mean).
        #[arg(long, default_value = "o_prime")]
        which: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the nearest neighbours of one sample in embedding space.
    Nearest {
        #[command(flatten)]
        ckpt: CheckpointArgs,
        #[arg(long)]
        query_index: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value = "o_prime")]
        which: String,
    },
    /// Print a built-in configuration as JSON.
    ShowPreset { name: String },
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON training config.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in config: synthetic, mnist, fashion-mnist, reuters10k, reuters.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Terms to disable, e.g. `mi,lp`; `none` clears the config's list.
    #[arg(long)]
    ablation: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => TrainConfig::load(path)?,
            (None, Some(name)) => TrainConfig::preset(name)?,
            (None, None) => {
                return Err(Error::Config(
                    "either --config or --preset is required".into(),
                ))
            }
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(a) = &self.ablation {
            cfg.ablation = parse_ablation(a)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct CheckpointArgs {
    /// Checkpoint manifest or the run directory holding it.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Take the dataset from this config instead of the checkpoint's.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl CheckpointArgs {
    fn load(&self) -> Result<(Model, TrainConfig, Dataset)> {
        let (model, manifest) = load_checkpoint::<f64>(&self.checkpoint)?;
        let mut cfg = manifest.config;
        if let Some(path) = &self.config {
            cfg.dataset = TrainConfig::load(path)?.dataset;
        }
        let data: Dataset = cfg.dataset.load()?;
        Ok((model, cfg, data))
    }
}

/// `println!` that exits quietly when stdout is closed (e.g. piped to `head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if let Err(e) = writeln!(std::io::stdout().lock(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            return Err(Error::Config(format!("writing to stdout: {e}")));
        }
    }};
}

fn print_json<S: serde::Serialize>(value: &S) -> Result<()> {
    out!(
        "{}",
        serde_json::to_string_pretty(value).expect("serialisable")
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MakeSynthetic {
            k,
            dim,
            n_per_cluster,
            separation,
            seed,
            out,
        } => {
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
            }
            let data: Dataset = make_synthetic_gmm(k, dim, n_per_cluster, separation, seed)?;
            write_matrix(&data, &out)?;
            out!(
                "wrote {} rows x {} features to {}",
                data.n(),
                data.dim(),
                out.display()
            );
        }
        Command::Train { cfg, out } => {
            let cfg = cfg.resolve()?;
            let data: Dataset = cfg.dataset.load()?;
            log::info!(
                "training on {} ({} x {}), config {}",
                data.name,
                data.n(),
                data.dim(),
                cfg.hash()
            );
            let outcome = train(&cfg, &data, &out)?;
            print_json(&outcome.report)?;
        }
        Command::Evaluate { ckpt, out } => {
            let (model, cfg, data) = ckpt.load()?;
            let report = evaluate_model(&model, &data, &cfg)?;
            match out {
                Some(path) => write_report(&report, &path)?,
                None => print_json(&report)?,
            }
        }
        Command::NoiseSweep {
            cfg,
            sigmas,
            variants,
            seeds,
            out,
        } => {
            let cfg = cfg.resolve()?;
            let variants = variants
                .iter()
                .map(|v| v.parse::<Variant>())
                .collect::<Result<Vec<_>>>()?;
            let seeds = if seeds.is_empty() {
                vec![cfg.seed]
            } else {
                seeds
            };
            let data: Dataset = cfg.dataset.load()?;
            let rows = noise_sweep(&cfg, &data, &sigmas, &variants, &seeds)?;
            write_sweep_csv(&rows, &out)?;
            out!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Embed { ckpt, which, out } => {
            let which: Embedding = which.parse()?;
            let (model, _, data) = ckpt.load()?;
            export_embeddings(&model, &data, which, &out)?;
            out!("wrote {} embeddings to {}", data.n(), out.display());
        }
        Command::Nearest {
            ckpt,
            query_index,
            k,
            which,
        } => {
            let which: Embedding = which.parse()?;
            let (model, _, data) = ckpt.load()?;
            let e = embed(&model, &data.x, which)?;
            let hits = nearest_to_index(e.view(), query_index, k)
                .map_err(|err| Error::Config(format!("query {query_index}: {err}")))?;
            for (idx, dist) in hits {
                match &data.labels {
                    Some(l) => out!("{idx}\t{dist:.6}\tlabel={}", l[idx]),
                    None => out!("{idx}\t{dist:.6}"),
                }
            }
        }
        Command::ShowPreset { name } => print_json(&TrainConfig::preset(&name)?)?,
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
