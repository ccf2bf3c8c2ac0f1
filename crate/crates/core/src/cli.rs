//! Command-line front end. [`run`] returns the process exit code:
//! 0 on success, 1 on a usage error, 2 when the data or files are bad.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::baseline::{run_handcrafted, run_pca_svm, BaselineOptions, SvmSettings};
use crate::dataset::{ingest_dir, DatasetError, DatasetManifest};
use crate::hyperopt::{accuracy_trace, leaderboard, render_leaderboard, run_search, trace_csv, Ledger, SearchControl, SearchError, SearchOptions, SearchSpace};
use crate::nn::{load_checkpoint, save_checkpoint, train, CheckpointError, ModelConfig, TrainSettings};
use crate::pipeline::{load_split, preprocess_to_cache, sidecar_path, PipelineError};
use crate::service::{serve, SearchBackend, ServiceConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "eegline", version, about = "EEG movement classification pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan a directory of S###R##.edf files and write a trial manifest.
    Ingest {
        #[arg(env = "EEGLINE_DATA_DIR")]
        data_dir: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Fraction of trials in the training split.
        #[arg(long, default_value_t = 0.7)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute feature tensors for every manifest trial.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the directory recorded in the manifest.
        #[arg(long, env = "EEGLINE_DATA_DIR")]
        data_dir: Option<PathBuf>,
    },
    /// Train one network and save the best-validation checkpoint.
    Train {
        #[arg(long)]
        cache: PathBuf,
        /// JSON model config: {"hidden_layers": [...], "learning_rate": ...}.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Manifest to split with; defaults to the cache sidecar.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Random architecture search, appending to an NDJSON ledger.
    Search {
        #[arg(long)]
        cache: PathBuf,
        /// JSON search space; the built-in default when omitted.
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        budget: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        /// Reject networks with more parameters than this.
        #[arg(long)]
        max_params: Option<usize>,
        /// Write 0 for wall time so repeated runs give identical ledgers.
        #[arg(long)]
        no_timing: bool,
        #[arg(long, default_value = "search")]
        id: String,
    },
    /// PCA + linear SVM, optionally with the hand-built CNN.
    Baseline {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        k: usize,
        #[arg(long, default_value_t = 1e-4)]
        reg: f64,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        handcrafted: bool,
        /// Epochs for the hand-built CNN.
        #[arg(long, default_value_t = 30)]
        cnn_epochs: usize,
    },
    /// Leaderboard of a search ledger, and optionally the accuracy trace.
    Report {
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long, default_value_t = 5)]
        top: usize,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// HTTP service for classification and search jobs.
    Serve {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
        /// Feature cache enabling search jobs.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "ledgers")]
        ledger_dir: PathBuf,
        /// Request body cap in bytes.
        #[arg(long)]
        max_body: Option<usize>,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long)]
        max_params: Option<usize>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Baseline(#[from] crate::baseline::BaselineError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.into(), source }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// First 8 bytes of the checkpoint's SHA-256, hex encoded.
pub fn model_id(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

/// Parses `args` (program name first) and runs the command.
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
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Ingest { data_dir, manifest, ratio, seed } => {
            let (m, summary) = ingest_dir(&data_dir, ratio, seed)?;
            m.save(&manifest)?;
            let _ = writeln!(
                out,
                "{} files, {} subjects, {} excluded, {} trials ({} train / {} test)",
                summary.files,
                summary.subjects,
                m.excluded_subjects.len(),
                m.trial_count,
                m.train_indices.len(),
                m.test_indices.len()
            );
            for note in &m.notes {
                let _ = writeln!(out, "note: {note}");
            }
        }
        Command::Preprocess { manifest, out: cache, data_dir } => {
            let m = DatasetManifest::load(&manifest)?;
            let dir = data_dir
                .or_else(|| m.data_dir.clone())
                .ok_or_else(|| CliError::Invalid("no data directory: pass --data-dir or set EEGLINE_DATA_DIR".into()))?;
            let written = preprocess_to_cache(&m, &dir, &cache)?;
            let _ = writeln!(
                out,
                "{} tensors written to {}, {} flagged; manifest copy at {}",
                written.trials.len() - written.flagged.len(),
                cache.display(),
                written.flagged.len(),
                sidecar_path(&cache).display()
            );
        }
        Command::Train { cache, config, out: path, manifest, epochs, batch_size, seed } => {
            let config: ModelConfig = read_json(&config)?;
            let (_, train_set, test_set) = load_split(&cache, manifest.as_deref())?;
            let settings = TrainSettings { epochs, batch_size, seed, normalize: true };
            let (model, report) = train(&config, &train_set, &test_set, &settings)?;
            for e in &report.epochs {
                let _ = writeln!(
                    out,
                    "epoch {:>3}  loss {:.4}  train {:.4}  val {:.4}",
                    e.epoch, e.train_loss, e.train_acc, e.val_acc
                );
            }
            save_checkpoint(&model, &path)?;
            let bytes = std::fs::read(&path).map_err(io_err(&path))?;
            let _ = writeln!(
                out,
                "best val {:.4} at epoch {:?}{}; model {} -> {}",
                report.best_val_acc,
                report.best_epoch,
                if report.diverged { " (diverged)" } else { "" },
                model_id(&bytes),
                path.display()
            );
        }
        Command::Search {
            cache,
            space,
            budget,
            seed,
            ledger,
            manifest,
            epochs,
            batch_size,
            max_params,
            no_timing,
            id,
        } => {
            let space = match space {
                Some(p) => SearchSpace::from_json(&std::fs::read_to_string(&p).map_err(io_err(&p))?)?,
                None => SearchSpace::default(),
            };
            let (_, train_set, test_set) = load_split(&cache, manifest.as_deref())?;
            let options = SearchOptions {
                train: TrainSettings { epochs, batch_size, seed: 0, normalize: true },
                max_parameters: max_params,
                record_timing: !no_timing,
                ..SearchOptions::new(id, seed, budget as usize)
            };
            let mut progress = |r: &crate::hyperopt::TrialRecord| {
                eprintln!("[{}/{}] {:.4} {}", r.iteration, budget, r.accuracy, r.config.render());
            };
            let control = SearchControl { cancel: None, on_record: Some(&mut progress) };
            let result = run_search(&space, &train_set, &test_set, &options, &ledger, control)?;
            match result.best() {
                Some(b) => {
                    let _ = writeln!(out, "best {:.4} at iteration {}: {}", b.accuracy, b.iteration, b.config.render());
                }
                None => {
                    let _ = writeln!(out, "no records");
                }
            }
        }
        Command::Baseline { cache, out: path, manifest, k, reg, epochs, seed, handcrafted, cnn_epochs } => {
            let (m, train_set, test_set) = load_split(&cache, manifest.as_deref())?;
            let options = BaselineOptions {
                k,
                svm: SvmSettings { regularization: reg, epochs, seed, ..SvmSettings::default() },
                ..BaselineOptions::default()
            };
            let mut report = run_pca_svm(&train_set, &test_set, &m.id, &options)?;
            if handcrafted {
                let settings = TrainSettings { epochs: cnn_epochs, seed, ..TrainSettings::default() };
                report.handcrafted = Some(run_handcrafted(&train_set, &test_set, &settings)?);
            }
            write_json(&path, &report)?;
            let _ = writeln!(
                out,
                "pca({}) + svm: train {:.4} test {:.4}{}",
                report.components,
                report.train_accuracy,
                report.test_accuracy,
                if report.rank_deficient { " (rank deficient)" } else { "" }
            );
            if let Some(h) = &report.handcrafted {
                let _ = writeln!(out, "handcrafted cnn: train {:.4} test {:.4}", h.train_accuracy, h.test_accuracy);
            }
        }
        Command::Report { ledger, top, trace } => {
            let l = Ledger::load(&ledger)?;
            let rows = leaderboard(&l, top)?;
            let _ = write!(out, "{}", render_leaderboard(&rows));
            if let Some(p) = trace {
                std::fs::write(&p, trace_csv(&accuracy_trace(&l))).map_err(io_err(&p))?;
            }
        }
        Command::Serve { model, listen, cache, manifest, ledger_dir, max_body, epochs, max_params } => {
            let mut config = ServiceConfig { body_limit: max_body, ..ServiceConfig::default() };
            if let Some(p) = model {
                let bytes = std::fs::read(&p).map_err(io_err(&p))?;
                config.model_id = model_id(&bytes);
                config.model = Some(load_checkpoint(&p)?);
            }
            if let Some(c) = cache {
                let (_, train_set, test_set) = load_split(&c, manifest.as_deref())?;
                config.search = Some(SearchBackend {
                    train: train_set.into(),
                    val: test_set.into(),
                    train_settings: TrainSettings { epochs, ..TrainSettings::default() },
                    max_parameters: max_params,
                    ledger_dir,
                });
            }
            if config.model.is_none() && config.search.is_none() {
                return Err(CliError::Invalid("nothing to serve: pass --model and/or --cache".into()));
            }
            let runtime = tokio::runtime::Runtime::new().map_err(io_err(Path::new("tokio runtime")))?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&listen).await.map_err(io_err(Path::new(&listen)))?;
                eprintln!("listening on {}", listener.local_addr().map_err(io_err(Path::new(&listen)))?);
                serve(listener, config).await.map_err(io_err(Path::new(&listen)))
            })?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["eegline", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["eegline", "search", "--cache", "c", "--budget", "0", "--seed", "1", "--ledger", "l"]), EXIT_USAGE);
        assert_eq!(run(["eegline", "--help"]), EXIT_OK);
    }

    #[test]
    fn missing_files_exit_two() {
        assert_eq!(run(["eegline", "report", "--ledger", "/nonexistent/ledger.ndjson"]), EXIT_DATA);
    }

    #[test]
    fn model_id_is_16_hex_chars() {
        let id = model_id(b"abc");
        assert_eq!(id, "ba7816bf8f01cfea");
    }
}
