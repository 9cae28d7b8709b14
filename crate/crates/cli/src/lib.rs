//! Batch front end: `cdsa ingest | metrics | evaluate | chart | baseline`.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use cdsa_core::par::Exec;
use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "cdsa", version, about = "Rank source domains for cross-domain sentiment analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load every domain and write summary.csv.
    Ingest,
    /// Compute the selected metrics over all ordered domain pairs.
    Metrics,
    /// Score metric rankings against the accuracy matrix.
    Evaluate,
    /// Recommendation chart for an accuracy matrix (bundled fixture by default).
    Chart,
    /// Train the bag-of-words baseline and write accuracy_matrix.csv.
    Baseline,
    /// Write a synthetic demo workspace with a run.toml.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        n_domains: usize,
        #[arg(long, default_value_t = 1000)]
        reviews: usize,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// `ID=PATH` pairs, or a single directory of <ID>.jsonl / <ID>.csv files.
    #[arg(long, global = true, num_args = 1..)]
    pub domains: Vec<String>,
    /// Comma-separated metric ids, or `all`.
    #[arg(long, global = true)]
    pub metrics: Option<String>,
    /// Comma-separated K values.
    #[arg(long, global = true)]
    pub k: Option<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub stopwords: Option<PathBuf>,
    #[arg(long, global = true)]
    pub adjectives: Option<PathBuf>,
    #[arg(long, global = true)]
    pub sentiment_lexicon: Option<PathBuf>,
    /// `METRIC=DIR`, where DIR holds one <ID>.txt vector file per domain.
    #[arg(long, global = true)]
    pub vectors: Vec<String>,
    /// Accuracy matrix CSV, `table1`, or `generate`.
    #[arg(long, global = true)]
    pub accuracy: Option<String>,
    /// Where `evaluate` reads metric CSVs (default: <out>/metrics).
    #[arg(long, global = true)]
    pub metrics_dir: Option<PathBuf>,
    /// Review vectors per domain for the sentence metrics.
    #[arg(long, global = true)]
    pub test_vectors: Option<usize>,
    /// Run single-threaded.
    #[arg(long, global = true)]
    pub sequential: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            domains: self.domains.clone(),
            metrics: self.metrics.clone(),
            k: self.k.clone(),
            out: self.out.clone(),
            seed: self.seed,
            stopwords: self.stopwords.clone(),
            adjectives: self.adjectives.clone(),
            sentiment_lexicon: self.sentiment_lexicon.clone(),
            vectors: self.vectors.clone(),
            accuracy: self.accuracy.clone(),
            metrics_dir: self.metrics_dir.clone(),
            test_vectors: self.test_vectors,
        }
    }

    pub fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let exec = cli.common.exec();
    if let Command::Synth { dir, n_domains, reviews } = &cli.command {
        let seed = cli.common.seed.unwrap_or(42);
        let cfg = commands::cmd_synth(dir, *n_domains, *reviews, seed)?;
        println!("wrote {}", cfg.display());
        return Ok(());
    }
    let cfg = RunConfig::resolve(cli.common.config.as_deref(), cli.common.overrides())?;
    match &cli.command {
        Command::Ingest => {
            let rows = commands::cmd_ingest(&cfg, exec)?;
            let flagged = rows.iter().filter(|r| !r.balanced).count();
            println!("{} domain(s) ingested, {flagged} unbalanced", rows.len());
        }
        Command::Metrics => {
            for p in commands::cmd_metrics(&cfg, exec)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Evaluate => {
            let report = commands::cmd_evaluate(&cfg, exec)?;
            print!("{}", report.markdown());
        }
        Command::Chart => print!("{}", commands::cmd_chart(&cfg, exec)?),
        Command::Baseline => {
            let m = commands::cmd_baseline(&cfg, exec)?;
            println!("{}x{} accuracy matrix written", m.len(), m.len());
        }
        Command::Synth { .. } => unreachable!(),
    }
    Ok(())
}

/// 2 for internal invariant violations, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let invariant =
        err.chain().any(|e| matches!(e.downcast_ref::<cdsa_core::Error>(), Some(cdsa_core::Error::Invariant(_))));
    if invariant {
        2
    } else {
        1
    }
}
