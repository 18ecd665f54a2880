use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use highrecall_cli::{
    cmd_cluster, cmd_generate, cmd_ingest, cmd_report, execute, load_corpus, plan, ClusterSource, RunManifest,
    RunOptions,
};
use highrecall_core::cluster::{soft_cluster, DEFAULT_TEMPERATURE};
use highrecall_core::corpus::{build_vocabulary, vectorize, DEFAULT_MIN_DF};
use highrecall_core::eval::DEFAULT_TARGETS;
use highrecall_core::search::synthetic::RELEVANT_TOPIC;
use highrecall_core::{SearchConfig, Strategy, UpdateMode};
use highrecall_service::{serve, AppState, Dataset};

#[derive(Parser)]
#[command(name = "highrecall", version, about = "High-recall active search with cluster bandits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Vectorise a JSON-lines corpus into vocab.tsv and matrix.tsv.
    Ingest {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MIN_DF)]
        min_df: usize,
    },
    /// Soft-cluster an ingested matrix, or validate an imported membership file.
    Cluster {
        /// Directory written by `ingest`.
        ingested: PathBuf,
        #[arg(long, short = 'k', conflicts_with = "import")]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
        temperature: f64,
        /// Triplet file `doc_id \t cluster \t mu` to validate instead.
        #[arg(long)]
        import: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate reviews for every seed set and strategy and write a report.
    Run(RunArgs),
    /// Recompute the report of a finished run from its trajectories.
    Report {
        /// Output directory of a previous `run`.
        dir: PathBuf,
        #[arg(long, value_delimiter = ',')]
        recall_targets: Option<Vec<f64>>,
    },
    /// Write the synthetic multi-facet benchmark corpus.
    Generate {
        #[arg(long, default_value_t = 5)]
        modes: usize,
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 0.02)]
        prevalence: f64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve review sessions over HTTP.
    Serve {
        /// `name=path` of a JSON-lines corpus; repeatable.
        #[arg(long = "corpus", required = true, value_parser = parse_named)]
        corpora: Vec<(String, PathBuf)>,
        #[arg(long, default_value_t = 50)]
        cluster_k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
        temperature: f64,
        #[arg(long, default_value_t = DEFAULT_MIN_DF)]
        min_df: usize,
        /// Directory for per-session event logs; sessions are restored from it.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    out: PathBuf,
    /// Repeat the runs recorded in a manifest; other run flags are ignored.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    corpus: Option<PathBuf>,
    #[arg(long, default_value = RELEVANT_TOPIC)]
    topic: String,
    /// Topic to draw seed sets from (default: `--topic`).
    #[arg(long)]
    seed_topic: Option<String>,
    #[arg(long, conflicts_with = "cluster_k")]
    memberships: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    cluster_k: usize,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    temperature: f64,
    #[arg(long, value_delimiter = ',', default_value = "mab,greedy", value_parser = parse_strategy)]
    strategy: Vec<Strategy>,
    #[arg(long, conflicts_with = "window")]
    gamma: Option<f64>,
    /// Sliding window length in rounds, or `inf`.
    #[arg(long)]
    window: Option<String>,
    #[arg(long, default_value_t = 100)]
    pseudo_negatives: usize,
    #[arg(long, default_value_t = 0.40)]
    budget: f64,
    #[arg(long, value_delimiter = ',')]
    recall_targets: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// Master seed; run `r` uses a seed split from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MIN_DF)]
    min_df: usize,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or("expected name=path")?;
    Ok((name.to_string(), PathBuf::from(path)))
}

impl RunArgs {
    fn mode(&self) -> Result<UpdateMode> {
        Ok(match (&self.gamma, &self.window) {
            (_, Some(w)) if w == "inf" => UpdateMode::Window { size: None },
            (_, Some(w)) => UpdateMode::Window {
                size: Some(w.parse().with_context(|| format!("bad window `{w}`"))?),
            },
            (Some(gamma), None) => UpdateMode::Discount { gamma: *gamma },
            (None, None) => SearchConfig::default().mode,
        })
    }

    fn options(&self) -> Result<RunOptions> {
        let config = SearchConfig {
            clusters: self.cluster_k,
            temperature: self.temperature,
            mode: self.mode()?,
            pseudo_negatives: self.pseudo_negatives,
            budget: self.budget,
            ..SearchConfig::default()
        };
        Ok(RunOptions {
            corpus: self.corpus.clone().context("--corpus is required")?,
            min_df: self.min_df,
            topic: self.topic.clone(),
            seed_topic: self.seed_topic.clone(),
            memberships: self.memberships.clone(),
            config,
            strategies: self.strategy.clone(),
            recall_targets: self.recall_targets.clone().unwrap_or_else(|| DEFAULT_TARGETS.to_vec()),
            runs: self.runs,
            master_seed: self.seed,
        })
    }
}

fn main() -> Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    match Cli::parse().command {
        Command::Ingest { corpus, out, min_df } => {
            let matrix = cmd_ingest(&corpus, &out, min_df)?;
            eprintln!("{} documents, {} terms", matrix.len(), matrix.n_features());
        }
        Command::Cluster {
            ingested,
            k,
            seed,
            temperature,
            import,
            out,
        } => {
            let source = match (import, k) {
                (Some(path), _) => ClusterSource::Import(path),
                (None, Some(k)) => ClusterSource::Build { k, seed, temperature },
                (None, None) => anyhow::bail!("give either -k or --import"),
            };
            let mem = cmd_cluster(&ingested, &source, &out)?;
            eprintln!("{} rows, {} clusters", mem.n_rows(), mem.k());
        }
        Command::Run(args) => {
            let manifest = match &args.manifest {
                Some(path) => RunManifest::read(path)?,
                None => plan(&args.options()?)?,
            };
            let outcome = execute(&manifest, &args.out)?;
            print!("{}", outcome.report);
        }
        Command::Report { dir, recall_targets } => {
            let outcome = cmd_report(&dir, recall_targets.as_deref())?;
            print!("{}", outcome.report);
        }
        Command::Generate {
            modes,
            n,
            prevalence,
            seed,
            out,
        } => {
            let n = cmd_generate(modes, n, prevalence, seed, &out)?;
            eprintln!("{n} documents written to {}", out.display());
        }
        Command::Serve {
            corpora,
            cluster_k,
            seed,
            temperature,
            min_df,
            log_dir,
            addr,
        } => {
            let mut datasets = HashMap::new();
            for (name, path) in corpora {
                let corpus = load_corpus(&path)?;
                let vocab = build_vocabulary(corpus.docs(), min_df)?;
                let matrix = vectorize(corpus.docs(), &vocab);
                let memberships = soft_cluster(&matrix, cluster_k, temperature, seed)?;
                tracing::info!("corpus `{name}`: {} documents, {} clusters", corpus.len(), memberships.k());
                datasets.insert(
                    name,
                    Dataset {
                        corpus,
                        matrix: Arc::new(matrix),
                        memberships: Arc::new(memberships),
                    },
                );
            }
            let mut state = AppState::new(datasets);
            if let Some(dir) = log_dir {
                state = state.with_log_dir(&dir).map_err(|e| anyhow::anyhow!("{e}"))?;
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(addr, Arc::new(state)))?;
        }
    }
    Ok(())
}
