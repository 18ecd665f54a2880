use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use highrecall_core::cluster::{import_memberships, soft_cluster};
use highrecall_core::corpus::{build_vocabulary, vectorize};
use highrecall_core::eval::{aggregate_runs, GroundTruth, RunEfforts};
use highrecall_core::rng::{self, STREAM_SEEDS};
use highrecall_core::search::{run_search, DatasetOracle, SeedSet};
use highrecall_core::{Corpus, CorpusMatrix, EvaluationReport, MembershipMatrix, RecallCurve, SearchConfig, Strategy, Trajectory};
use rand::seq::IndexedRandom;
use rayon::prelude::*;

use crate::manifest::{unix_now, MembershipSource, RunManifest, RunSeeds};
use crate::pipeline::{create, load_corpus, sha256_file};

/// Relevant instances drawn as the seed set of every run.
pub const SEEDS_PER_RUN: usize = 3;

pub const REPORT_FILE: &str = "report.tsv";
pub const RUNS_FILE: &str = "runs.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub corpus: PathBuf,
    pub min_df: usize,
    pub topic: String,
    /// Defaults to `topic`.
    pub seed_topic: Option<String>,
    /// Imported memberships; otherwise `config.clusters` arms are built.
    pub memberships: Option<PathBuf>,
    pub config: SearchConfig,
    pub strategies: Vec<Strategy>,
    pub recall_targets: Vec<f64>,
    pub runs: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvaluationReport,
    /// One entry per run and strategy, run-major.
    pub runs: Vec<RunEfforts>,
}

/// Resolves options into a manifest: hashes inputs and draws the seed sets.
pub fn plan(opts: &RunOptions) -> Result<RunManifest> {
    ensure!(!opts.strategies.is_empty(), "no strategy given");
    ensure!(opts.runs > 0, "runs must be at least 1");
    ensure!(
        opts.recall_targets.iter().all(|&t| t > 0.0 && t <= 1.0),
        "recall targets must be in (0, 1]"
    );
    opts.config.validate()?;
    let corpus = load_corpus(&opts.corpus)?;
    let seed_topic = opts.seed_topic.clone().unwrap_or_else(|| opts.topic.clone());
    let candidates: Vec<&str> = corpus
        .docs()
        .iter()
        .filter(|d| d.is_relevant(&seed_topic))
        .map(|d| d.id.as_str())
        .collect();
    if candidates.len() < SEEDS_PER_RUN {
        bail!(
            "no seeds: topic `{seed_topic}` has {} relevant documents, need {SEEDS_PER_RUN}",
            candidates.len()
        );
    }
    let runs = (0..opts.runs)
        .map(|run| {
            let seed = rng::split_seed(opts.master_seed, run as u64);
            let mut draw = rng::stream(seed, STREAM_SEEDS);
            let seed_ids = candidates
                .choose_multiple(&mut draw, SEEDS_PER_RUN)
                .map(|s| s.to_string())
                .collect();
            RunSeeds { run, seed, seed_ids }
        })
        .collect();

    let mut config = opts.config.clone();
    let memberships = match &opts.memberships {
        Some(path) => {
            let mem = import(&corpus, path)?;
            config.clusters = mem.k();
            config.memberships = Some(path.display().to_string());
            MembershipSource::Imported {
                path: path.clone(),
                sha256: sha256_file(path)?,
            }
        }
        None => {
            config.memberships = None;
            MembershipSource::Clustered {
                seed: opts.master_seed,
            }
        }
    };

    let mut outputs = vec![PathBuf::from(REPORT_FILE), PathBuf::from(RUNS_FILE)];
    for r in 0..opts.runs {
        for &s in &opts.strategies {
            outputs.push(RunManifest::trajectory_path(s, r));
            outputs.push(RunManifest::curve_path(s, r));
            outputs.push(RunManifest::arms_path(s, r));
        }
    }
    Ok(RunManifest {
        corpus: opts.corpus.clone(),
        corpus_sha256: sha256_file(&opts.corpus)?,
        min_df: opts.min_df,
        topic: opts.topic.clone(),
        seed_topic,
        memberships,
        config,
        strategies: opts.strategies.clone(),
        recall_targets: opts.recall_targets.clone(),
        master_seed: opts.master_seed,
        runs,
        outputs,
        created_unix: unix_now(),
        finished_unix: None,
    })
}

fn import(corpus: &Corpus, path: &Path) -> Result<MembershipMatrix> {
    let ids: Vec<String> = corpus.docs().iter().map(|d| d.id.clone()).collect();
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    import_memberships(std::io::BufReader::new(file), &ids).with_context(|| format!("in {}", path.display()))
}

struct Inputs {
    corpus: Corpus,
    matrix: Arc<CorpusMatrix>,
    memberships: Arc<MembershipMatrix>,
}

fn load_inputs(manifest: &RunManifest) -> Result<Inputs> {
    let sha = sha256_file(&manifest.corpus)?;
    ensure!(
        sha == manifest.corpus_sha256,
        "{} changed since the manifest was written (sha256 {sha})",
        manifest.corpus.display()
    );
    let corpus = load_corpus(&manifest.corpus)?;
    let vocab = build_vocabulary(corpus.docs(), manifest.min_df)?;
    let matrix = vectorize(corpus.docs(), &vocab);
    let memberships = match &manifest.memberships {
        MembershipSource::Clustered { seed } => soft_cluster(
            &matrix,
            manifest.config.clusters,
            manifest.config.temperature,
            *seed,
        )?,
        MembershipSource::Imported { path, sha256 } => {
            let sha = sha256_file(path)?;
            ensure!(&sha == sha256, "{} changed since the manifest was written", path.display());
            import(&corpus, path)?
        }
    };
    Ok(Inputs {
        corpus,
        matrix: Arc::new(matrix),
        memberships: Arc::new(memberships),
    })
}

/// Runs every (seed set, strategy) pair of the manifest, writing outputs
/// under `out`. Runs execute in parallel; files depend only on the manifest.
pub fn execute(manifest: &RunManifest, out: &Path) -> Result<RunOutcome> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    manifest.write(&out.join(MANIFEST_FILE))?;
    let inputs = load_inputs(manifest)?;
    let truth = GroundTruth::from_corpus(&inputs.corpus, &manifest.topic)?;

    let jobs: Vec<(&RunSeeds, Strategy)> = manifest
        .runs
        .iter()
        .flat_map(|r| manifest.strategies.iter().map(move |&s| (r, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(seeds, strategy)| {
            let config = SearchConfig {
                seed: seeds.seed,
                strategy,
                ..manifest.config.clone()
            };
            let mut oracle = DatasetOracle::new(&inputs.corpus, &manifest.topic);
            let engine = run_search(
                inputs.matrix.clone(),
                inputs.memberships.clone(),
                &mut oracle,
                config,
                &SeedSet::relevant(seeds.seed_ids.iter().cloned()),
            )
            .with_context(|| format!("run {} ({strategy})", seeds.run))?;
            let curve = RecallCurve::from_trajectory(engine.trajectory(), &truth);

            let mut w = create(&out.join(RunManifest::trajectory_path(strategy, seeds.run)))?;
            engine.trajectory().write_tsv(&mut w)?;
            w.flush()?;
            let mut w = create(&out.join(RunManifest::curve_path(strategy, seeds.run)))?;
            curve.write_tsv(&mut w)?;
            w.flush()?;
            let mut w = create(&out.join(RunManifest::arms_path(strategy, seeds.run)))?;
            engine.write_snapshots(&mut w)?;
            w.flush()?;

            Ok(RunEfforts::from_curve(&manifest.topic, strategy, &curve, &manifest.recall_targets)?)
        })
        .collect::<Result<Vec<_>>>()?;

    let outcome = assemble(manifest, runs)?;
    write_tables(manifest, &outcome, out)?;
    let finished = RunManifest {
        finished_unix: Some(unix_now()),
        ..manifest.clone()
    };
    finished.write(&out.join(MANIFEST_FILE))?;
    Ok(outcome)
}

fn assemble(manifest: &RunManifest, runs: Vec<RunEfforts>) -> Result<RunOutcome> {
    let rows = manifest
        .strategies
        .iter()
        .map(|&s| {
            let mine: Vec<RunEfforts> = runs.iter().filter(|r| r.strategy == s).cloned().collect();
            aggregate_runs(&mine)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunOutcome {
        report: EvaluationReport {
            targets: manifest.recall_targets.clone(),
            budget: manifest.config.budget,
            rows,
        },
        runs,
    })
}

fn write_tables(manifest: &RunManifest, outcome: &RunOutcome, out: &Path) -> Result<()> {
    let mut w = create(&out.join(REPORT_FILE))?;
    outcome.report.write_tsv(&mut w)?;
    w.flush()?;

    let mut w = create(&out.join(RUNS_FILE))?;
    write!(w, "run\tseed\tstrategy")?;
    for t in &manifest.recall_targets {
        write!(w, "\tR={t}")?;
    }
    writeln!(w)?;
    let per_run = manifest.strategies.len();
    for (i, r) in outcome.runs.iter().enumerate() {
        let seeds = &manifest.runs[i / per_run];
        write!(w, "{}\t{}\t{}", seeds.run, seeds.seed, r.strategy)?;
        for e in &r.efforts {
            write!(w, "\t{}", e.render(manifest.config.budget))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Plans and executes in one go.
pub fn cmd_run(opts: &RunOptions, out: &Path) -> Result<RunOutcome> {
    let manifest = plan(opts)?;
    execute(&manifest, out)
}

/// Recomputes the report of a finished run from its trajectory files,
/// optionally at different recall targets. Nothing is written.
pub fn cmd_report(out: &Path, targets: Option<&[f64]>) -> Result<RunOutcome> {
    let mut manifest = RunManifest::read(&out.join(MANIFEST_FILE))?;
    if let Some(t) = targets {
        manifest.recall_targets = t.to_vec();
    }
    let corpus = load_corpus(&manifest.corpus)?;
    let truth = GroundTruth::from_corpus(&corpus, &manifest.topic)?;
    let mut runs = Vec::new();
    for seeds in &manifest.runs {
        for &strategy in &manifest.strategies {
            let path = out.join(RunManifest::trajectory_path(strategy, seeds.run));
            let file = std::fs::File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
            let trajectory = Trajectory::read_tsv(std::io::BufReader::new(file))
                .with_context(|| format!("in {}", path.display()))?;
            let curve = RecallCurve::from_trajectory(&trajectory, &truth);
            runs.push(RunEfforts::from_curve(&manifest.topic, strategy, &curve, &manifest.recall_targets)?);
        }
    }
    assemble(&manifest, runs)
}
