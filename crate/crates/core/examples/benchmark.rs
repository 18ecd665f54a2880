//! Desk-scale benchmark: mab vs greedy on the synthetic multi-modal corpus.
//!
//! `cargo run --release -p highrecall-core --example benchmark -- [runs] [master_seed] [modes]`

use std::sync::Arc;
use std::time::Instant;

use highrecall_core::cluster::soft_cluster;
use highrecall_core::corpus::{build_vocabulary, vectorize, Corpus};
use highrecall_core::eval::{effort_to_recall, GroundTruth, RecallCurve};
use highrecall_core::rng;
use highrecall_core::search::synthetic::{generate_synthetic, mode_topic, RELEVANT_TOPIC};
use highrecall_core::search::{run_search, DatasetOracle, SearchConfig, SeedSet, Strategy};
use highrecall_core::UpdateMode;
use rand::seq::IndexedRandom;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let runs: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let master: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2024);
    let modes: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(5);
    let start = Instant::now();
    let synth = generate_synthetic(modes, 5000, 0.02, master);
    let corpus = Corpus::new(synth.docs).unwrap();
    let vocab = build_vocabulary(corpus.docs(), 3).unwrap();
    let matrix = Arc::new(vectorize(corpus.docs(), &vocab));
    let mem = Arc::new(soft_cluster(&matrix, 10, 0.1, master).unwrap());
    let truth = GroundTruth::from_corpus(&corpus, RELEVANT_TOPIC).unwrap();
    println!("prep {:?}, vocab {}", start.elapsed(), vocab.len());
    let mode0: Vec<String> = corpus
        .docs()
        .iter()
        .filter(|d| d.is_relevant(&mode_topic(0)))
        .map(|d| d.id.clone())
        .collect();
    for r in 0..runs {
        let seed = rng::split_seed(master, r);
        let mut srng = rng::stream(seed, rng::STREAM_SEEDS);
        let seeds: Vec<String> = mode0.choose_multiple(&mut srng, 3).cloned().collect();
        let mut line = format!("run {r}:");
        for strategy in [Strategy::Mab, Strategy::Greedy] {
            let t = Instant::now();
            let config = SearchConfig {
                clusters: 10,
                mode: UpdateMode::Discount { gamma: 0.95 },
                seed,
                strategy,
                ..SearchConfig::default()
            };
            let mut oracle = DatasetOracle::new(&corpus, RELEVANT_TOPIC);
            let engine = run_search(
                matrix.clone(),
                mem.clone(),
                &mut oracle,
                config,
                &SeedSet::relevant(seeds.clone()),
            )
            .unwrap();
            let curve = RecallCurve::from_trajectory(engine.trajectory(), &truth);
            let e: Vec<String> = [0.5, 0.9, 0.95, 0.99]
                .iter()
                .map(|&x| effort_to_recall(&curve, x).unwrap().render(0.4))
                .collect();
            line += &format!(" {strategy} {:?} final={:.2} ({:.1?})", e, curve.final_recall(), t.elapsed());
        }
        println!("{line}");
    }
}
