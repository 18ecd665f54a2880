use std::collections::HashSet;
use std::sync::Arc;

use highrecall_core::bandit::replay_reconstruct;
use highrecall_core::cluster::soft_cluster;
use highrecall_core::corpus::{build_vocabulary, vectorize};
use highrecall_core::eval::{effort_to_recall, Effort, GroundTruth, RecallCurve};
use highrecall_core::search::synthetic::{generate_synthetic, mode_topic, RELEVANT_TOPIC};
use highrecall_core::search::{
    greedy_select, next_batch_size, run_search, select_instance, DatasetOracle,
};
use highrecall_core::{
    rng, Corpus, CorpusMatrix, MembershipMatrix, SearchConfig, SeedSet, Strategy, Trajectory,
    UpdateMode,
};
use proptest::prelude::*;
use proptest::strategy::Strategy as _;
use rand::seq::IndexedRandom;

struct Fixture {
    corpus: Corpus,
    matrix: Arc<CorpusMatrix>,
    memberships: Arc<MembershipMatrix>,
}

fn fixture(modes: usize, n: usize, prevalence: f64, k: usize, seed: u64) -> Fixture {
    let corpus = Corpus::new(generate_synthetic(modes, n, prevalence, seed).docs).unwrap();
    let vocab = build_vocabulary(corpus.docs(), 3).unwrap();
    let matrix = Arc::new(vectorize(corpus.docs(), &vocab));
    let memberships = Arc::new(soft_cluster(&matrix, k, 0.1, seed).unwrap());
    Fixture {
        corpus,
        matrix,
        memberships,
    }
}

fn relevant_ids(corpus: &Corpus, topic: &str) -> Vec<String> {
    corpus
        .docs()
        .iter()
        .filter(|d| d.is_relevant(topic))
        .map(|d| d.id.clone())
        .collect()
}

fn run(fx: &Fixture, memberships: Arc<MembershipMatrix>, config: SearchConfig, seeds: &[String]) -> Trajectory {
    let mut oracle = DatasetOracle::new(&fx.corpus, RELEVANT_TOPIC);
    run_search(
        fx.matrix.clone(),
        memberships,
        &mut oracle,
        config,
        &SeedSet::relevant(seeds.to_vec()),
    )
    .unwrap()
    .into_trajectory()
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("d{i:04}")).collect()
}

#[test]
fn exploration_overrides_raw_score() {
    let m = MembershipMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1e-4);
    let (row, value) = select_instance(&[0, 1], &[0.9, 0.2], &m, &[0.1, 0.9], &ids(2)).unwrap();
    assert_eq!(row, 1);
    assert!((value - 0.18).abs() < 1e-12);
}

#[test]
fn schedule_from_one() {
    let mut b = 1;
    let mut sizes = vec![b];
    for _ in 0..45 {
        b = next_batch_size(b);
        sizes.push(b);
    }
    assert_eq!(&sizes[..41], &(1..=41).collect::<Vec<_>>()[..]);
    assert_eq!(&sizes[41..44], &[43, 45, 47]);
}

fn selection_case() -> impl proptest::strategy::Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..30, 1usize..5).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(prop::collection::vec(0.01f64..1.0, k), n),
            prop::collection::vec(0.01f64..1.0, k),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn positive_rescaling_of_theta_keeps_selection((pi, mu, theta) in selection_case(), c in 0.01f64..100.0) {
        let m = MembershipMatrix::from_dense_rows(&mu, 0.0);
        let pool: Vec<usize> = (0..pi.len()).collect();
        let names = ids(pi.len());
        let scaled: Vec<f64> = theta.iter().map(|t| t * c).collect();
        let a = select_instance(&pool, &pi, &m, &theta, &names).unwrap().0;
        let b = select_instance(&pool, &pi, &m, &scaled, &names).unwrap().0;
        // a genuine near-tie may flip under rounding; require the scores to agree then
        let va = pi[a] * m.weighted_sum(a, &theta);
        let vb = pi[b] * m.weighted_sum(b, &theta);
        prop_assert!(a == b || (va - vb).abs() <= 1e-12 * va.abs().max(1e-300));
    }

    #[test]
    fn constant_theta_reduces_to_highest_score((pi, mu, _) in selection_case(), c in 0.01f64..1.0) {
        let m = MembershipMatrix::from_dense_rows(&mu, 0.0);
        let pool: Vec<usize> = (0..pi.len()).collect();
        let names = ids(pi.len());
        let theta = vec![c; m.k()];
        let picked = select_instance(&pool, &pi, &m, &theta, &names).unwrap().0;
        let top = greedy_select(&pool, &pi, &names, 1)[0];
        prop_assert!(picked == top || (pi[picked] - pi[top]).abs() <= 1e-12);
    }
}

#[test]
fn run_invariants_hold() {
    let fx = fixture(3, 600, 0.05, 5, 9);
    let seeds: Vec<String> = relevant_ids(&fx.corpus, RELEVANT_TOPIC).into_iter().take(3).collect();
    for strategy in [Strategy::Mab, Strategy::Greedy, Strategy::Random] {
        let config = SearchConfig {
            clusters: 5,
            budget: 0.3,
            seed: 4,
            strategy,
            ..SearchConfig::default()
        };
        let mut oracle = DatasetOracle::new(&fx.corpus, RELEVANT_TOPIC);
        let engine = run_search(
            fx.matrix.clone(),
            fx.memberships.clone(),
            &mut oracle,
            config.clone(),
            &SeedSet::relevant(seeds.clone()),
        )
        .unwrap();
        let t = engine.trajectory();

        let mut seen = HashSet::new();
        assert!(t.reviews().all(|(id, _)| seen.insert(id.to_string())), "{strategy}: repeat proposal");
        assert_eq!(t.len(), config.budget_reviews(600));
        assert_eq!(engine.pool().len() + t.len(), 600);

        let rounds = t.entries.last().unwrap().round;
        let mut b = 1;
        for r in 1..=rounds {
            let size = t.entries.iter().filter(|e| e.round == r).count();
            if r < rounds {
                assert_eq!(size, b, "{strategy}: round {r}");
            } else {
                assert!(size <= b);
            }
            b = next_batch_size(b);
        }

        let replay =
            replay_reconstruct(fx.memberships.k(), config.mode, engine.reward_history()).unwrap();
        for (live, folded) in engine.bandit().arms().iter().zip(&replay) {
            assert!((live.s - folded.s).abs() <= 1e-9 && (live.f - folded.f).abs() <= 1e-9);
        }
    }
}

#[test]
fn identical_inputs_give_identical_trajectories() {
    let fx = fixture(3, 500, 0.05, 5, 2);
    let seeds: Vec<String> = relevant_ids(&fx.corpus, RELEVANT_TOPIC).into_iter().take(3).collect();
    for strategy in [Strategy::Mab, Strategy::Random] {
        let config = SearchConfig {
            clusters: 5,
            seed: 77,
            strategy,
            ..SearchConfig::default()
        };
        let a = run(&fx, fx.memberships.clone(), config.clone(), &seeds);
        let b = run(&fx, fx.memberships.clone(), config, &seeds);
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_tsv(&mut buf).unwrap();
        assert_eq!(Trajectory::read_tsv(buf.as_slice()).unwrap().reviews().count(), a.len());
    }
}

#[test]
fn single_arm_without_forgetting_matches_greedy() {
    let fx = fixture(2, 500, 0.04, 2, 3);
    let one = Arc::new(MembershipMatrix::from_dense_rows(&vec![vec![1.0]; 500], 1e-4));
    let seeds: Vec<String> = relevant_ids(&fx.corpus, RELEVANT_TOPIC).into_iter().take(3).collect();
    let base = SearchConfig {
        clusters: 1,
        mode: UpdateMode::Discount { gamma: 1.0 },
        seed: 12,
        ..SearchConfig::default()
    };
    let mab = run(&fx, one.clone(), SearchConfig { strategy: Strategy::Mab, ..base.clone() }, &seeds);
    let greedy = run(&fx, one, SearchConfig { strategy: Strategy::Greedy, ..base }, &seeds);
    let a: Vec<&str> = mab.reviews().map(|r| r.0).collect();
    let b: Vec<&str> = greedy.reviews().map(|r| r.0).collect();
    assert_eq!(a, b);
}

#[test]
fn all_negative_oracle_exhausts_tiny_corpus() {
    let fx = fixture(2, 20, 0.15, 2, 5);
    let seeds: Vec<String> = relevant_ids(&fx.corpus, RELEVANT_TOPIC).into_iter().take(1).collect();
    let mut oracle = DatasetOracle::from_labels(fx.corpus.docs().iter().map(|d| (d.id.clone(), false)).collect());
    let config = SearchConfig {
        clusters: 2,
        budget: 1.0,
        ..SearchConfig::default()
    };
    let engine = run_search(
        fx.matrix.clone(),
        fx.memberships.clone(),
        &mut oracle,
        config,
        &SeedSet::relevant(seeds),
    )
    .unwrap();
    assert_eq!(engine.trajectory().len(), 20);
    assert!(engine.pool().is_empty());
    assert!(engine.trajectory().entries.iter().all(|e| !e.label));
}

#[test]
fn all_relevant_seeds_reach_full_recall_immediately() {
    let fx = fixture(2, 400, 0.02, 3, 6);
    let seeds = relevant_ids(&fx.corpus, RELEVANT_TOPIC);
    let truth = GroundTruth::from_corpus(&fx.corpus, RELEVANT_TOPIC).unwrap();
    let t = run(&fx, fx.memberships.clone(), SearchConfig { clusters: 3, budget: 0.1, ..SearchConfig::default() }, &seeds);
    let curve = RecallCurve::from_trajectory(&t, &truth);
    assert_eq!(curve.points[seeds.len()].1, 1.0);
    assert_eq!(t.len(), 40);
}

/// mab against greedy on a two-facet corpus, seeds from the larger facet.
/// Returns per-run effort at recall 0.99 for both strategies.
fn two_facet_efforts() -> Vec<(f64, f64)> {
    let master = 2024;
    let fx = fixture(2, 5000, 0.02, 10, master);
    let truth = GroundTruth::from_corpus(&fx.corpus, RELEVANT_TOPIC).unwrap();
    let facet = relevant_ids(&fx.corpus, &mode_topic(0));
    (0..10)
        .map(|r| {
            let seed = rng::split_seed(master, r);
            let mut pick = rng::stream(seed, rng::STREAM_SEEDS);
            let seeds: Vec<String> = facet.choose_multiple(&mut pick, 3).cloned().collect();
            let effort = |strategy| {
                let config = SearchConfig {
                    clusters: 10,
                    seed,
                    strategy,
                    ..SearchConfig::default()
                };
                let t = run(&fx, fx.memberships.clone(), config, &seeds);
                match effort_to_recall(&RecallCurve::from_trajectory(&t, &truth), 0.99).unwrap() {
                    Effort::Fraction(f) => f,
                    Effort::Unreached => 1.0,
                }
            };
            (effort(Strategy::Mab), effort(Strategy::Greedy))
        })
        .collect()
}

#[test]
fn bandit_beats_greedy_on_two_facets() {
    let runs = two_facet_efforts();
    let wins = runs.iter().filter(|(m, g)| m < g).count();
    let losses = runs.iter().filter(|(m, g)| m > g).count();
    let mean = |f: fn(&(f64, f64)) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
    let (mab, greedy) = (mean(|r| r.0), mean(|r| r.1));
    eprintln!("two facets: mab wins {wins}/10, loses {losses}; mean effort {mab:.4} vs {greedy:.4}");
    assert!(mab < greedy);
    assert!(wins > losses);
}
