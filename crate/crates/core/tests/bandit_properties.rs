use highrecall_core::bandit::{replay_reconstruct, sample_beta, Reward, RoundRecord, PRIOR};
use highrecall_core::{rng, ArmPosterior, BanditState, RewardBatch, UpdateMode};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Beta, Distribution};

fn row_strategy(k: usize) -> impl Strategy<Value = Vec<(u32, f64)>> {
    prop::collection::vec(0.0f64..1.0, k).prop_filter_map("all-zero row", |raw| {
        let sum: f64 = raw.iter().sum();
        (sum > 1e-6).then(|| {
            raw.iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.0)
                .map(|(c, &v)| (c as u32, v / sum))
                .collect()
        })
    })
}

fn reward_strategy(k: usize) -> impl Strategy<Value = Reward> {
    (row_strategy(k), any::<bool>(), 0u32..1000).prop_map(|(membership, relevant, n)| Reward {
        id: format!("d{n}"),
        relevant,
        membership,
    })
}

fn rounds_strategy(k: usize, max_rounds: usize) -> impl Strategy<Value = Vec<Vec<Reward>>> {
    prop::collection::vec(prop::collection::vec(reward_strategy(k), 0..6), 1..max_rounds)
}

fn mode_strategy() -> impl Strategy<Value = UpdateMode> {
    prop_oneof![
        (0.5f64..=1.0).prop_map(|gamma| UpdateMode::Discount { gamma }),
        (1usize..8).prop_map(|w| UpdateMode::Window { size: Some(w) }),
        Just(UpdateMode::Window { size: None }),
    ]
}

fn close(a: &[ArmPosterior], b: &[ArmPosterior], tol: f64) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x.s - y.s).abs() <= tol && (x.f - y.f).abs() <= tol)
}

fn run_live(k: usize, mode: UpdateMode, rounds: &[Vec<Reward>]) -> BanditState {
    let mut state = BanditState::new(k, mode);
    for r in rounds {
        state.update(&RewardBatch::new(r.clone())).unwrap();
    }
    state
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn live_state_matches_fold_from_scratch(
        (k, rounds) in (1usize..6).prop_flat_map(|k| (Just(k), rounds_strategy(k, 30))),
        mode in mode_strategy(),
    ) {
        let live = run_live(k, mode, &rounds);
        let history: Vec<RoundRecord> = rounds
            .iter()
            .enumerate()
            .map(|(round, r)| RoundRecord { round, batch: RewardBatch::new(r.clone()) })
            .collect();
        let replay = replay_reconstruct(k, mode, &history).unwrap();
        prop_assert!(close(live.arms(), &replay, 1e-9));
    }

    #[test]
    fn order_within_a_round_is_irrelevant(
        rewards in prop::collection::vec(reward_strategy(4), 1..12),
        gamma in 0.5f64..=1.0,
    ) {
        let mode = UpdateMode::Discount { gamma };
        let forward = run_live(4, mode, std::slice::from_ref(&rewards));
        let mut reversed = rewards.clone();
        reversed.reverse();
        let backward = run_live(4, mode, &[reversed]);
        prop_assert!(close(forward.arms(), backward.arms(), 1e-12));

        let split = rewards.len() / 2;
        let a = RewardBatch::new(rewards[..split].to_vec()).totals(4).unwrap();
        let b = RewardBatch::new(rewards[split..].to_vec()).totals(4).unwrap();
        let mut summed = a.clone();
        for c in 0..4 {
            summed.success[c] += b.success[c];
            summed.failure[c] += b.failure[c];
        }
        let mut via_totals = BanditState::new(4, mode);
        via_totals.apply(&summed);
        prop_assert!(close(forward.arms(), via_totals.arms(), 1e-12));
    }

    #[test]
    fn each_instance_adds_unit_mass(
        rewards in prop::collection::vec(reward_strategy(5), 0..20),
    ) {
        let state = run_live(5, UpdateMode::Discount { gamma: 1.0 }, std::slice::from_ref(&rewards));
        let mass: f64 = state.arms().iter().map(|a| a.s + a.f).sum();
        let prior_mass = 5.0 * 2.0 * PRIOR;
        prop_assert!((mass - prior_mass - rewards.len() as f64).abs() <= 1e-9);
        let successes: f64 = state.arms().iter().map(|a| a.s - PRIOR).sum();
        let relevant = rewards.iter().filter(|r| r.relevant).count() as f64;
        prop_assert!((successes - relevant).abs() <= 1e-9);
    }

    #[test]
    fn reward_free_rounds_decay_geometrically(gamma in 0.01f64..=1.0, t in 0usize..200) {
        let state = run_live(3, UpdateMode::Discount { gamma }, &vec![Vec::new(); t]);
        let expected = (0..t).fold(0.5, |acc, _| gamma * acc);
        for arm in state.arms() {
            prop_assert_eq!(arm.s, expected);
            prop_assert_eq!(arm.f, expected);
            prop_assert!((arm.mean() - 0.5).abs() <= 1e-12);
        }
    }

    #[test]
    fn unbounded_window_equals_no_forgetting(
        (k, rounds) in (1usize..6).prop_flat_map(|k| (Just(k), rounds_strategy(k, 40))),
    ) {
        let window = run_live(k, UpdateMode::Window { size: None }, &rounds);
        let discount = run_live(k, UpdateMode::Discount { gamma: 1.0 }, &rounds);
        prop_assert!(close(window.arms(), discount.arms(), 1e-12));
    }

    #[test]
    fn window_keeps_only_recent_rounds(w in 1usize..6, extra in 0usize..10) {
        let rounds: Vec<Vec<Reward>> = (0..w + extra)
            .map(|t| vec![Reward { id: format!("d{t}"), relevant: t % 2 == 0, membership: vec![(0, 1.0)] }])
            .collect();
        let state = run_live(1, UpdateMode::Window { size: Some(w) }, &rounds);
        prop_assert!(state.window_len() <= w);
        let kept = &rounds[rounds.len() - w.min(rounds.len())..];
        let s = PRIOR + kept.iter().filter(|r| r[0].relevant).count() as f64;
        let f = PRIOR + kept.iter().filter(|r| !r[0].relevant).count() as f64;
        prop_assert!((state.arms()[0].s - s).abs() <= 1e-12);
        prop_assert!((state.arms()[0].f - f).abs() <= 1e-12);
    }

    #[test]
    fn optimistic_draw_dominates_mean_and_raw_sample(
        s in 1e-3f64..50.0,
        f in 1e-3f64..50.0,
        seed in any::<u64>(),
    ) {
        let mut state = BanditState::new(1, UpdateMode::Discount { gamma: 1.0 });
        state.apply(&highrecall_core::RoundTotals { success: vec![s - PRIOR], failure: vec![f - PRIOR] });
        let mut rng = rng::stream(seed, rng::STREAM_SELECTION);
        for _ in 0..50 {
            let raw = state.sample_thetas(&mut rng);
            let opt = state.clamp_optimistic(&raw);
            prop_assert!(opt[0] >= state.arms()[0].mean());
            prop_assert!(opt[0] >= raw[0]);
            prop_assert!(opt[0] > 0.0 && opt[0] < 1.0 + 1e-15);
        }
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn sampler_agrees_with_reference_beta() {
    let n = 20_000;
    let mut ours = rng::stream(11, 0);
    let mut theirs = rng::stream(12, 0);
    for &(a, b) in &[(0.5, 0.5), (0.02, 0.3), (3.0, 1.0), (40.0, 7.5), (1.0, 1.0), (0.7, 12.0)] {
        let x: Vec<f64> = (0..n).map(|_| sample_beta(&mut ours, a, b)).collect();
        let reference = Beta::new(a, b).unwrap();
        let y: Vec<f64> = (0..n).map(|_| reference.sample(&mut theirs)).collect();
        let d = ks_statistic(x, y);
        // alpha = 0.001 critical value for two samples of equal size n
        let crit = 1.95 * (2.0 / n as f64).sqrt();
        assert!(d < crit, "Beta({a}, {b}): KS {d} >= {crit}");
    }
}

#[test]
fn raw_sample_means_within_three_standard_errors() {
    let draws = 100_000;
    let mut pick = rng::stream(5, 0);
    let mut rng = rng::stream(6, 0);
    for _ in 0..20 {
        let a: f64 = pick.random_range(0.05..30.0);
        let b: f64 = pick.random_range(0.05..30.0);
        let mean = a / (a + b);
        let var = a * b / ((a + b).powi(2) * (a + b + 1.0));
        let se = (var / draws as f64).sqrt();
        let got = (0..draws).map(|_| sample_beta(&mut rng, a, b)).sum::<f64>() / draws as f64;
        assert!((got - mean).abs() <= 3.0 * se, "Beta({a}, {b}): {got} vs {mean}");
    }
}

/// E[max(theta, 1/2)] for theta ~ Beta(1/2, 1/2), by midpoint quadrature in
/// the substitution theta = sin^2(phi), where the density becomes 2/pi.
fn optimistic_mean_by_quadrature() -> f64 {
    let steps = 200_000;
    let h = std::f64::consts::FRAC_PI_2 / steps as f64;
    (0..steps)
        .map(|i| {
            let phi = (i as f64 + 0.5) * h;
            phi.sin().powi(2).max(0.5) * 2.0 / std::f64::consts::PI * h
        })
        .sum()
}

#[test]
fn optimistic_mean_of_jeffreys_arm() {
    let derived = 0.5 + 1.0 / (2.0 * std::f64::consts::PI);
    assert!((optimistic_mean_by_quadrature() - derived).abs() < 1e-9);

    let draws = 100_000;
    let reference = Beta::new(0.5, 0.5).unwrap();
    let mut r = rng::stream(21, 0);
    let ref_mean = (0..draws)
        .map(|_| f64::max(reference.sample(&mut r), 0.5))
        .sum::<f64>()
        / draws as f64;
    assert!((ref_mean - derived).abs() < 0.005);

    let state = BanditState::new(1, UpdateMode::Discount { gamma: 0.95 });
    let mut rng = rng::stream(22, rng::STREAM_SELECTION);
    let ours = (0..draws)
        .map(|_| state.sample_optimistic(&mut rng)[0])
        .sum::<f64>()
        / draws as f64;
    assert!((ours - derived).abs() < 0.005, "{ours} vs {derived}");
}

#[test]
fn hand_evaluated_discount_update() {
    let mut state = BanditState::new(2, UpdateMode::Discount { gamma: 0.9 });
    state
        .update(&RewardBatch::new(vec![Reward {
            id: "a".into(),
            relevant: true,
            membership: vec![(0, 0.7), (1, 0.3)],
        }]))
        .unwrap();
    let arms = state.arms();
    assert!((arms[0].s - 1.15).abs() < 1e-12 && (arms[0].f - 0.45).abs() < 1e-12);
    assert!((arms[1].s - 0.75).abs() < 1e-12 && (arms[1].f - 0.45).abs() < 1e-12);
}

#[test]
fn tiny_shapes_stay_inside_unit_interval() {
    let mut rng = rng::stream(3, 0);
    for _ in 0..10_000 {
        let x = sample_beta(&mut rng, 1e-8, 1e-8);
        assert!((0.0..=1.0).contains(&x) && x.is_finite());
    }
}
