//! Non-stationary multiple-play Thompson sampling over cluster arms.
//!
//! Each arm holds a Beta(S, F) posterior starting from Jeffreys' prior
//! (0.5, 0.5). A labelled instance splits its reward over arms by its
//! membership row. Posteriors either forget geometrically,
//!
//! ```text
//! S_k <- gamma * S_k + sum_i r_i * mu_ik
//! F_k <- gamma * F_k + sum_i (1 - r_i) * mu_ik
//! ```
//!
//! once per labelled batch, or keep only the last `W` rounds on top of the
//! (never forgotten) prior.

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PRIOR: f64 = 0.5;

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("membership row has {got} columns, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("history jumps from round {expected} to round {got}")]
    HistoryGap { expected: usize, got: usize },
    #[error("invalid update mode: {0}")]
    InvalidMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmPosterior {
    pub s: f64,
    pub f: f64,
}

impl ArmPosterior {
    pub const PRIOR: ArmPosterior = ArmPosterior { s: PRIOR, f: PRIOR };

    pub fn mean(&self) -> f64 {
        self.s / (self.s + self.f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Geometric forgetting with factor `gamma` in (0, 1].
    Discount { gamma: f64 },
    /// Sliding window over the last `size` rounds; `None` keeps every round.
    Window { size: Option<usize> },
}

impl UpdateMode {
    pub fn validate(&self) -> Result<(), BanditError> {
        match *self {
            UpdateMode::Discount { gamma } if !(gamma > 0.0 && gamma <= 1.0) => Err(
                BanditError::InvalidMode(format!("gamma must be in (0, 1], got {gamma}")),
            ),
            UpdateMode::Window { size: Some(0) } => {
                Err(BanditError::InvalidMode("window size must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Per-arm weighted success and failure mass collected in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTotals {
    pub success: Vec<f64>,
    pub failure: Vec<f64>,
}

impl RoundTotals {
    pub fn zeros(k: usize) -> Self {
        Self {
            success: vec![0.0; k],
            failure: vec![0.0; k],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reward {
    pub id: String,
    pub relevant: bool,
    /// Sparse membership row `(cluster, mu)`.
    pub membership: Vec<(u32, f64)>,
}

/// The labelled instances of one round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewardBatch {
    pub rewards: Vec<Reward>,
}

impl RewardBatch {
    pub fn new(rewards: Vec<Reward>) -> Self {
        Self { rewards }
    }

    pub fn totals(&self, k: usize) -> Result<RoundTotals, BanditError> {
        let mut totals = RoundTotals::zeros(k);
        for reward in &self.rewards {
            for &(c, mu) in &reward.membership {
                let c = c as usize;
                if c >= k {
                    return Err(BanditError::DimensionMismatch {
                        expected: k,
                        got: c + 1,
                    });
                }
                if reward.relevant {
                    totals.success[c] += mu;
                } else {
                    totals.failure[c] += mu;
                }
            }
        }
        Ok(totals)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    arms: Vec<ArmPosterior>,
    mode: UpdateMode,
    window: VecDeque<RoundTotals>,
    round: usize,
}

impl BanditState {
    /// Every arm starts at Jeffreys' prior (0.5, 0.5).
    pub fn new(k: usize, mode: UpdateMode) -> Self {
        assert!(k >= 1, "need at least one arm");
        Self {
            arms: vec![ArmPosterior::PRIOR; k],
            mode,
            window: VecDeque::new(),
            round: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn arms(&self) -> &[ArmPosterior] {
        &self.arms
    }

    pub fn mode(&self) -> UpdateMode {
        self.mode
    }

    /// Number of updates applied so far.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// One round of posterior updates. An empty batch still decays.
    pub fn update(&mut self, batch: &RewardBatch) -> Result<RoundTotals, BanditError> {
        let totals = batch.totals(self.k())?;
        self.apply(&totals);
        Ok(totals)
    }

    pub fn apply(&mut self, totals: &RoundTotals) {
        match self.mode {
            UpdateMode::Discount { gamma } => {
                for (k, arm) in self.arms.iter_mut().enumerate() {
                    arm.s = gamma * arm.s + totals.success[k];
                    arm.f = gamma * arm.f + totals.failure[k];
                }
            }
            UpdateMode::Window { size } => {
                self.window.push_back(totals.clone());
                if let Some(w) = size {
                    while self.window.len() > w {
                        self.window.pop_front();
                    }
                }
                for (k, arm) in self.arms.iter_mut().enumerate() {
                    arm.s = self.window.iter().fold(PRIOR, |acc, r| acc + r.success[k]);
                    arm.f = self.window.iter().fold(PRIOR, |acc, r| acc + r.failure[k]);
                }
            }
        }
        self.round += 1;
    }

    /// Independent `theta_k ~ Beta(S_k, F_k)`, drawn in arm order.
    pub fn sample_thetas<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.arms
            .iter()
            .map(|arm| sample_beta(rng, arm.s, arm.f))
            .collect()
    }

    /// Optimistic samples `theta*_k = max(theta_k, S_k / (S_k + F_k))`.
    pub fn sample_optimistic<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let raw = self.sample_thetas(rng);
        self.clamp_optimistic(&raw)
    }

    pub fn clamp_optimistic(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.arms)
            .map(|(&theta, arm)| theta.max(arm.mean()))
            .collect()
    }

    /// Writes `round \t cluster \t S \t F` rows for the current posteriors.
    pub fn write_snapshot<W: Write>(&self, round: usize, mut out: W) -> std::io::Result<()> {
        for (k, arm) in self.arms.iter().enumerate() {
            writeln!(out, "{round}\t{k}\t{}\t{}", arm.s, arm.f)?;
        }
        Ok(())
    }
}

/// One recorded round for replay.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub batch: RewardBatch,
}

/// Recomputes the posteriors from the prior by folding every recorded round
/// from scratch, directly from the raw rewards.
pub fn replay_reconstruct(
    k: usize,
    mode: UpdateMode,
    history: &[RoundRecord],
) -> Result<Vec<ArmPosterior>, BanditError> {
    for (expected, record) in history.iter().enumerate() {
        if record.round != expected {
            return Err(BanditError::HistoryGap {
                expected,
                got: record.round,
            });
        }
    }
    let first_kept = match mode {
        UpdateMode::Window { size: Some(w) } => history.len().saturating_sub(w),
        _ => 0,
    };
    let mut arms = vec![ArmPosterior::PRIOR; k];
    for (t, record) in history.iter().enumerate() {
        let mut success = vec![0.0; k];
        let mut failure = vec![0.0; k];
        for reward in &record.batch.rewards {
            for &(c, mu) in &reward.membership {
                let c = c as usize;
                if c >= k {
                    return Err(BanditError::DimensionMismatch {
                        expected: k,
                        got: c + 1,
                    });
                }
                if reward.relevant {
                    success[c] += mu;
                } else {
                    failure[c] += mu;
                }
            }
        }
        match mode {
            UpdateMode::Discount { gamma } => {
                for c in 0..k {
                    arms[c].s = gamma * arms[c].s + success[c];
                    arms[c].f = gamma * arms[c].f + failure[c];
                }
            }
            UpdateMode::Window { .. } if t >= first_kept => {
                for c in 0..k {
                    arms[c].s += success[c];
                    arms[c].f += failure[c];
                }
            }
            UpdateMode::Window { .. } => {}
        }
    }
    Ok(arms)
}

/// Draws from Beta(a, b) as `X / (X + Y)` with `X ~ Gamma(a)`, `Y ~ Gamma(b)`.
///
/// Gamma variates come from Marsaglia-Tsang, boosted by `U^(1/a)` for shapes
/// below one; everything is kept in log space so that the tiny shapes reached
/// after many discounted rounds do not underflow to 0/0. Each call consumes
/// the gamma draw for `a` first, then for `b`.
pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let log_x = log_gamma_variate(rng, a);
    let log_y = log_gamma_variate(rng, b);
    // x / (x + y) = 1 / (1 + exp(log_y - log_x))
    let d = log_y - log_x;
    if d > 0.0 {
        let e = (-d).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + d.exp())
    }
}

fn log_gamma_variate<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape < 1.0 {
        let boost = open_unit(rng).ln() / shape;
        return log_gamma_variate(rng, shape + 1.0) + boost;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open_unit(rng);
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return d.ln() + v.ln();
        }
    }
}

/// Uniform on (0, 1].
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Box-Muller, cosine branch only.
fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1 = open_unit(rng);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
