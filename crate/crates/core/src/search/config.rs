use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::bandit::UpdateMode;
use crate::classifier::{DEFAULT_EPOCHS, DEFAULT_L2_LAMBDA, DEFAULT_PSEUDO_NEGATIVES};
use crate::cluster::DEFAULT_TEMPERATURE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Optimistic Thompson sampling over cluster arms.
    Mab,
    /// Top scores of the current classifier (continuous active learning).
    Greedy,
    /// Uniform sampling from the pool.
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Mab => "mab",
            Strategy::Greedy => "greedy",
            Strategy::Random => "random",
        })
    }
}

impl FromStr for Strategy {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "mab" => Ok(Strategy::Mab),
            "greedy" => Ok(Strategy::Greedy),
            "random" => Ok(Strategy::Random),
            other => Err(SearchError::InvalidConfig(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Number of cluster arms.
    pub clusters: usize,
    pub temperature: f64,
    /// Imported membership file; `None` means the built-in clusterer.
    pub memberships: Option<String>,
    pub mode: UpdateMode,
    pub pseudo_negatives: usize,
    /// Review budget as a fraction of the collection, seeds included.
    pub budget: f64,
    pub initial_batch: usize,
    pub l2_lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub strategy: Strategy,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            clusters: 50,
            temperature: DEFAULT_TEMPERATURE,
            memberships: None,
            mode: UpdateMode::Discount { gamma: 0.95 },
            pseudo_negatives: DEFAULT_PSEUDO_NEGATIVES,
            budget: 0.40,
            initial_batch: 1,
            l2_lambda: DEFAULT_L2_LAMBDA,
            epochs: DEFAULT_EPOCHS,
            seed: 0,
            strategy: Strategy::Mab,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if !(self.budget > 0.0 && self.budget <= 1.0) {
            return Err(SearchError::InvalidConfig(format!(
                "budget must be in (0, 1], got {}",
                self.budget
            )));
        }
        if self.initial_batch == 0 {
            return Err(SearchError::InvalidConfig("initial batch must be >= 1".into()));
        }
        if !(self.l2_lambda > 0.0) {
            return Err(SearchError::InvalidConfig("l2_lambda must be positive".into()));
        }
        self.mode.validate()?;
        Ok(())
    }

    /// Number of reviews (seeds included) after which the search stops.
    pub fn budget_reviews(&self, n: usize) -> usize {
        (self.budget * n as f64 - 1e-9).ceil().max(0.0) as usize
    }

    /// Flat `key = value` lines, one per field.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("clusters", self.clusters.to_string());
        line("temperature", self.temperature.to_string());
        line(
            "memberships",
            self.memberships.clone().unwrap_or_else(|| "-".into()),
        );
        match self.mode {
            UpdateMode::Discount { gamma } => line("gamma", gamma.to_string()),
            UpdateMode::Window { size } => line(
                "window",
                size.map_or_else(|| "inf".to_string(), |w| w.to_string()),
            ),
        }
        line("pseudo_negatives", self.pseudo_negatives.to_string());
        line("budget", self.budget.to_string());
        line("initial_batch", self.initial_batch.to_string());
        line("l2_lambda", self.l2_lambda.to_string());
        line("epochs", self.epochs.to_string());
        line("seed", self.seed.to_string());
        line("strategy", self.strategy.to_string());
        out
    }

    /// Parses [`SearchConfig::to_kv`] output. Missing keys keep defaults;
    /// `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Self, SearchError> {
        let mut cfg = SearchConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SearchError::InvalidConfig(format!("line {}: expected `key = value`", n + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| {
                SearchError::InvalidConfig(format!("line {}: bad {what} `{value}`", n + 1))
            };
            match key {
                "clusters" => cfg.clusters = value.parse().map_err(|_| bad(key))?,
                "temperature" => cfg.temperature = value.parse().map_err(|_| bad(key))?,
                "memberships" => {
                    cfg.memberships = (value != "-").then(|| value.to_string());
                }
                "gamma" => {
                    cfg.mode = UpdateMode::Discount {
                        gamma: value.parse().map_err(|_| bad(key))?,
                    }
                }
                "window" => {
                    let size = match value {
                        "inf" => None,
                        v => Some(v.parse().map_err(|_| bad(key))?),
                    };
                    cfg.mode = UpdateMode::Window { size };
                }
                "pseudo_negatives" => {
                    cfg.pseudo_negatives = value.parse().map_err(|_| bad(key))?
                }
                "budget" => cfg.budget = value.parse().map_err(|_| bad(key))?,
                "initial_batch" => cfg.initial_batch = value.parse().map_err(|_| bad(key))?,
                "l2_lambda" => cfg.l2_lambda = value.parse().map_err(|_| bad(key))?,
                "epochs" => cfg.epochs = value.parse().map_err(|_| bad(key))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad(key))?,
                "strategy" => cfg.strategy = value.parse()?,
                other => {
                    return Err(SearchError::InvalidConfig(format!(
                        "line {}: unknown key `{other}`",
                        n + 1
                    )))
                }
            }
        }
        Ok(cfg)
    }
}

/// `B' = B + ceil(B / 40)`.
pub fn next_batch_size(b: usize) -> usize {
    b + b.div_ceil(40)
}
