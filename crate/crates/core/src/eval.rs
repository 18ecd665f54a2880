//! Stratum-weighted recall curves and effort-to-recall tables.
//!
//! Every document carries a stratum weight (the inverse of the rate at which
//! its stratum was assessed); recall is the weight of relevant documents found
//! over the weight of all relevant documents in the collection.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::search::{Strategy, Trajectory};

/// Recall targets reported by default.
pub const DEFAULT_TARGETS: [f64; 6] = [0.5, 0.85, 0.9, 0.95, 0.975, 0.99];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ground truth contains no relevant document")]
    NoRelevantInTruth,
    #[error("stratum weights must be positive")]
    NonPositiveWeight,
    #[error("runs disagree on {0}")]
    MixedConfigs(&'static str),
    #[error("no runs to aggregate")]
    NoRuns,
    #[error("recall target must be in (0, 1], got {0}")]
    InvalidTarget(f64),
}

/// Relevant documents of one topic and their stratum weights.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    relevant: HashMap<String, f64>,
    total_weight: f64,
    collection_size: usize,
}

impl GroundTruth {
    pub fn new(ids: &[String], labels: &[bool], weights: &[f64]) -> Result<Self, EvalError> {
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(EvalError::NonPositiveWeight);
        }
        let relevant: HashMap<String, f64> = ids
            .iter()
            .zip(labels)
            .zip(weights)
            .filter(|((_, &l), _)| l)
            .map(|((id, _), &w)| (id.clone(), w))
            .collect();
        if relevant.is_empty() {
            return Err(EvalError::NoRelevantInTruth);
        }
        // Summed in collection order so the total is reproducible.
        let total_weight = ids
            .iter()
            .zip(labels)
            .zip(weights)
            .filter(|((_, &l), _)| l)
            .map(|(_, &w)| w)
            .sum();
        Ok(Self {
            relevant,
            total_weight,
            collection_size: ids.len(),
        })
    }

    pub fn from_corpus(corpus: &Corpus, topic: &str) -> Result<Self, EvalError> {
        let ids: Vec<String> = corpus.docs().iter().map(|d| d.id.clone()).collect();
        Self::new(&ids, &corpus.labels_for(topic), &corpus.weights())
    }

    pub fn collection_size(&self) -> usize {
        self.collection_size
    }

    pub fn relevant_count(&self) -> usize {
        self.relevant.len()
    }

    pub fn weight(&self, id: &str) -> Option<f64> {
        self.relevant.get(id).copied()
    }
}

/// Weighted recall of a reviewed prefix. Repeated ids count once.
pub fn weighted_recall<'a>(prefix: impl IntoIterator<Item = &'a str>, truth: &GroundTruth) -> f64 {
    let mut seen = HashSet::new();
    let found: f64 = prefix
        .into_iter()
        .filter(|id| seen.insert(*id))
        .filter_map(|id| truth.weight(id))
        .sum();
    found / truth.total_weight
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallCurve {
    /// `(reviewed, recall)`, starting at `(0, 0.0)`, one point per review.
    pub points: Vec<(usize, f64)>,
    pub collection_size: usize,
}

impl RecallCurve {
    pub fn from_trajectory(trajectory: &Trajectory, truth: &GroundTruth) -> Self {
        let mut points = Vec::with_capacity(trajectory.len() + 1);
        points.push((0, 0.0));
        let mut seen = HashSet::new();
        let mut found = 0.0;
        for (n, (id, _)) in trajectory.reviews().enumerate() {
            if seen.insert(id) {
                if let Some(w) = truth.weight(id) {
                    found += w;
                }
            }
            points.push((n + 1, found / truth.total_weight));
        }
        Self {
            points,
            collection_size: truth.collection_size,
        }
    }

    pub fn final_recall(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.1)
    }

    /// `reviewed \t recall` per line.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (reviewed, recall) in &self.points {
            writeln!(out, "{reviewed}\t{recall}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Effort {
    /// Fraction of the collection reviewed when the target was first reached.
    Fraction(f64),
    /// Budget exhausted before the target was reached.
    Unreached,
}

impl Effort {
    pub fn fraction(&self) -> Option<f64> {
        match *self {
            Effort::Fraction(f) => Some(f),
            Effort::Unreached => None,
        }
    }

    /// `12.34%`, or `>40%` style when unreached.
    pub fn render(&self, budget: f64) -> String {
        match self {
            Effort::Fraction(f) => format!("{:.2}%", f * 100.0),
            Effort::Unreached => format!(">{}%", trim_number(budget * 100.0)),
        }
    }
}

fn trim_number(x: f64) -> String {
    let s = format!("{x:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Smallest reviewed count whose recall reaches `target`, over the
/// collection size.
pub fn effort_to_recall(curve: &RecallCurve, target: f64) -> Result<Effort, EvalError> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(EvalError::InvalidTarget(target));
    }
    Ok(curve
        .points
        .iter()
        .find(|&&(_, r)| r >= target)
        .map_or(Effort::Unreached, |&(n, _)| {
            Effort::Fraction(n as f64 / curve.collection_size as f64)
        }))
}

/// Efforts of one run at a fixed list of targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEfforts {
    pub topic: String,
    pub strategy: Strategy,
    pub targets: Vec<f64>,
    pub efforts: Vec<Effort>,
}

impl RunEfforts {
    pub fn from_curve(
        topic: &str,
        strategy: Strategy,
        curve: &RecallCurve,
        targets: &[f64],
    ) -> Result<Self, EvalError> {
        let efforts = targets
            .iter()
            .map(|&t| effort_to_recall(curve, t))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            topic: topic.to_string(),
            strategy,
            targets: targets.to_vec(),
            efforts,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub topic: String,
    pub strategy: Strategy,
    pub runs: usize,
    pub cells: Vec<Effort>,
}

/// Mean effort per target over runs; a cell is unreached as soon as one run
/// is (a censored value has no mean).
pub fn aggregate_runs(runs: &[RunEfforts]) -> Result<ReportRow, EvalError> {
    let first = runs.first().ok_or(EvalError::NoRuns)?;
    for r in runs {
        if r.topic != first.topic {
            return Err(EvalError::MixedConfigs("topic"));
        }
        if r.strategy != first.strategy {
            return Err(EvalError::MixedConfigs("strategy"));
        }
        if r.targets != first.targets || r.efforts.len() != first.targets.len() {
            return Err(EvalError::MixedConfigs("recall targets"));
        }
    }
    let cells = (0..first.targets.len())
        .map(|t| {
            let mut sum = 0.0;
            for r in runs {
                match r.efforts[t] {
                    Effort::Fraction(f) => sum += f,
                    Effort::Unreached => return Effort::Unreached,
                }
            }
            Effort::Fraction(sum / runs.len() as f64)
        })
        .collect();
    Ok(ReportRow {
        topic: first.topic.clone(),
        strategy: first.strategy,
        runs: runs.len(),
        cells,
    })
}

/// Topic x strategy x recall-target table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub targets: Vec<f64>,
    pub budget: f64,
    pub rows: Vec<ReportRow>,
}

impl EvaluationReport {
    pub fn row(&self, topic: &str, strategy: Strategy) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.topic == topic && r.strategy == strategy)
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "topic\tstrategy\truns")?;
        for t in &self.targets {
            write!(out, "\tR={t}")?;
        }
        writeln!(out)?;
        for row in &self.rows {
            write!(out, "{}\t{}\t{}", row.topic, row.strategy, row.runs)?;
            for cell in &row.cells {
                write!(out, "\t{}", cell.render(self.budget))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).map_err(|_| fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}
