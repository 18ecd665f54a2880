//! L2-regularised logistic regression, retrained from scratch every round on
//! the labelled set plus a fresh pseudo-negative sample from the pool.

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::corpus::SparseVector;

pub const DEFAULT_L2_LAMBDA: f64 = 1e-4;
pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_PSEUDO_NEGATIVES: usize = 100;
const GRADIENT_TOLERANCE: f64 = 1e-6;
const ARMIJO_C: f64 = 1e-4;
const MAX_STEP: f64 = 1e3;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training set has no positive example")]
    NoPositives,
    #[error("training set has no negative example")]
    NoNegatives,
    #[error("loss became non-finite at iteration {0}")]
    NonFiniteLoss(usize),
    #[error("l2 lambda must be positive, got {0}")]
    InvalidLambda(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Seed,
    Reviewed,
    PseudoNegative,
}

#[derive(Debug, Clone)]
pub struct Example {
    pub x: SparseVector,
    pub label: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    examples: Vec<Example>,
}

impl TrainingSet {
    pub fn new(examples: Vec<Example>) -> Self {
        Self { examples }
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.examples.iter().filter(|e| e.provenance == provenance).count()
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        if !self.examples.iter().any(|e| e.label) {
            return Err(ClassifierError::NoPositives);
        }
        if !self.examples.iter().any(|e| !e.label) {
            return Err(ClassifierError::NoNegatives);
        }
        Ok(())
    }
}

/// Labelled examples followed by up to `n_pseudo` pool rows drawn without
/// replacement and labelled negative. Pool rows keep their pool membership;
/// the negative label only lives in the returned set.
pub fn assemble_training_set<R: Rng + ?Sized>(
    labeled: &[Example],
    pool: &[&SparseVector],
    n_pseudo: usize,
    rng: &mut R,
) -> Result<TrainingSet, ClassifierError> {
    if !labeled.iter().any(|e| e.label) {
        return Err(ClassifierError::NoPositives);
    }
    let take = n_pseudo.min(pool.len());
    let mut picks = index::sample(rng, pool.len(), take).into_vec();
    picks.sort_unstable();
    let mut examples = labeled.to_vec();
    examples.extend(picks.into_iter().map(|i| Example {
        x: pool[i].clone(),
        label: false,
        provenance: Provenance::PseudoNegative,
    }));
    Ok(TrainingSet::new(examples))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2_lambda: f64,
}

impl LogRegModel {
    pub fn zeros(dim: usize, l2_lambda: f64) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
            l2_lambda,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn decision(&self, x: &SparseVector) -> f64 {
        x.dot_dense(&self.weights) + self.bias
    }

    /// `1 / (1 + exp(-(w.x + b)))`
    pub fn predict_one(&self, x: &SparseVector) -> f64 {
        sigmoid(self.decision(x))
    }

    pub fn predict(&self, rows: &[&SparseVector]) -> Vec<f64> {
        rows.iter().map(|x| self.predict_one(x)).collect()
    }

    /// Debug dump: dimension, bias, then one weight per line.
    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "dim\t{}", self.dim())?;
        writeln!(out, "bias\t{}", self.bias)?;
        for w in &self.weights {
            writeln!(out, "{w}")?;
        }
        Ok(())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss plus `lambda / 2 * |w|^2` (bias unregularised).
pub fn objective(model: &LogRegModel, ts: &TrainingSet) -> f64 {
    let m = ts.len() as f64;
    let data: f64 = ts
        .examples()
        .iter()
        .map(|e| {
            let z = model.decision(&e.x);
            softplus(z) - if e.label { z } else { 0.0 }
        })
        .sum();
    let reg: f64 = model.weights.iter().map(|w| w * w).sum();
    data / m + 0.5 * model.l2_lambda * reg
}

/// Gradient of [`objective`]: `(grad_w, grad_b)`.
pub fn gradient(model: &LogRegModel, ts: &TrainingSet) -> (Vec<f64>, f64) {
    let m = ts.len() as f64;
    let mut gw: Vec<f64> = model.weights.iter().map(|w| model.l2_lambda * w).collect();
    let mut gb = 0.0;
    for e in ts.examples() {
        let residual = (sigmoid(model.decision(&e.x)) - if e.label { 1.0 } else { 0.0 }) / m;
        for (j, v) in e.x.iter() {
            gw[j] += residual * v;
        }
        gb += residual;
    }
    (gw, gb)
}

/// Upper bound of the objective's Hessian diagonal: the logistic curvature
/// never exceeds 1/4.
fn curvature_bounds(ts: &TrainingSet, dim: usize, l2_lambda: f64) -> (Vec<f64>, f64) {
    let m = ts.len() as f64;
    let mut h = vec![0.0; dim];
    for e in ts.examples() {
        for (j, v) in e.x.iter() {
            h[j] += 0.25 * v * v / m;
        }
    }
    h.iter_mut().for_each(|v| *v += l2_lambda);
    (h, 0.25)
}

/// Full-batch gradient descent from zero, with the gradient scaled by the
/// inverse curvature bound and an Armijo backtracking line search. Stops when
/// the gradient's infinity norm drops below 1e-6 or after `epochs` iterations.
pub fn train(
    ts: &TrainingSet,
    dim: usize,
    l2_lambda: f64,
    epochs: usize,
) -> Result<LogRegModel, ClassifierError> {
    if !(l2_lambda > 0.0 && l2_lambda.is_finite()) {
        return Err(ClassifierError::InvalidLambda(l2_lambda));
    }
    ts.validate()?;
    let (hw, hb) = curvature_bounds(ts, dim, l2_lambda);
    let mut model = LogRegModel::zeros(dim, l2_lambda);
    let mut loss = objective(&model, ts);
    let mut step: f64 = 1.0;
    for epoch in 0..epochs {
        let (gw, gb) = gradient(&model, ts);
        let inf_norm = gw.iter().fold(gb.abs(), |acc, g| acc.max(g.abs()));
        if inf_norm < GRADIENT_TOLERANCE {
            break;
        }
        let dw: Vec<f64> = gw.iter().zip(&hw).map(|(g, h)| g / h).collect();
        let db = gb / hb;
        let slope: f64 = gw.iter().zip(&dw).map(|(g, d)| g * d).sum::<f64>() + gb * db;
        step = (step * 2.0).min(MAX_STEP);
        loop {
            let candidate = LogRegModel {
                weights: model
                    .weights
                    .iter()
                    .zip(&dw)
                    .map(|(w, d)| w - step * d)
                    .collect(),
                bias: model.bias - step * db,
                l2_lambda,
            };
            let next = objective(&candidate, ts);
            if !next.is_finite() {
                return Err(ClassifierError::NonFiniteLoss(epoch));
            }
            if next <= loss - ARMIJO_C * step * slope {
                model = candidate;
                loss = next;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                return Ok(model);
            }
        }
    }
    Ok(model)
}
