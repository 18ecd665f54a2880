//! Soft cluster memberships: the arms of the bandit.
//!
//! The built-in clusterer is spherical k-means (cosine similarity) with a
//! deterministic farthest-point initialisation, followed by a softmax over
//! centroid similarities. Memberships computed elsewhere (e.g. LDA topic
//! proportions) can be imported from a triplet file instead.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::Rng;
use thiserror::Error;

use crate::corpus::{CorpusMatrix, SparseVector};
use crate::rng;

pub const DEFAULT_TEMPERATURE: f64 = 0.1;
/// Memberships below this value are dropped before row renormalisation.
pub const DEFAULT_DROP_THRESHOLD: f64 = 1e-4;
pub const MAX_KMEANS_ITERATIONS: usize = 100;
const ROW_SUM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cluster count {k} must satisfy 2 <= K <= n ({n})")]
    InvalidK { k: usize, n: usize },
    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),
    #[error("cluster {cluster} captured no documents after repair")]
    DegenerateClustering { cluster: usize },
    #[error("malformed membership file at line {line}: {reason}")]
    MalformedMembership { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-stochastic soft memberships, stored sparsely per row.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    k: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl MembershipMatrix {
    /// Builds from dense rows: drops entries below `drop_below`, then
    /// renormalises each row. Rows must be nonnegative with positive sum.
    pub fn from_dense_rows(rows: &[Vec<f64>], drop_below: f64) -> Self {
        let k = rows.first().map_or(0, Vec::len);
        let rows = rows
            .iter()
            .map(|row| {
                assert_eq!(row.len(), k, "ragged membership rows");
                let max = row.iter().copied().fold(0.0, f64::max);
                let kept: Vec<(u32, f64)> = row
                    .iter()
                    .enumerate()
                    .filter(|&(_, &mu)| mu >= drop_below || mu == max)
                    .filter(|&(_, &mu)| mu > 0.0)
                    .map(|(c, &mu)| (c as u32, mu))
                    .collect();
                normalized(kept)
            })
            .collect();
        Self { k, rows }
    }

    /// Sparse rows as `(cluster, mu)` pairs; each row is renormalised.
    pub fn from_sparse_rows(k: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let rows = rows.into_iter().map(normalized).collect();
        Self { k, rows }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for &(c, mu) in &self.rows[i] {
            out[c as usize] = mu;
        }
        out
    }

    /// `sum_k mu_ik * theta_k`.
    pub fn weighted_sum(&self, i: usize, theta: &[f64]) -> f64 {
        self.rows[i]
            .iter()
            .map(|&(c, mu)| mu * theta[c as usize])
            .sum()
    }

    pub fn argmax(&self, i: usize) -> usize {
        let mut best = (0u32, f64::NEG_INFINITY);
        for &(c, mu) in &self.rows[i] {
            if mu > best.1 {
                best = (c, mu);
            }
        }
        best.0 as usize
    }

    /// Writes `doc_id \t cluster \t mu`, one triplet per line.
    pub fn write_triplets<W: Write>(&self, ids: &[String], mut out: W) -> std::io::Result<()> {
        for (id, row) in ids.iter().zip(&self.rows) {
            for &(c, mu) in row {
                writeln!(out, "{id}\t{c}\t{mu}")?;
            }
        }
        Ok(())
    }
}

fn normalized(mut row: Vec<(u32, f64)>) -> Vec<(u32, f64)> {
    row.sort_by_key(|&(c, _)| c);
    let sum: f64 = row.iter().map(|&(_, mu)| mu).sum();
    for (_, mu) in &mut row {
        *mu /= sum;
    }
    row
}

/// Reads a membership triplet file. `ids` gives the row order; every id must
/// receive at least one membership, and rows must sum to 1 within 1e-3.
pub fn import_memberships<R: BufRead>(
    reader: R,
    ids: &[String],
) -> Result<MembershipMatrix, ClusterError> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); ids.len()];
    let mut first_line: Vec<usize> = vec![0; ids.len()];
    let mut k = 0usize;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| ClusterError::MalformedMembership {
            line: line_no,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated fields, got {}", fields.len())));
        }
        let row = *index
            .get(fields[0])
            .ok_or_else(|| bad(format!("unknown document id `{}`", fields[0])))?;
        let cluster: u32 = fields[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad cluster index `{}`", fields[1])))?;
        let mu: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad membership value `{}`", fields[2])))?;
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(bad(format!("membership must be nonnegative, got {mu}")));
        }
        if rows[row].iter().any(|&(c, _)| c == cluster) {
            return Err(bad(format!("duplicate cluster {cluster} for `{}`", fields[0])));
        }
        if first_line[row] == 0 {
            first_line[row] = line_no;
        }
        k = k.max(cluster as usize + 1);
        if mu > 0.0 {
            rows[row].push((cluster, mu));
        }
    }
    for (row, entries) in rows.iter().enumerate() {
        let sum: f64 = entries.iter().map(|&(_, mu)| mu).sum();
        if first_line[row] == 0 {
            return Err(ClusterError::MalformedMembership {
                line: 0,
                reason: format!("document `{}` has no memberships", ids[row]),
            });
        }
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE + 1e-12 {
            return Err(ClusterError::MalformedMembership {
                line: first_line[row],
                reason: format!("memberships of `{}` sum to {sum}", ids[row]),
            });
        }
    }
    Ok(MembershipMatrix::from_sparse_rows(k, rows))
}

/// Spherical k-means followed by a softmax over `cos(x_i, c_k) / temperature`.
pub fn soft_cluster(
    matrix: &CorpusMatrix,
    k: usize,
    temperature: f64,
    seed: u64,
) -> Result<MembershipMatrix, ClusterError> {
    let n = matrix.len();
    if k < 2 || k > n {
        return Err(ClusterError::InvalidK { k, n });
    }
    let centroids = farthest_point_init(matrix.rows(), matrix.n_features(), k, seed);
    soft_cluster_from_centroids(matrix.rows(), centroids, temperature)
}

/// Same as [`soft_cluster`] but starting from the given dense centroids.
pub fn soft_cluster_from_centroids(
    rows: &[SparseVector],
    mut centroids: Vec<Vec<f64>>,
    temperature: f64,
) -> Result<MembershipMatrix, ClusterError> {
    if !(temperature > 0.0) {
        return Err(ClusterError::InvalidTemperature(temperature));
    }
    let k = centroids.len();
    let dim = centroids.first().map_or(0, Vec::len);
    let mut assignment: Vec<Option<usize>> = vec![None; rows.len()];
    for _ in 0..MAX_KMEANS_ITERATIONS {
        let next: Vec<Option<usize>> = rows.iter().map(|r| nearest(r, &centroids)).collect();
        let changed = next != assignment;
        assignment = next;
        repair_empty(rows, &centroids, &mut assignment, k)?;
        centroids = recompute_centroids(rows, &assignment, k, dim);
        if !changed {
            break;
        }
    }

    let dense: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let sims: Vec<f64> = centroids.iter().map(|c| r.dot_dense(c) / temperature).collect();
            softmax(&sims)
        })
        .collect();
    Ok(MembershipMatrix::from_dense_rows(&dense, DEFAULT_DROP_THRESHOLD))
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn farthest_point_init(rows: &[SparseVector], dim: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let candidates: Vec<usize> = {
        let nonzero: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i].is_zero()).collect();
        if nonzero.len() >= k {
            nonzero
        } else {
            (0..rows.len()).collect()
        }
    };
    let mut rng = rng::stream(seed, rng::STREAM_SEEDS);
    let first = candidates[rng.random_range(0..candidates.len())];
    let mut chosen = vec![first];
    // Largest similarity to any chosen centre so far.
    let mut closest: Vec<f64> = rows.iter().map(|r| r.dot(&rows[first])).collect();
    while chosen.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for &i in &candidates {
            if chosen.contains(&i) {
                continue;
            }
            let dist = 1.0 - closest[i];
            if best.is_none_or(|(_, d)| dist > d) {
                best = Some((i, dist));
            }
        }
        let (pick, _) = best.expect("k <= n leaves a candidate");
        chosen.push(pick);
        for (i, r) in rows.iter().enumerate() {
            closest[i] = closest[i].max(r.dot(&rows[pick]));
        }
    }
    chosen
        .into_iter()
        .map(|i| {
            let mut c = vec![0.0; dim];
            for (j, v) in rows[i].iter() {
                c[j] = v;
            }
            c
        })
        .collect()
}

/// Highest-cosine centroid, ties to the smallest index. Zero rows are not
/// assigned.
fn nearest(row: &SparseVector, centroids: &[Vec<f64>]) -> Option<usize> {
    if row.is_zero() {
        return None;
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let sim = row.dot_dense(centroid);
        if sim > best.1 {
            best = (c, sim);
        }
    }
    Some(best.0)
}

/// Gives every empty cluster the worst-fitting member of a cluster that has
/// at least two members.
fn repair_empty(
    rows: &[SparseVector],
    centroids: &[Vec<f64>],
    assignment: &mut [Option<usize>],
    k: usize,
) -> Result<(), ClusterError> {
    let mut counts = vec![0usize; k];
    for c in assignment.iter().flatten() {
        counts[*c] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut worst: Option<(usize, f64)> = None;
        for (i, a) in assignment.iter().enumerate() {
            let Some(c) = *a else { continue };
            if counts[c] < 2 {
                continue;
            }
            let sim = rows[i].dot_dense(&centroids[c]);
            if worst.is_none_or(|(_, s)| sim < s) {
                worst = Some((i, sim));
            }
        }
        let (i, _) = worst.ok_or(ClusterError::DegenerateClustering { cluster: empty })?;
        counts[assignment[i].unwrap()] -= 1;
        assignment[i] = Some(empty);
        counts[empty] = 1;
    }
    Ok(())
}

fn recompute_centroids(
    rows: &[SparseVector],
    assignment: &[Option<usize>],
    k: usize,
    dim: usize,
) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    for (row, a) in rows.iter().zip(assignment) {
        if let Some(c) = *a {
            for (j, v) in row.iter() {
                sums[c][j] += v;
            }
        }
    }
    for s in &mut sums {
        let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            s.iter_mut().for_each(|v| *v /= norm);
        }
    }
    sums
}
