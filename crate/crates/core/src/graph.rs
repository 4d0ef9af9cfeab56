// SPDX-License-Identifier: Apache-2.0

//! Directed graphs, left-stochastic combination matrices and Perron centrality.
//!
//! Entry `(l, k)` of a [`CombinationMatrix`] is the weight agent `k` assigns to
//! information received from agent `l`, so every column sums to one. The
//! adjacency of a [`DirectedGraph`] follows the same orientation: `(l, k)` is
//! true when `l` sends to `k`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resampling budget for graph generators.
pub const MAX_GRAPH_ATTEMPTS: usize = 1000;
/// Column-sum tolerance for left-stochastic matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;
pub const PERRON_TOL: f64 = 1e-12;
pub const PERRON_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    adjacency: Vec<bool>,
}

impl DirectedGraph {
    /// Builds a graph from a row-major `n * n` adjacency. Self-loops are forced on.
    pub fn from_adjacency(n: usize, mut adjacency: Vec<bool>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "graph needs at least one agent".into(),
            ));
        }
        if adjacency.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "adjacency has {} entries, expected {}",
                adjacency.len(),
                n * n
            )));
        }
        for k in 0..n {
            adjacency[k * n + k] = true;
        }
        Ok(Self { n, adjacency })
    }

    /// Graph on `n` nodes with the listed directed edges `(from, to)` plus self-loops.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![false; n * n];
        for &(from, to) in edges {
            if from >= n || to >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({from}, {to}) out of range for {n} nodes"
                )));
            }
            adjacency[from * n + to] = true;
        }
        Self::from_adjacency(n, adjacency)
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::from_adjacency(n, vec![true; n * n])
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.adjacency[from * self.n + to]
    }

    /// Number of off-diagonal edges.
    pub fn edge_count(&self) -> usize {
        (0..self.n)
            .flat_map(|l| (0..self.n).map(move |k| (l, k)))
            .filter(|&(l, k)| l != k && self.has_edge(l, k))
            .count()
    }

    /// In-neighbours of `k`, including `k` itself.
    pub fn in_neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&l| self.has_edge(l, k))
    }

    pub fn adjacency(&self) -> &[bool] {
        &self.adjacency
    }

    /// Row-major list of off-diagonal entries that differ between two graphs.
    pub fn differing_edges(&self, other: &DirectedGraph) -> Vec<(usize, usize)> {
        assert_eq!(self.n, other.n);
        let n = self.n;
        (0..n)
            .flat_map(|l| (0..n).map(move |k| (l, k)))
            .filter(|&(l, k)| l != k && self.has_edge(l, k) != other.has_edge(l, k))
            .collect()
    }
}

/// Erdos-Renyi digraph with self-loops on every node, resampled until strongly connected.
///
/// Draw order: one `ChaCha8Rng` seeded with `seed`; each attempt visits `(l, k)`
/// in row-major order, skipping the diagonal, and keeps the edge when a uniform
/// `f64` draw is below `p`.
pub fn generate_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<DirectedGraph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "edge probability {p} not in (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_GRAPH_ATTEMPTS {
        let mut adjacency = vec![false; n * n];
        for l in 0..n {
            for k in 0..n {
                if l != k {
                    adjacency[l * n + k] = rng.random::<f64>() < p;
                }
            }
        }
        let g = DirectedGraph::from_adjacency(n, adjacency)?;
        if is_strongly_connected(&g) {
            return Ok(g);
        }
    }
    Err(Error::ConnectivityExhausted {
        n,
        p,
        attempts: MAX_GRAPH_ATTEMPTS,
    })
}

fn reaches_all(g: &DirectedGraph, forward: bool) -> bool {
    let n = g.n_agents();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for w in 0..n {
            let edge = if forward {
                g.has_edge(v, w)
            } else {
                g.has_edge(w, v)
            };
            if edge && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// True iff node 0 reaches every node and every node reaches node 0.
pub fn is_strongly_connected(g: &DirectedGraph) -> bool {
    reaches_all(g, true) && reaches_all(g, false)
}

/// Toggles every off-diagonal adjacency entry independently with probability
/// `flip_prob`, resampling until the result is strongly connected.
///
/// Draw order matches [`generate_erdos_renyi`]: row-major, diagonal skipped,
/// toggle when a uniform draw is below `flip_prob`.
pub fn perturb_topology(g: &DirectedGraph, flip_prob: f64, seed: u64) -> Result<DirectedGraph> {
    if !(0.0..1.0).contains(&flip_prob) {
        return Err(Error::InvalidParameter(format!(
            "flip probability {flip_prob} not in [0, 1)"
        )));
    }
    let n = g.n_agents();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_GRAPH_ATTEMPTS {
        let mut adjacency = g.adjacency().to_vec();
        for l in 0..n {
            for k in 0..n {
                if l != k && rng.random::<f64>() < flip_prob {
                    adjacency[l * n + k] = !adjacency[l * n + k];
                }
            }
        }
        let candidate = DirectedGraph::from_adjacency(n, adjacency)?;
        if is_strongly_connected(&candidate) {
            return Ok(candidate);
        }
    }
    Err(Error::ConnectivityExhausted {
        n,
        p: flip_prob,
        attempts: MAX_GRAPH_ATTEMPTS,
    })
}

/// Nonnegative N×N matrix whose columns sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix {
    weights: DMatrix<f64>,
}

impl CombinationMatrix {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "combination matrix is {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "combination weights must be finite and nonnegative".into(),
            ));
        }
        for (k, col) in weights.column_iter().enumerate() {
            let s = col.sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidParameter(format!("column {k} sums to {s}")));
            }
        }
        Ok(Self { weights })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            weights: DMatrix::identity(n, n),
        }
    }

    pub fn n_agents(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.weights
    }

    /// Graph given by the positive entries.
    pub fn support(&self) -> DirectedGraph {
        let n = self.n_agents();
        let adjacency = (0..n)
            .flat_map(|l| (0..n).map(move |k| (l, k)))
            .map(|(l, k)| self.weights[(l, k)] > 0.0)
            .collect();
        DirectedGraph::from_adjacency(n, adjacency).expect("square support")
    }
}

/// Averaging rule: column `k` puts `1 / |N_k|` on each in-neighbour of `k`.
pub fn uniform_combination_matrix(g: &DirectedGraph) -> CombinationMatrix {
    let n = g.n_agents();
    let mut w = DMatrix::zeros(n, n);
    for k in 0..n {
        let degree = g.in_neighbors(k).count() as f64;
        for l in g.in_neighbors(k) {
            w[(l, k)] = 1.0 / degree;
        }
    }
    CombinationMatrix { weights: w }
}

/// Clips negatives to zero and rescales each column to sum one. A column with
/// no positive mass becomes the unit self-weight column.
pub fn normalize_learned_matrix(raw: &DMatrix<f64>) -> CombinationMatrix {
    let n = raw.nrows();
    let mut w = raw.map(|x| if x > 0.0 && x.is_finite() { x } else { 0.0 });
    for k in 0..n {
        let s: f64 = w.column(k).sum();
        if s > 0.0 {
            w.column_mut(k).unscale_mut(s);
        } else {
            w.column_mut(k).fill(0.0);
            w[(k, k)] = 1.0;
        }
    }
    CombinationMatrix { weights: w }
}

/// Positive, sum-one right eigenvector of `A` at eigenvalue one.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronVector(DVector<f64>);

impl PerronVector {
    pub fn entries(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    /// Builds a Perron vector from explicit entries, renormalized to sum one.
    pub fn from_entries(entries: Vec<f64>) -> Result<Self> {
        let s: f64 = entries.iter().sum();
        if entries.is_empty() || entries.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidParameter(
                "Perron entries must be strictly positive".into(),
            ));
        }
        Ok(Self(DVector::from_vec(entries) / s))
    }
}

impl std::ops::Index<usize> for PerronVector {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// Power iteration from the uniform vector until `‖Au − u‖₁ ≤ tol`.
pub fn perron_vector(a: &CombinationMatrix, tol: f64, max_iter: usize) -> Result<PerronVector> {
    let n = a.n_agents();
    let w = a.weights();
    let mut u = DVector::from_element(n, 1.0 / n as f64);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = w * &u;
        residual = (&next - &u).lp_norm(1);
        if residual <= tol {
            break;
        }
        let s = next.sum();
        u = next / s;
    }
    if residual > tol {
        return Err(Error::NotConverged {
            iterations: max_iter,
            residual,
        });
    }
    PerronVector::from_entries(u.iter().copied().collect()).map_err(|_| Error::NotConverged {
        iterations: max_iter,
        residual,
    })
}

/// Perron vector with the default tolerance and iteration budget.
pub fn centrality(a: &CombinationMatrix) -> Result<PerronVector> {
    perron_vector(a, PERRON_TOL, PERRON_MAX_ITER)
}

/// On-disk shape: `{"n": int, "weights": row-major array of n*n reals}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub n: usize,
    pub weights: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let weights = (0..n)
            .flat_map(|l| (0..n).map(move |k| (l, k)))
            .map(|(l, k)| m[(l, k)])
            .collect();
        Self { n, weights }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.weights.len() != self.n * self.n {
            return Err(Error::DimensionMismatch(format!(
                "weights has {} entries, expected {}",
                self.weights.len(),
                self.n * self.n
            )));
        }
        Ok(DMatrix::from_row_slice(self.n, self.n, &self.weights))
    }
}

impl From<&CombinationMatrix> for MatrixJson {
    fn from(a: &CombinationMatrix) -> Self {
        MatrixJson::from_matrix(a.weights())
    }
}

impl TryFrom<MatrixJson> for CombinationMatrix {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        CombinationMatrix::new(j.to_matrix()?)
    }
}

impl From<&DirectedGraph> for MatrixJson {
    fn from(g: &DirectedGraph) -> Self {
        MatrixJson {
            n: g.n_agents(),
            weights: g
                .adjacency()
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

impl TryFrom<MatrixJson> for DirectedGraph {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        if j.weights.len() != j.n * j.n {
            return Err(Error::DimensionMismatch(format!(
                "adjacency has {} entries",
                j.weights.len()
            )));
        }
        DirectedGraph::from_adjacency(j.n, j.weights.iter().map(|&x| x != 0.0).collect())
    }
}

impl Serialize for CombinationMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for CombinationMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        CombinationMatrix::try_from(j).map_err(serde::de::Error::custom)
    }
}

impl Serialize for DirectedGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DirectedGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        DirectedGraph::try_from(j).map_err(serde::de::Error::custom)
    }
}
