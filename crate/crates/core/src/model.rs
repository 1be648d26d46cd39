//! Domain types, the link function, and the exact dyad likelihood.

use serde::{Deserialize, Serialize};

use crate::error::{CalfError, Result};
use crate::matrix::DenseMatrix;

/// Logits are clamped to `[-LOGIT_BOUND, LOGIT_BOUND]` before use, which keeps
/// every dyad probability inside `(1e-16, 1 - 1e-16)`.
pub const LOGIT_BOUND: f64 = 35.0;

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn inv_logit(x: f64) -> f64 {
    let x = x.clamp(-LOGIT_BOUND, LOGIT_BOUND);
    1.0 / (1.0 + (-x).exp())
}

/// Bernoulli log-mass of one dyad given its (unclamped) logit.
#[inline]
pub fn dyad_log_lik(edge: bool, logit: f64) -> f64 {
    let x = logit.clamp(-LOGIT_BOUND, LOGIT_BOUND);
    if edge {
        -softplus(-x)
    } else {
        -softplus(x)
    }
}

/// Symmetric binary adjacency without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    n: usize,
    adjacency: Vec<u8>,
    degrees: Vec<usize>,
}

impl Network {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adjacency: vec![0; n * n],
            degrees: vec![0; n],
        }
    }

    /// Builds a network from undirected edges. Duplicates and reversed pairs
    /// collapse to one edge.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut net = Self::empty(n);
        for (i, j) in edges {
            net.insert_edge(i, j)?;
        }
        Ok(net)
    }

    /// Validates a row-major `n × n` 0/1 table.
    pub fn from_adjacency(n: usize, adjacency: Vec<u8>) -> Result<Self> {
        if adjacency.len() != n * n {
            return Err(CalfError::DimensionMismatch {
                what: "adjacency",
                expected: n * n,
                found: adjacency.len(),
            });
        }
        for i in 0..n {
            if adjacency[i * n + i] != 0 {
                return Err(CalfError::SelfLoop(i));
            }
            for j in 0..n {
                let a = adjacency[i * n + j];
                if a > 1 {
                    return Err(CalfError::InvalidInput(format!("adjacency entry ({i}, {j}) = {a} is not binary")));
                }
                if a != adjacency[j * n + i] {
                    return Err(CalfError::InvalidInput(format!("adjacency is not symmetric at ({i}, {j})")));
                }
            }
        }
        let degrees = adjacency.chunks(n.max(1)).take(n).map(|r| r.iter().map(|&a| a as usize).sum()).collect();
        Ok(Self { n, adjacency, degrees })
    }

    pub fn insert_edge(&mut self, i: usize, j: usize) -> Result<bool> {
        let n = self.n;
        for idx in [i, j] {
            if idx >= n {
                return Err(CalfError::IndexOutOfRange { index: idx, n });
            }
        }
        if i == j {
            return Err(CalfError::SelfLoop(i));
        }
        if self.adjacency[i * n + j] == 1 {
            return Ok(false);
        }
        self.adjacency[i * n + j] = 1;
        self.adjacency[j * n + i] = 1;
        self.degrees[i] += 1;
        self.degrees[j] += 1;
        Ok(true)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j] == 1
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u8] {
        &self.adjacency[i * self.n..(i + 1) * self.n]
    }

    pub fn adjacency(&self) -> &[u8] {
        &self.adjacency
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.degrees.iter().sum::<usize>() as f64 / self.n as f64
    }

    pub fn edge_count(&self) -> usize {
        self.degrees.iter().sum::<usize>() / 2
    }

    pub fn dyad_count(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    pub fn density(&self) -> f64 {
        match self.dyad_count() {
            0 => 0.0,
            d => self.edge_count() as f64 / d as f64,
        }
    }

    /// Edges `(i, j)` with `i < j` in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).filter(move |&j| self.has_edge(i, j)).map(move |j| (i, j)))
    }
}

/// Which construction produced a similarity table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityKind {
    Euclidean,
    MatchAverage,
    ScaledCombination,
    Custom,
}

/// Node covariates together with the derived pairwise similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeData {
    covariates: DenseMatrix,
    similarity: DenseMatrix,
    similarity_kind: SimilarityKind,
}

impl NodeData {
    pub fn new(covariates: DenseMatrix, similarity: DenseMatrix, similarity_kind: SimilarityKind) -> Result<Self> {
        let n = covariates.rows();
        if covariates.cols() == 0 {
            return Err(CalfError::InvalidInput("covariate table needs at least one column".into()));
        }
        if similarity.rows() != n || similarity.cols() != n {
            return Err(CalfError::DimensionMismatch {
                what: "similarity",
                expected: n,
                found: similarity.rows(),
            });
        }
        for i in 0..n {
            if similarity[(i, i)] != 0.0 {
                return Err(CalfError::InvalidInput(format!("similarity diagonal at {i} is nonzero")));
            }
            for j in i + 1..n {
                if similarity[(i, j)] != similarity[(j, i)] {
                    return Err(CalfError::InvalidInput(format!("similarity is not symmetric at ({i}, {j})")));
                }
                if !similarity[(i, j)].is_finite() {
                    return Err(CalfError::InvalidInput(format!("similarity at ({i}, {j}) is not finite")));
                }
            }
        }
        Ok(Self {
            covariates,
            similarity,
            similarity_kind,
        })
    }

    /// Numeric covariates with Euclidean-distance similarity.
    pub fn euclidean(covariates: DenseMatrix) -> Result<Self> {
        let s = crate::similarity::euclidean_similarity(&covariates);
        Self::new(covariates, s, SimilarityKind::Euclidean)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.covariates.rows()
    }

    pub fn p(&self) -> usize {
        self.covariates.cols()
    }

    pub fn covariates(&self) -> &DenseMatrix {
        &self.covariates
    }

    pub fn similarity(&self) -> &DenseMatrix {
        &self.similarity
    }

    pub fn similarity_kind(&self) -> SimilarityKind {
        self.similarity_kind
    }
}

/// Intercept plus the symmetric `K × K` block-pair coefficients, stored as the
/// row-major upper triangle `(β₁₁, β₁₂, …, β₁K, β₂₂, …, β_KK)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCoefficients {
    k: usize,
    pub beta0: f64,
    upper: Vec<f64>,
}

impl BlockCoefficients {
    pub fn zeros(k: usize) -> Self {
        Self {
            k,
            beta0: 0.0,
            upper: vec![0.0; k * (k + 1) / 2],
        }
    }

    pub fn from_upper(k: usize, beta0: f64, upper: Vec<f64>) -> Result<Self> {
        if upper.len() != k * (k + 1) / 2 {
            return Err(CalfError::DimensionMismatch {
                what: "upper-triangle coefficients",
                expected: k * (k + 1) / 2,
                found: upper.len(),
            });
        }
        Ok(Self { k, beta0, upper })
    }

    /// Builds from a dense `k × k` table, reading the upper triangle only.
    pub fn from_dense(k: usize, beta0: f64, dense: &DenseMatrix) -> Self {
        let mut c = Self::zeros(k);
        c.beta0 = beta0;
        for a in 0..k {
            for b in a..k {
                c.set(a, b, dense[(a, b)]);
            }
        }
        c
    }

    /// `[β₀, upper triangle…]`, the layout of the coefficient prior.
    pub fn from_vector(k: usize, v: &[f64]) -> Result<Self> {
        if v.len() != Self::free_count(k) {
            return Err(CalfError::DimensionMismatch {
                what: "coefficient vector",
                expected: Self::free_count(k),
                found: v.len(),
            });
        }
        Self::from_upper(k, v[0], v[1..].to_vec())
    }

    /// `K(K+1)/2 + 1`.
    pub fn free_count(k: usize) -> usize {
        k * (k + 1) / 2 + 1
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn pair_index(&self, a: usize, b: usize) -> usize {
        upper_index(self.k, a, b)
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.upper[upper_index(self.k, a, b)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        let idx = upper_index(self.k, a, b);
        self.upper[idx] = v;
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn upper_mut(&mut self) -> &mut [f64] {
        &mut self.upper
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.k).map(|a| self.get(a, a)).collect()
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.upper.len() + 1);
        v.push(self.beta0);
        v.extend_from_slice(&self.upper);
        v
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.k, self.k, |a, b| self.get(a, b))
    }

    /// Upper-triangle pairs `(a, b)`, `a ≤ b`, in storage order.
    pub fn pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..k).flat_map(move |a| (a..k).map(move |b| (a, b)))
    }
}

#[inline]
fn upper_index(k: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    debug_assert!(b < k);
    a * (2 * k - a + 1) / 2 + (b - a)
}

/// One full parameter configuration of the model for a fixed `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub coefficients: BlockCoefficients,
    pub theta: Vec<f64>,
    pub sigma2: f64,
    /// 0-based block index per node.
    pub membership: Vec<usize>,
    /// `n × K`, each row on the simplex.
    pub alpha: DenseMatrix,
    pub k: usize,
}

impl ModelState {
    /// Uniform `α` rows.
    pub fn new(coefficients: BlockCoefficients, theta: Vec<f64>, sigma2: f64, membership: Vec<usize>) -> Result<Self> {
        let k = coefficients.k();
        let n = theta.len();
        let alpha = DenseMatrix::from_fn(n, k, |_, _| 1.0 / k as f64);
        let state = Self {
            coefficients,
            theta,
            sigma2,
            membership,
            alpha,
            k,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.theta.len();
        if self.coefficients.k() != self.k {
            return Err(CalfError::DimensionMismatch {
                what: "coefficient blocks",
                expected: self.k,
                found: self.coefficients.k(),
            });
        }
        if self.membership.len() != n {
            return Err(CalfError::DimensionMismatch {
                what: "membership",
                expected: n,
                found: self.membership.len(),
            });
        }
        if self.alpha.rows() != n || self.alpha.cols() != self.k {
            return Err(CalfError::DimensionMismatch {
                what: "alpha rows",
                expected: n,
                found: self.alpha.rows(),
            });
        }
        if !(self.sigma2 > 0.0) {
            return Err(CalfError::InvalidInput(format!("sigma2 = {} must be positive", self.sigma2)));
        }
        if let Some(&bad) = self.membership.iter().find(|&&z| z >= self.k) {
            return Err(CalfError::InvalidInput(format!("label {bad} outside 0..{}", self.k)));
        }
        for (i, row) in self.alpha.iter_rows().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&a| a < 0.0) || (sum - 1.0).abs() > 1e-12 {
                return Err(CalfError::InvalidInput(format!("alpha row {i} is not on the simplex")));
            }
        }
        Ok(())
    }

    /// One-hot encoding `Z_i` of node `i`'s label.
    pub fn one_hot(&self, i: usize) -> Vec<f64> {
        let mut z = vec![0.0; self.k];
        z[self.membership[i]] = 1.0;
        z
    }

    #[inline]
    pub fn logit(&self, nd: &NodeData, i: usize, j: usize) -> f64 {
        self.coefficients.beta0
            + self.coefficients.get(self.membership[i], self.membership[j]) * nd.similarity()[(i, j)]
            + self.theta[i]
            + self.theta[j]
    }
}

/// `π_i = argmax_k Z_ik`, ties to the lowest index.
pub fn argmax_label(z: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = k;
        }
    }
    best
}

/// Edge probability `η` for a dyad with similarity `s`, node effects
/// `theta_i`, `theta_j`, and blocks `k`, `l`.
pub fn eta(coeffs: &BlockCoefficients, s: f64, theta_i: f64, theta_j: f64, k: usize, l: usize) -> f64 {
    inv_logit(coeffs.beta0 + coeffs.get(k, l) * s + theta_i + theta_j)
}

fn check_dims(net: &Network, nd: &NodeData, state: &ModelState) -> Result<()> {
    let n = net.n();
    for (what, found) in [("node data", nd.n()), ("theta", state.theta.len()), ("membership", state.membership.len())] {
        if found != n {
            return Err(CalfError::DimensionMismatch { what, expected: n, found });
        }
    }
    if let Some(&bad) = state.membership.iter().find(|&&z| z >= state.coefficients.k()) {
        return Err(CalfError::InvalidInput(format!("label {bad} outside 0..{}", state.coefficients.k())));
    }
    Ok(())
}

/// `Σ_{i<j} [A_ij log η_ij + (1 − A_ij) log(1 − η_ij)]`.
pub fn log_likelihood(net: &Network, nd: &NodeData, state: &ModelState) -> Result<f64> {
    check_dims(net, nd, state)?;
    let n = net.n();
    let mut total = 0.0;
    for i in 0..n {
        let row = net.row(i);
        for j in i + 1..n {
            total += dyad_log_lik(row[j] == 1, state.logit(nd, i, j));
        }
    }
    Ok(total)
}

/// Per-dyad log-likelihood terms, row-major over `i < j`.
pub fn dyad_log_likelihoods(net: &Network, nd: &NodeData, state: &ModelState) -> Result<Vec<f64>> {
    check_dims(net, nd, state)?;
    let mut out = Vec::with_capacity(net.dyad_count());
    fill_dyad_log_likelihoods(net, nd, state, &mut out);
    Ok(out)
}

/// Appends the pointwise terms to `out` without dimension checks.
pub(crate) fn fill_dyad_log_likelihoods(net: &Network, nd: &NodeData, state: &ModelState, out: &mut Vec<f64>) {
    let n = net.n();
    for i in 0..n {
        let row = net.row(i);
        for j in i + 1..n {
            out.push(dyad_log_lik(row[j] == 1, state.logit(nd, i, j)));
        }
    }
}
