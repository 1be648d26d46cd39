use rand::seq::index::sample;
use rand::Rng;

use crate::error::{CalfError, Result};
use crate::matrix::DenseMatrix;

/// Center update and matching distance for Lloyd iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterRule {
    /// Coordinate means, squared Euclidean cost.
    Mean,
    /// Coordinate medians, L1 cost.
    Median,
}

impl CenterRule {
    #[inline]
    fn cost(self, x: &[f64], c: &[f64]) -> f64 {
        match self {
            CenterRule::Mean => x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum(),
            CenterRule::Median => x.iter().zip(c).map(|(a, b)| (a - b).abs()).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    pub objective: f64,
    /// Objective after each assignment step of the winning restart.
    pub trace: Vec<f64>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn single_run<R: Rng + ?Sized>(x: &DenseMatrix, k: usize, rule: CenterRule, max_iter: usize, rng: &mut R) -> ClusterResult {
    let (n, p) = (x.rows(), x.cols());
    let mut centers = DenseMatrix::zeros(k, p);
    for (c, i) in sample(rng, n, k).into_iter().enumerate() {
        centers.row_mut(c).copy_from_slice(x.row(i));
    }
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut scratch = Vec::with_capacity(n);
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut objective = 0.0;
        for i in 0..n {
            let mut best = 0;
            let mut best_cost = f64::INFINITY;
            for c in 0..k {
                let cost = rule.cost(x.row(i), centers.row(c));
                if cost < best_cost {
                    best = c;
                    best_cost = cost;
                }
            }
            objective += best_cost;
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        trace.push(objective);
        if !changed {
            break;
        }
        // empty clusters keep their previous center
        for c in 0..k {
            for d in 0..p {
                scratch.clear();
                scratch.extend((0..n).filter(|&i| labels[i] == c).map(|i| x[(i, d)]));
                if scratch.is_empty() {
                    continue;
                }
                centers[(c, d)] = match rule {
                    CenterRule::Mean => scratch.iter().sum::<f64>() / scratch.len() as f64,
                    CenterRule::Median => median(&mut scratch),
                };
            }
        }
    }
    ClusterResult {
        labels,
        objective: *trace.last().expect("at least one assignment step"),
        trace,
    }
}

/// Lloyd iteration from `restarts` random starts; keeps the lowest objective.
pub fn lloyd<R: Rng + ?Sized>(
    x: &DenseMatrix,
    k: usize,
    rule: CenterRule,
    restarts: usize,
    max_iter: usize,
    rng: &mut R,
) -> Result<ClusterResult> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(CalfError::TooManyClusters { k, n });
    }
    let mut best: Option<ClusterResult> = None;
    for _ in 0..restarts.max(1) {
        let run = single_run(x, k, rule, max_iter, rng);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// k-means with 10 restarts.
pub fn kmeans<R: Rng + ?Sized>(x: &DenseMatrix, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    Ok(lloyd(x, k, CenterRule::Mean, 10, 300, rng)?.labels)
}

/// k-medians with 10 restarts.
pub fn kmedians<R: Rng + ?Sized>(x: &DenseMatrix, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    Ok(lloyd(x, k, CenterRule::Median, 10, 300, rng)?.labels)
}
