use std::collections::BTreeMap;

use crate::error::{CalfError, Result};

/// Cross-tabulation of two labelings of the same items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
    pub total: usize,
}

impl ContingencyTable {
    /// Rows follow the sorted distinct labels of `a`, columns those of `b`.
    pub fn new<A: Ord + Clone, B: Ord + Clone>(a: &[A], b: &[B]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(CalfError::LengthMismatch(a.len(), b.len()));
        }
        let ra = level_index(a);
        let cb = level_index(b);
        let mut counts = vec![vec![0usize; cb.len()]; ra.len()];
        for (x, y) in a.iter().zip(b) {
            counts[ra[&x]][cb[&y]] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..cb.len()).map(|c| counts.iter().map(|r| r[c]).sum()).collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            total: a.len(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_sums.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_sums.len()
    }
}

/// Maps each distinct label to its rank among the sorted distinct labels.
fn level_index<T: Ord>(labels: &[T]) -> BTreeMap<&T, usize> {
    let mut m: BTreeMap<&T, usize> = labels.iter().map(|l| (l, 0)).collect();
    for (rank, v) in m.values_mut().enumerate() {
        *v = rank;
    }
    m
}

fn choose2(x: usize) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Adjusted Rand index `(Index − Expected) / (Max − Expected)`. Not clipped at
/// zero; two trivial partitions that agree score 1.
pub fn ari<A: Ord + Clone, B: Ord + Clone>(a: &[A], b: &[B]) -> Result<f64> {
    let t = ContingencyTable::new(a, b)?;
    if t.total < 2 {
        return Err(CalfError::InvalidInput("ARI needs at least two items".into()));
    }
    let index: f64 = t.counts.iter().flatten().map(|&c| choose2(c)).sum();
    let sa: f64 = t.row_sums.iter().map(|&c| choose2(c)).sum();
    let sb: f64 = t.col_sums.iter().map(|&c| choose2(c)).sum();
    let expected = sa * sb / choose2(t.total);
    let max = 0.5 * (sa + sb);
    if max == expected {
        // both partitions are all-singletons or a single block
        return Ok(if sa == sb { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

fn entropy(counts: &[usize], total: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information over the arithmetic mean of the two entropies.
pub fn nmi<A: Ord + Clone, B: Ord + Clone>(a: &[A], b: &[B]) -> Result<f64> {
    let t = ContingencyTable::new(a, b)?;
    if t.total == 0 {
        return Err(CalfError::Empty);
    }
    let n = t.total as f64;
    let ha = entropy(&t.row_sums, n);
    let hb = entropy(&t.col_sums, n);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (r, row) in t.counts.iter().enumerate() {
        for (c, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (t.row_sums[r] as f64 * t.col_sums[c] as f64)).ln();
            }
        }
    }
    Ok((mi / (0.5 * (ha + hb))).clamp(0.0, 1.0))
}

/// `√(χ² / (n · min(r − 1, c − 1)))`.
pub fn cramers_v<A: Ord + Clone, B: Ord + Clone>(a: &[A], b: &[B]) -> Result<f64> {
    let t = ContingencyTable::new(a, b)?;
    let dof = t.n_rows().min(t.n_cols());
    if dof < 2 {
        return Err(CalfError::SingleLevel);
    }
    let n = t.total as f64;
    let mut chi2 = 0.0;
    for (r, row) in t.counts.iter().enumerate() {
        for (c, &o) in row.iter().enumerate() {
            let e = t.row_sums[r] as f64 * t.col_sums[c] as f64 / n;
            chi2 += (o as f64 - e).powi(2) / e;
        }
    }
    Ok((chi2 / (n * (dof - 1) as f64)).sqrt().min(1.0))
}
