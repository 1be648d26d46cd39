use serde::{Deserialize, Serialize};

use crate::error::{CalfError, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waic {
    /// Log pointwise predictive density `Σ_d log mean_s exp(ll_sd)`.
    pub lppd: f64,
    /// Effective parameter count `Σ_d var_s(ll_sd)`, unbiased variance.
    pub p_waic: f64,
    /// `−2 (lppd − p_waic)`.
    pub waic: f64,
}

/// WAIC of one draws × dyads table.
pub fn waic(pointwise: &DenseMatrix) -> Result<Waic> {
    waic_pooled(&[pointwise])
}

/// WAIC of the row-wise concatenation of several draws × dyads tables.
pub fn waic_pooled(tables: &[&DenseMatrix]) -> Result<Waic> {
    let dyads = tables.first().map_or(0, |t| t.cols());
    let draws: usize = tables.iter().map(|t| t.rows()).sum();
    if dyads == 0 || draws == 0 {
        return Err(CalfError::Empty);
    }
    if let Some(t) = tables.iter().find(|t| t.cols() != dyads) {
        return Err(CalfError::DimensionMismatch {
            what: "pointwise dyads",
            expected: dyads,
            found: t.cols(),
        });
    }
    // per-dyad running max, scaled exp-sum, and Welford moments
    let mut max = vec![f64::NEG_INFINITY; dyads];
    let mut scaled = vec![0.0; dyads];
    let mut mean = vec![0.0; dyads];
    let mut m2 = vec![0.0; dyads];
    let mut count = 0.0;
    for row in tables.iter().flat_map(|t| t.iter_rows()) {
        count += 1.0;
        for (d, &x) in row.iter().enumerate() {
            if x > max[d] {
                scaled[d] = scaled[d] * (max[d] - x).exp() + 1.0;
                max[d] = x;
            } else {
                scaled[d] += (x - max[d]).exp();
            }
            let delta = x - mean[d];
            mean[d] += delta / count;
            m2[d] += delta * (x - mean[d]);
        }
    }
    let log_s = count.ln();
    let lppd: f64 = (0..dyads).map(|d| max[d] + scaled[d].ln() - log_s).sum();
    let p_waic: f64 = if count > 1.0 { m2.iter().map(|v| v / (count - 1.0)).sum() } else { 0.0 };
    Ok(Waic {
        lppd,
        p_waic,
        waic: -2.0 * (lppd - p_waic),
    })
}
