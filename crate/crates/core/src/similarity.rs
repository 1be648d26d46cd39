//! Pairwise covariate similarity constructions. Every table returned here is
//! symmetric with a zero diagonal.

use crate::error::{CalfError, Result};
use crate::matrix::DenseMatrix;

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// `S_ij = ‖X_i − X_j‖₂`.
pub fn euclidean_similarity(x: &DenseMatrix) -> DenseMatrix {
    let n = x.rows();
    let mut s = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let xi = x.row(i);
        for j in i + 1..n {
            let d = xi
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            s[(i, j)] = d;
            s[(j, i)] = d;
        }
    }
    s
}

/// Fraction of the `m` categorical attributes on which two nodes agree.
pub fn match_average_similarity<T: PartialEq>(table: &[Vec<T>]) -> Result<DenseMatrix> {
    let n = table.len();
    let m = table.first().map_or(0, Vec::len);
    if n > 0 && m == 0 {
        return Err(CalfError::InvalidInput("match-average similarity needs at least one attribute".into()));
    }
    if let Some((i, r)) = table.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(CalfError::InvalidInput(format!("row {i} has {} attributes, expected {m}", r.len())));
    }
    let mut s = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let hits = table[i].iter().zip(&table[j]).filter(|(a, b)| a == b).count();
            let v = hits as f64 / m as f64;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

/// Haversine distance in kilometres between two points given in degrees.
pub fn great_circle_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> Result<f64> {
    for lat in [lat1, lat2] {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(CalfError::InvalidLatitude(lat));
        }
    }
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin())
}

/// Great-circle distance table for `(lat, lon)` points.
pub fn great_circle_distances(coords: &[(f64, f64)]) -> Result<DenseMatrix> {
    let n = coords.len();
    let mut s = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = great_circle_km(coords[i].0, coords[i].1, coords[j].0, coords[j].1)?;
            s[(i, j)] = d;
            s[(j, i)] = d;
        }
    }
    Ok(s)
}

/// Sample standard deviation of the strict upper triangle.
fn upper_triangle_sd(m: &DenseMatrix) -> f64 {
    let n = m.rows();
    let count = n * n.saturating_sub(1) / 2;
    if count < 2 {
        return 0.0;
    }
    let mut mean = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            mean += m[(i, j)];
        }
    }
    mean /= count as f64;
    let mut ss = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            ss += (m[(i, j)] - mean).powi(2);
        }
    }
    (ss / (count - 1) as f64).sqrt()
}

/// Scales every component to unit variance over its upper triangle, then
/// forms the weighted sum. `weights = None` means equal weights `1/m`.
pub fn combined_scaled_similarity(components: &[DenseMatrix], weights: Option<&[f64]>) -> Result<DenseMatrix> {
    let Some(first) = components.first() else {
        return Err(CalfError::InvalidInput("no similarity components given".into()));
    };
    let n = first.rows();
    let equal = vec![1.0 / components.len() as f64; components.len()];
    let weights = weights.unwrap_or(&equal);
    if weights.len() != components.len() {
        return Err(CalfError::DimensionMismatch {
            what: "similarity weights",
            expected: components.len(),
            found: weights.len(),
        });
    }
    let mut out = DenseMatrix::zeros(n, n);
    for (c, (comp, &w)) in components.iter().zip(weights).enumerate() {
        if comp.rows() != n || comp.cols() != n {
            return Err(CalfError::DimensionMismatch {
                what: "similarity component",
                expected: n,
                found: comp.rows(),
            });
        }
        if !comp.is_symmetric(0.0) || (0..n).any(|i| comp[(i, i)] != 0.0) {
            return Err(CalfError::InvalidInput(format!(
                "similarity component {c} must be symmetric with zero diagonal"
            )));
        }
        let sd = upper_triangle_sd(comp);
        if !(sd > 0.0) {
            return Err(CalfError::ZeroVariance(c));
        }
        let f = w / sd;
        for i in 0..n {
            for j in i + 1..n {
                let v = out[(i, j)] + f * comp[(i, j)];
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
    }
    Ok(out)
}
