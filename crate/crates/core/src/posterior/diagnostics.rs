use crate::error::{CalfError, Result};

/// Gelman–Rubin potential scale reduction factor
/// `√(((m−1)/m · W + B/m) / W)` for chains of equal length `m`.
pub fn gelman_rubin<C: AsRef<[f64]>>(chains: &[C]) -> Result<f64> {
    let j = chains.len();
    if j < 2 {
        return Err(CalfError::InvalidInput("R-hat needs at least two chains".into()));
    }
    let m = chains[0].as_ref().len();
    if m < 2 {
        return Err(CalfError::InvalidInput("R-hat needs at least two draws per chain".into()));
    }
    if let Some(c) = chains.iter().find(|c| c.as_ref().len() != m) {
        return Err(CalfError::LengthMismatch(m, c.as_ref().len()));
    }
    let mf = m as f64;
    let mut means = Vec::with_capacity(j);
    let mut w = 0.0;
    for c in chains {
        let c = c.as_ref();
        let mean = c.iter().sum::<f64>() / mf;
        w += c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (mf - 1.0);
        means.push(mean);
    }
    w /= j as f64;
    if !(w > 0.0) {
        return Err(CalfError::ConstantChains);
    }
    let grand = means.iter().sum::<f64>() / j as f64;
    let b = mf * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (j as f64 - 1.0);
    Ok((((mf - 1.0) / mf * w + b / mf) / w).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identical_chains() {
        let c: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let r = gelman_rubin(&[c.clone(), c]).unwrap();
        assert!((r - (99.0f64 / 100.0).sqrt()).abs() < 1e-12);
        assert!((r - 0.99499).abs() < 1e-5);
    }

    #[test]
    fn iid_chains_are_near_one() {
        let mut r = rng::stream(1, 0);
        let chains: Vec<Vec<f64>> = (0..3).map(|_| (0..10_000).map(|_| StandardNormal.sample(&mut r)).collect()).collect();
        let v = gelman_rubin(&chains).unwrap();
        assert!((0.99..=1.01).contains(&v), "{v}");
    }

    #[test]
    fn separated_chains_are_flagged() {
        let a: Vec<f64> = (0..50).map(|i| (i % 5) as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        assert!(gelman_rubin(&[a, b]).unwrap() > 2.0);
    }

    #[test]
    fn error_paths() {
        assert_eq!(gelman_rubin(&[vec![1.0; 10], vec![1.0; 10]]), Err(CalfError::ConstantChains));
        assert!(gelman_rubin(&[vec![1.0, 2.0]]).is_err());
        assert!(gelman_rubin(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }
}
