use crate::error::{CalfError, Result};
use crate::inference::ChainDraws;
use crate::matrix::DenseMatrix;
use crate::model::{BlockCoefficients, ModelState};

/// Draws after enforcing `β₁₁ ≤ β₂₂ ≤ … ≤ β_KK` one draw at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct RelabeledDraws {
    pub draws: ChainDraws,
    /// `permutations[s][new] = old`: block `old` of draw `s` became block `new`.
    pub permutations: Vec<Vec<usize>>,
}

/// Reorders the blocks of one state so the diagonal of `β` ascends. Ties keep
/// the original order. Returns the permutation `new → old`.
pub fn relabel_state(state: &mut ModelState) -> Vec<usize> {
    let k = state.k;
    let diag = state.coefficients.diagonal();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return order;
    }
    let mut old_to_new = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        old_to_new[old] = new;
    }
    let old = state.coefficients.clone();
    let mut coeffs = BlockCoefficients::zeros(k);
    coeffs.beta0 = old.beta0;
    for (a, b) in BlockCoefficients::pairs(k) {
        coeffs.set(a, b, old.get(order[a], order[b]));
    }
    state.coefficients = coeffs;
    state.membership.iter_mut().for_each(|z| *z = old_to_new[*z]);
    let alpha = &state.alpha;
    state.alpha = DenseMatrix::from_fn(alpha.rows(), k, |i, c| alpha[(i, order[c])]);
    order
}

/// Applies [`relabel_state`] to every stored draw. Per-dyad log-likelihoods
/// are invariant under the permutation and are kept as they are.
pub fn relabel(mut draws: ChainDraws) -> Result<RelabeledDraws> {
    if draws.is_empty() {
        return Err(CalfError::Empty);
    }
    let permutations = draws.states.iter_mut().map(relabel_state).collect();
    Ok(RelabeledDraws { draws, permutations })
}
