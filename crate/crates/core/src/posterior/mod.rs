//! Post-processing of posterior draws: label-switching correction,
//! convergence diagnostics, WAIC, summaries and selection of `K`.

mod diagnostics;
mod fit;
mod relabel;
mod summary;
mod waic;

pub use diagnostics::gelman_rubin;
pub use fit::{fit, select_k, Fit, FitSettings, Selection, SelectionEntry};
pub use relabel::{relabel, relabel_state, RelabeledDraws};
pub use summary::{hard_membership, quantile, summarize, FitReport, ScalarSummary};
pub use waic::{waic, waic_pooled, Waic};
