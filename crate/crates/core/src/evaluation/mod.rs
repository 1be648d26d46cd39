//! Clustering agreement metrics and the baseline clusterers.

mod kcluster;
mod metrics;
mod spectral;

pub use kcluster::{kmeans, kmedians, lloyd, CenterRule, ClusterResult};
pub use metrics::{ari, cramers_v, nmi, ContingencyTable};
pub use spectral::spectral_clustering;
