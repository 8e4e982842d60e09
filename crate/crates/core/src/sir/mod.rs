//! Lattice SIR model: configurations, cluster indicators and cluster
//! functions at positive times.

mod clusters;
mod config;

pub use clusters::{
    dual_walk_transient, g_cluster, g_translation_invariant, h_cluster, h_translation_invariant, j_cluster,
    j_translation_invariant, ClusterValues, DualWalkLaw, InitialClusters, ProductMeasure, DEFAULT_CLUSTER_TOL,
};
pub use config::{cluster_indicator, sir_window_transitions, ClusterKind, SirConfiguration, SirState};
pub(crate) use config::cluster_indicator_unchecked;
