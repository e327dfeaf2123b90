//! Invariance entropy from spanning sets and from the spectral formula.

mod cover;
mod estimate;
mod spanning;

pub use cover::{exact_cover, greedy_cover};
pub use estimate::{
    entropy_from_counts, entropy_from_spanning_sets, h_inv_spectral, reconcile, EntropyEstimate,
    EntropyMethod, ReconcileReport,
};
pub use spanning::{
    build_spanning_set, enumerate_candidates, Candidates, CoverMethod, CoverStrategy, SpanningFlavor, SpanningOptions, SpanningSet,
};
