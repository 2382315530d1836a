//! Quantize-map-forward relaying with Marton source coding over
//! deterministic networks: typical sets, random relay tables, the induced
//! broadcast channel, binning codebooks, pruning and level-3 runs.

pub mod codebook;
pub mod level3;
pub mod relay;
pub mod typical;

pub use codebook::{
    asymptotic_kappa, bin_count, prune_sets, Encoded, MartonCodebook, MulticastDecoder, PrunedSets, SchemeParams,
};
pub use level3::{
    best_fixed_mapping, block_entropies, block_tables, level3_run, subset_entropies, symmetric_rate, weighted_vertex, BlockReport,
    Level3Config, Level3Report,
};
pub use relay::{expected_entropy, sample_relay_tables, uniform_dist, InducedChannel, RelayTables};
pub use typical::{is_typical, typical_set, typical_set_size, DEFAULT_DELTA, DEFAULT_TYPICAL_CAP};
