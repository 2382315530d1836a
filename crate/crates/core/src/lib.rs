//! Cut-set bounds and desk-scale coding simulations for broadcast relay
//! networks.
//!
//! The crate covers three channel models over the same node/role data:
//! Gaussian networks (optionally MIMO), linear deterministic networks over
//! a prime field, and discrete superposition networks obtained by rounding
//! a Gaussian network. On top of them sit cut enumeration and cut values,
//! a random linear coding simulator, a small Marton-binning scheme with
//! codebook pruning, and the lift that runs a discrete code over the
//! Gaussian channel.

pub mod codec;
pub mod cutset;
pub mod detnet;
pub mod dsn;
pub mod error;
pub mod ff;
pub mod info;
pub mod marton;
pub mod model;
pub mod rng;

pub use error::{Error, ErrorKind, Result};
pub use ff::FpMatrix;
pub use model::{
    AnyNetwork, BufferRule, CMatrix, Edge, GaussianNetwork, LayeredNetwork, LdnNetwork, Mode,
    NetworkDescription, NodeId, NodeLabel, NodeSet, RelayNetwork, Roles, Schedule, UnfoldOptions,
    ValidationReport,
};
