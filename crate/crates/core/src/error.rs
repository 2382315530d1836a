use thiserror::Error;

use crate::model::{NodeId, ValidationReport};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    CapExceeded,
    Precondition,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid network:\n{0}")]
    InvalidNetwork(ValidationReport),

    #[error("{0} is not a prime below 65536")]
    NotPrime(u32),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{what} exceeds cap ({size} > {cap}); {hint}")]
    CapExceeded {
        what: &'static str,
        size: u128,
        cap: u128,
        hint: &'static str,
    },

    #[error("unfolding depth too small: K = {depth} must exceed |V| = {nodes}")]
    UnfoldingDepth { depth: usize, nodes: usize },

    #[error("network is not layered: {0}")]
    NotLayered(String),

    #[error("malformed schedule: {0}")]
    Schedule(String),

    #[error("reciprocal network undefined: {0}")]
    Reciprocal(String),

    #[error("invalid covariance: {0}")]
    Covariance(String),

    #[error("symbol {symbol} is outside the input alphabet of node {node}")]
    OutOfAlphabet { node: NodeId, symbol: usize },

    #[error(
        "rate vector outside the rank region: subset {subset:?} needs {needed} symbols, transfer rank is {rank}"
    )]
    OutsideRankRegion {
        subset: Vec<usize>,
        needed: usize,
        rank: usize,
    },

    #[error("no precoder found within the search cap")]
    NoPrecoder,

    #[error(
        "rate too high for block length: destination {destination} needs {bins} bins but only {members} sequences are available"
    )]
    RateTooHigh {
        destination: usize,
        bins: u64,
        members: usize,
    },

    #[error("pruned set of node {0} is empty")]
    EmptyPrunedSet(NodeId),

    #[error("typical set is empty: {0}")]
    EmptyTypicalSet(String),

    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse(_) | Error::InvalidNetwork(_) => ErrorKind::Parse,
            Error::CapExceeded { .. } => ErrorKind::CapExceeded,
            Error::NotPrime(_)
            | Error::Dimension(_)
            | Error::UnfoldingDepth { .. }
            | Error::NotLayered(_)
            | Error::Schedule(_)
            | Error::Reciprocal(_)
            | Error::Covariance(_)
            | Error::OutOfAlphabet { .. }
            | Error::OutsideRankRegion { .. }
            | Error::RateTooHigh { .. }
            | Error::EmptyPrunedSet(_)
            | Error::EmptyTypicalSet(_)
            | Error::Precondition(_) => ErrorKind::Precondition,
            Error::NoPrecoder => ErrorKind::Internal,
        }
    }

    pub(crate) fn cap(what: &'static str, size: u128, cap: u128, hint: &'static str) -> Self {
        Error::CapExceeded {
            what,
            size,
            cap,
            hint,
        }
    }
}
