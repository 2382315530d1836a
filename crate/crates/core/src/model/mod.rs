//! Network data model: node roles, Gaussian and linear-deterministic
//! networks, validation, reciprocity and time unfolding.

mod gaussian;
mod io;
mod layered;
mod ldn;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use gaussian::{CMatrix, GaussianNetwork};
pub use io::{validate, AnyNetwork, GainSpec, NetworkDescription, NetworkKind};
pub use layered::{
    BufferRule, LayeredNetwork, Mode, NodeLabel, Schedule, UnfoldOptions,
};
pub use ldn::LdnNetwork;

use crate::error::{Error, Result};

/// Largest node count representable in a [`NodeSet`].
pub const MAX_NODES: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
}

impl Edge {
    pub fn new(from: usize, to: usize) -> Self {
        Edge {
            from: NodeId(from),
            to: NodeId(to),
        }
    }

    pub fn reversed(self) -> Self {
        Edge {
            from: self.to,
            to: self.from,
        }
    }
}

/// A set of nodes, stored as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeSet(u128);

impl NodeSet {
    pub fn empty() -> Self {
        NodeSet(0)
    }

    pub fn from_bits(bits: u128) -> Self {
        NodeSet(bits)
    }

    pub fn bits(self) -> u128 {
        self.0
    }

    pub fn full(n: usize) -> Self {
        if n >= 128 {
            NodeSet(u128::MAX)
        } else {
            NodeSet((1u128 << n) - 1)
        }
    }

    pub fn contains(self, v: NodeId) -> bool {
        v.0 < 128 && self.0 >> v.0 & 1 == 1
    }

    pub fn insert(&mut self, v: NodeId) {
        self.0 |= 1u128 << v.0;
    }

    pub fn remove(&mut self, v: NodeId) {
        self.0 &= !(1u128 << v.0);
    }

    pub fn with(mut self, v: NodeId) -> Self {
        self.insert(v);
        self
    }

    pub fn complement(self, n: usize) -> Self {
        NodeSet(!self.0 & Self::full(n).0)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = NodeId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(NodeId(i))
            }
        })
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        let mut s = NodeSet::empty();
        for v in iter {
            s.insert(v);
        }
        s
    }
}

/// Serialized as the hex bitmask string.
impl Serialize for NodeSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:x}", self.0)
    }
}

/// Who sends and who listens.
///
/// A broadcast network has one source, private-message destinations
/// `D_1..D_J` and multicast destinations `M_1..M_L` that want every message.
/// Its reciprocal has the destinations as sources and the old source as the
/// single sink.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Roles {
    Broadcast {
        source: NodeId,
        bc_destinations: Vec<NodeId>,
        mc_destinations: Vec<NodeId>,
    },
    MultiSource {
        sources: Vec<NodeId>,
        destination: NodeId,
    },
}

impl Roles {
    pub fn broadcast(source: usize, bc: &[usize], mc: &[usize]) -> Self {
        Roles::Broadcast {
            source: NodeId(source),
            bc_destinations: bc.iter().map(|&d| NodeId(d)).collect(),
            mc_destinations: mc.iter().map(|&d| NodeId(d)).collect(),
        }
    }

    /// Number of independent message flows `J`.
    pub fn flow_count(&self) -> usize {
        match self {
            Roles::Broadcast {
                bc_destinations, ..
            } => bc_destinations.len(),
            Roles::MultiSource { sources, .. } => sources.len(),
        }
    }

    pub fn source(&self) -> Result<NodeId> {
        match self {
            Roles::Broadcast { source, .. } => Ok(*source),
            Roles::MultiSource { .. } => Err(Error::Precondition(
                "operation needs a single-source broadcast network".into(),
            )),
        }
    }

    pub fn bc_destinations(&self) -> &[NodeId] {
        match self {
            Roles::Broadcast {
                bc_destinations, ..
            } => bc_destinations,
            Roles::MultiSource { .. } => &[],
        }
    }

    pub fn mc_destinations(&self) -> &[NodeId] {
        match self {
            Roles::Broadcast {
                mc_destinations, ..
            } => mc_destinations,
            Roles::MultiSource { .. } => &[],
        }
    }

    /// Every node with a role (not a relay).
    pub fn terminals(&self) -> NodeSet {
        match self {
            Roles::Broadcast {
                source,
                bc_destinations,
                mc_destinations,
            } => std::iter::once(*source)
                .chain(bc_destinations.iter().copied())
                .chain(mc_destinations.iter().copied())
                .collect(),
            Roles::MultiSource {
                sources,
                destination,
            } => sources.iter().copied().chain([*destination]).collect(),
        }
    }

    /// Nodes forced to the sending side and to the receiving side for the
    /// cut family of the flows in `targets` (bitmask over flow indices).
    pub fn cut_sides(&self, targets: u32) -> (NodeSet, NodeSet) {
        match self {
            Roles::Broadcast {
                source,
                bc_destinations,
                ..
            } => {
                let out = bc_destinations
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| targets >> j & 1 == 1)
                    .map(|(_, &d)| d)
                    .collect();
                (NodeSet::empty().with(*source), out)
            }
            Roles::MultiSource {
                sources,
                destination,
            } => {
                let inside = sources
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| targets >> j & 1 == 1)
                    .map(|(_, &s)| s)
                    .collect();
                (inside, NodeSet::empty().with(*destination))
            }
        }
    }

    /// Roles of the reciprocal network. Multicast destinations have no
    /// reciprocal counterpart.
    pub fn reciprocal(&self) -> Result<Roles> {
        match self {
            Roles::Broadcast {
                source,
                bc_destinations,
                mc_destinations,
            } => {
                if !mc_destinations.is_empty() {
                    return Err(Error::Reciprocal(
                        "networks with multicast destinations have no reciprocal".into(),
                    ));
                }
                Ok(Roles::MultiSource {
                    sources: bc_destinations.clone(),
                    destination: *source,
                })
            }
            Roles::MultiSource {
                sources,
                destination,
            } => Ok(Roles::Broadcast {
                source: *destination,
                bc_destinations: sources.clone(),
                mc_destinations: Vec::new(),
            }),
        }
    }
}

/// One invariant violation found by validation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, code: &'static str, message: impl Into<String>) {
        self.violations.push(Violation {
            code,
            message: message.into(),
        });
    }

    pub fn has(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub(crate) fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidNetwork(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  [{}] {}", v.code, v.message)?;
        }
        Ok(())
    }
}

/// Checks shared by both network kinds: node ranges, roles, self loops.
pub(crate) fn check_structure<'a>(
    node_count: usize,
    roles: &Roles,
    edges: impl Iterator<Item = &'a Edge>,
    report: &mut ValidationReport,
) {
    if node_count == 0 {
        report.push("no nodes", "network has no nodes");
    }
    if node_count > MAX_NODES {
        report.push(
            "too many nodes",
            format!("{node_count} nodes exceed the limit of {MAX_NODES}"),
        );
    }
    let in_range = |v: NodeId| v.0 < node_count;
    match roles {
        Roles::Broadcast {
            source,
            bc_destinations,
            mc_destinations,
        } => {
            if !in_range(*source) {
                report.push("unknown node", format!("source {source} out of range"));
            }
            if bc_destinations.is_empty() {
                report.push("no destinations", "at least one broadcast destination is required");
            }
            let all: Vec<NodeId> = bc_destinations.iter().chain(mc_destinations).copied().collect();
            for d in &all {
                if !in_range(*d) {
                    report.push("unknown node", format!("destination {d} out of range"));
                }
                if d == source {
                    report.push("source is destination", format!("node {d} is both source and destination"));
                }
            }
            let mut seen = all.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != all.len() {
                report.push("duplicate destination", "a node is listed as destination twice");
            }
        }
        Roles::MultiSource {
            sources,
            destination,
        } => {
            if sources.is_empty() {
                report.push("no sources", "at least one source is required");
            }
            for s in sources {
                if !in_range(*s) {
                    report.push("unknown node", format!("source {s} out of range"));
                }
                if s == destination {
                    report.push("source is destination", format!("node {s} is both source and destination"));
                }
            }
            if !in_range(*destination) {
                report.push("unknown node", format!("destination {destination} out of range"));
            }
        }
    }
    for e in edges {
        if !in_range(e.from) || !in_range(e.to) {
            report.push("unknown node", format!("edge {}->{} references a missing node", e.from, e.to));
        }
        if e.from == e.to {
            report.push("self gain", format!("self gain at node {} is not allowed", e.from));
        }
    }
}

/// Behaviour common to Gaussian and linear-deterministic networks.
pub trait RelayNetwork: Clone + Sized {
    type Gain: Clone;

    fn node_count(&self) -> usize;
    fn roles(&self) -> &Roles;
    fn gains(&self) -> &BTreeMap<Edge, Self::Gain>;

    /// Builds a network of the same kind over a new node set. `origin[v]`
    /// names the node of `self` that new node `v` copies per-node
    /// parameters (antenna counts) from, if any.
    fn rebuild(
        &self,
        node_count: usize,
        roles: Roles,
        gains: BTreeMap<Edge, Self::Gain>,
        origin: &[Option<NodeId>],
    ) -> Result<Self>;

    /// Transpose of a single gain for the reciprocal network.
    fn reciprocal_gain(gain: &Self::Gain) -> Self::Gain;

    fn edges(&self) -> Vec<Edge> {
        self.gains().keys().copied().collect()
    }

    /// Same topology with every link reversed and roles swapped.
    fn reciprocal(&self) -> Result<Self> {
        let roles = self.roles().reciprocal()?;
        let gains = self
            .gains()
            .iter()
            .map(|(e, g)| (e.reversed(), Self::reciprocal_gain(g)))
            .collect();
        let origin: Vec<Option<NodeId>> = (0..self.node_count()).map(|v| Some(NodeId(v))).collect();
        self.rebuild(self.node_count(), roles, gains, &origin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodeset_ops() {
        let s: NodeSet = [NodeId(0), NodeId(3), NodeId(100)].into_iter().collect();
        assert_eq!(s.len(), 3);
        assert!(s.contains(NodeId(100)));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![NodeId(0), NodeId(3), NodeId(100)]);
        let c = s.complement(4);
        assert_eq!(c.iter().collect::<Vec<_>>(), vec![NodeId(1), NodeId(2)]);
        assert_eq!(format!("{}", NodeSet::from_bits(0b1011)), "0xb");
    }

    #[test]
    fn reciprocal_roles_round_trip() {
        let r = Roles::broadcast(0, &[2, 3], &[]);
        let back = r.reciprocal().unwrap().reciprocal().unwrap();
        assert_eq!(r, back);
        assert!(Roles::broadcast(0, &[2], &[3]).reciprocal().is_err());
    }

    #[test]
    fn cut_sides_follow_targets() {
        let r = Roles::broadcast(0, &[2, 3], &[]);
        let (inside, outside) = r.cut_sides(0b10);
        assert_eq!(inside.iter().collect::<Vec<_>>(), vec![NodeId(0)]);
        assert_eq!(outside.iter().collect::<Vec<_>>(), vec![NodeId(3)]);
        let rr = r.reciprocal().unwrap();
        let (inside, outside) = rr.cut_sides(0b11);
        assert_eq!(inside.iter().collect::<Vec<_>>(), vec![NodeId(2), NodeId(3)]);
        assert_eq!(outside.iter().collect::<Vec<_>>(), vec![NodeId(0)]);
    }
}
