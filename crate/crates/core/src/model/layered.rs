use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Edge, NodeId, RelayNetwork, Roles};
use crate::error::{Error, Result};

/// What a node of a layered network stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeLabel {
    /// A node of a network that was already layered.
    Node(NodeId),
    /// Copy `v[k]` of an original node at time step `k`.
    Copy { node: NodeId, step: usize },
    /// Transmit buffer `T[k]`.
    TransmitBuffer { step: usize },
    /// Receive buffer `R_j[k]` of a destination.
    ReceiveBuffer { destination: NodeId, step: usize },
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeLabel::Node(v) => write!(f, "{v}"),
            NodeLabel::Copy { node, step } => write!(f, "{node}[{step}]"),
            NodeLabel::TransmitBuffer { step } => write!(f, "T[{step}]"),
            NodeLabel::ReceiveBuffer { destination, step } => write!(f, "R{destination}[{step}]"),
        }
    }
}

/// Which edge feeds a destination's receive buffer.
///
/// The construction text links `D_j[k]` to `D_j[k+1]`, which duplicates the
/// memory edge and leaves the receive buffer without input except at the
/// last step; the surrounding argument needs `D_j[k] -> R_j[k+1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BufferRule {
    /// Emit both edges.
    #[default]
    Both,
    /// Only `D_j[k] -> D_j[k+1]`; the final step still reaches `R_j[K+1]`.
    Literal,
    /// Only `D_j[k] -> R_j[k+1]`.
    Receive,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UnfoldOptions {
    pub buffer_rule: BufferRule,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Tx,
    Rx,
}

/// Static half-duplex schedule: one listen/transmit assignment per step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    steps: Vec<Vec<Mode>>,
}

impl Schedule {
    pub fn new(steps: Vec<Vec<Mode>>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::Schedule("schedule has no steps".into()));
        }
        let n = steps[0].len();
        for (k, s) in steps.iter().enumerate() {
            if s.len() != n {
                return Err(Error::Schedule(format!(
                    "step {} assigns {} nodes, step 1 assigns {n}",
                    k + 1,
                    s.len()
                )));
            }
        }
        Ok(Schedule { steps })
    }

    /// Every node in the same mode at every step.
    pub fn constant(len: usize, nodes: usize, mode: Mode) -> Self {
        Schedule {
            steps: vec![vec![mode; nodes]; len],
        }
    }

    /// Schedule whose step `k` (zero based) has node `v` in `Tx` iff bit
    /// `k * nodes + v` of `bits` is set.
    pub fn from_bits(len: usize, nodes: usize, bits: u64) -> Self {
        let steps = (0..len)
            .map(|k| {
                (0..nodes)
                    .map(|v| if bits >> (k * nodes + v) & 1 == 1 { Mode::Tx } else { Mode::Rx })
                    .collect()
            })
            .collect();
        Schedule { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.steps[0].len()
    }

    /// Mode of `v` at step `k`, one based as in the unfolding.
    pub fn mode(&self, k: usize, v: NodeId) -> Mode {
        self.steps[k - 1][v.0]
    }
}

/// Steps separated by `,`, one `T` or `R` per node, e.g. `TRR,RTR,RRT`.
impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let steps = s
            .split(',')
            .map(|step| {
                step.trim()
                    .chars()
                    .map(|c| match c {
                        'T' | 't' => Ok(Mode::Tx),
                        'R' | 'r' => Ok(Mode::Rx),
                        other => Err(Error::Schedule(format!("unknown mode {other:?}"))),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Schedule::new(steps)
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, step) in self.steps.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            for m in step {
                f.write_str(if *m == Mode::Tx { "T" } else { "R" })?;
            }
        }
        Ok(())
    }
}

/// A network whose nodes are partitioned into layers with every gain going
/// from one layer to the next. Buffer edges have infinite capacity and carry
/// no gain.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredNetwork<N> {
    network: N,
    layers: Vec<Vec<NodeId>>,
    layer_of: Vec<usize>,
    buffer_edges: Vec<Edge>,
    labels: Vec<NodeLabel>,
}

impl<N: RelayNetwork> LayeredNetwork<N> {
    /// Checks that `net` is already layered. Broadcast networks are layered
    /// by distance from the source, multi-source networks by distance to
    /// the sink.
    pub fn from_network(net: N) -> Result<Self> {
        let n = net.node_count();
        let edges = net.edges();
        let layer_of: Vec<usize> = match net.roles() {
            Roles::Broadcast { source, .. } => {
                let dist = bfs(n, *source, edges.iter().map(|e| (e.from.0, e.to.0)))?;
                dist
            }
            Roles::MultiSource { destination, .. } => {
                let dist = bfs(n, *destination, edges.iter().map(|e| (e.to.0, e.from.0)))?;
                let depth = *dist.iter().max().unwrap_or(&0);
                dist.iter().map(|d| depth - d).collect()
            }
        };
        for e in &edges {
            if layer_of[e.to.0] != layer_of[e.from.0] + 1 {
                return Err(Error::NotLayered(format!(
                    "gain {}->{} joins layers {} and {}",
                    e.from, e.to, layer_of[e.from.0], layer_of[e.to.0]
                )));
            }
        }
        let depth = *layer_of.iter().max().unwrap_or(&0);
        match net.roles() {
            Roles::Broadcast {
                bc_destinations,
                mc_destinations,
                ..
            } => {
                for d in bc_destinations.iter().chain(mc_destinations) {
                    if layer_of[d.0] != depth {
                        return Err(Error::NotLayered(format!("destination {d} is not in the last layer")));
                    }
                }
            }
            Roles::MultiSource { sources, .. } => {
                for s in sources {
                    if layer_of[s.0] != 0 {
                        return Err(Error::NotLayered(format!("source {s} is not in the first layer")));
                    }
                }
            }
        }
        let mut layers = vec![Vec::new(); depth + 1];
        for (v, &l) in layer_of.iter().enumerate() {
            layers[l].push(NodeId(v));
        }
        if layers[0].len() != 1 && matches!(net.roles(), Roles::Broadcast { .. }) {
            return Err(Error::NotLayered("first layer must hold only the source".into()));
        }
        Ok(LayeredNetwork {
            labels: (0..n).map(|v| NodeLabel::Node(NodeId(v))).collect(),
            network: net,
            layers,
            layer_of,
            buffer_edges: Vec::new(),
        })
    }

    /// Time unfolding over `depth` steps with full-duplex links.
    pub fn unfold(net: &N, depth: usize, options: UnfoldOptions) -> Result<Self> {
        Self::unfold_with(net, depth, options, |_, _, _| true)
    }

    /// Time unfolding where the link `a -> b` exists at gap `k` only if
    /// `a` transmits and `b` listens at step `k`.
    pub fn unfold_scheduled(net: &N, schedule: &Schedule, options: UnfoldOptions) -> Result<Self> {
        if schedule.node_count() != net.node_count() {
            return Err(Error::Schedule(format!(
                "schedule assigns {} nodes, network has {}",
                schedule.node_count(),
                net.node_count()
            )));
        }
        Self::unfold_with(net, schedule.len(), options, |k, a, b| {
            schedule.mode(k, a) == Mode::Tx && schedule.mode(k, b) == Mode::Rx
        })
    }

    fn unfold_with(
        net: &N,
        depth: usize,
        options: UnfoldOptions,
        active: impl Fn(usize, NodeId, NodeId) -> bool,
    ) -> Result<Self> {
        let n = net.node_count();
        if depth <= n {
            return Err(Error::UnfoldingDepth { depth, nodes: n });
        }
        let Roles::Broadcast {
            source,
            bc_destinations,
            mc_destinations,
        } = net.roles()
        else {
            return Err(Error::Precondition("unfolding needs a broadcast network".into()));
        };
        let dests: Vec<NodeId> = bc_destinations.iter().chain(mc_destinations).copied().collect();
        let width = n + 1 + dests.len();
        let copy = |v: NodeId, k: usize| NodeId(1 + (k - 1) * width + v.0);
        let tx = |k: usize| if k == 0 { NodeId(0) } else { NodeId(1 + (k - 1) * width + n) };
        let rx = |j: usize, k: usize| {
            if k == depth + 1 {
                NodeId(1 + depth * width + j)
            } else {
                NodeId(1 + (k - 1) * width + n + 1 + j)
            }
        };
        let total = 1 + depth * width + dests.len();

        let mut labels = vec![NodeLabel::TransmitBuffer { step: 0 }];
        let mut layers = vec![vec![NodeId(0)]];
        for k in 1..=depth {
            let mut layer = Vec::with_capacity(width);
            for v in 0..n {
                labels.push(NodeLabel::Copy { node: NodeId(v), step: k });
                layer.push(copy(NodeId(v), k));
            }
            labels.push(NodeLabel::TransmitBuffer { step: k });
            layer.push(tx(k));
            for (j, &d) in dests.iter().enumerate() {
                labels.push(NodeLabel::ReceiveBuffer { destination: d, step: k });
                layer.push(rx(j, k));
            }
            layers.push(layer);
        }
        let mut last = Vec::new();
        for (j, &d) in dests.iter().enumerate() {
            labels.push(NodeLabel::ReceiveBuffer { destination: d, step: depth + 1 });
            last.push(rx(j, depth + 1));
        }
        layers.push(last);
        debug_assert_eq!(labels.len(), total);

        let mut gains = BTreeMap::new();
        let mut buffers = Vec::new();
        let mut buffer = |a: NodeId, b: NodeId| {
            let e = Edge { from: a, to: b };
            if !buffers.contains(&e) {
                buffers.push(e);
            }
        };
        for k in 0..depth {
            buffer(tx(k), tx(k + 1));
            buffer(tx(k), copy(*source, k + 1));
        }
        for k in 1..depth {
            for (e, g) in net.gains() {
                if active(k, e.from, e.to) {
                    gains.insert(
                        Edge {
                            from: copy(e.from, k),
                            to: copy(e.to, k + 1),
                        },
                        g.clone(),
                    );
                }
            }
            for v in 0..n {
                buffer(copy(NodeId(v), k), copy(NodeId(v), k + 1));
            }
        }
        for k in 1..=depth {
            for (j, &d) in dests.iter().enumerate() {
                if k < depth {
                    buffer(rx(j, k), rx(j, k + 1));
                }
                let literal = k < depth;
                match options.buffer_rule {
                    BufferRule::Both => {
                        if literal {
                            buffer(copy(d, k), copy(d, k + 1));
                        }
                        buffer(copy(d, k), rx(j, k + 1));
                    }
                    BufferRule::Literal if literal => buffer(copy(d, k), copy(d, k + 1)),
                    BufferRule::Literal | BufferRule::Receive => buffer(copy(d, k), rx(j, k + 1)),
                }
            }
        }
        if depth >= 1 {
            for j in 0..dests.len() {
                buffer(rx(j, depth), rx(j, depth + 1));
            }
        }

        let roles = Roles::Broadcast {
            source: tx(0),
            bc_destinations: (0..bc_destinations.len()).map(|j| rx(j, depth + 1)).collect(),
            mc_destinations: (bc_destinations.len()..dests.len()).map(|j| rx(j, depth + 1)).collect(),
        };
        let origin: Vec<Option<NodeId>> = labels
            .iter()
            .map(|l| match l {
                NodeLabel::Copy { node, .. } => Some(*node),
                _ => None,
            })
            .collect();
        let network = net.rebuild(total, roles, gains, &origin)?;
        let mut layer_of = vec![0; total];
        for (l, layer) in layers.iter().enumerate() {
            for v in layer {
                layer_of[v.0] = l;
            }
        }
        buffers.sort();
        Ok(LayeredNetwork {
            network,
            layers,
            layer_of,
            buffer_edges: buffers,
            labels,
        })
    }

    pub fn network(&self) -> &N {
        &self.network
    }

    pub fn into_network(self) -> N {
        self.network
    }

    pub fn layers(&self) -> &[Vec<NodeId>] {
        &self.layers
    }

    pub fn layer_of(&self, v: NodeId) -> usize {
        self.layer_of[v.0]
    }

    pub fn buffer_edges(&self) -> &[Edge] {
        &self.buffer_edges
    }

    pub fn labels(&self) -> &[NodeLabel] {
        &self.labels
    }

    pub fn label(&self, v: NodeId) -> NodeLabel {
        self.labels[v.0]
    }

    /// Checks the layering invariants: source alone in layer 0,
    /// destinations in the last layer, every edge joining consecutive layers.
    pub fn check(&self) -> Result<()> {
        let roles = self.network.roles();
        if let Roles::Broadcast { source, .. } = roles {
            if self.layers[0] != vec![*source] {
                return Err(Error::NotLayered("first layer must hold only the source".into()));
            }
            let last = self.layers.len() - 1;
            for d in roles.bc_destinations().iter().chain(roles.mc_destinations()) {
                if self.layer_of[d.0] != last {
                    return Err(Error::NotLayered(format!("destination {d} is not in the last layer")));
                }
            }
        }
        for e in self.network.edges().iter().chain(&self.buffer_edges) {
            if self.layer_of[e.to.0] != self.layer_of[e.from.0] + 1 {
                return Err(Error::NotLayered(format!("edge {}->{} skips layers", e.from, e.to)));
            }
        }
        Ok(())
    }
}

fn bfs(n: usize, root: NodeId, arcs: impl Iterator<Item = (usize, usize)>) -> Result<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for (a, b) in arcs {
        adj[a].push(b);
    }
    let mut dist = vec![usize::MAX; n];
    dist[root.0] = 0;
    let mut queue = VecDeque::from([root.0]);
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
        }
    }
    if let Some(v) = dist.iter().position(|&d| d == usize::MAX) {
        return Err(Error::NotLayered(format!("node {v} is not connected to {root}")));
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LdnNetwork;

    fn chain() -> LdnNetwork {
        LdnNetwork::from_shifts(2, 2, 3, Roles::broadcast(0, &[2], &[]), &[(0, 1, 2), (1, 2, 1)]).unwrap()
    }

    #[test]
    fn layer_sizes_match_construction() {
        let net = chain();
        let u = LayeredNetwork::unfold(&net, 5, UnfoldOptions::default()).unwrap();
        assert_eq!(u.layers().len(), 7);
        assert_eq!(u.layers()[0].len(), 1);
        for k in 1..=5 {
            assert_eq!(u.layers()[k].len(), 3 + 1 + 1);
        }
        assert_eq!(u.layers()[6].len(), 1);
        u.check().unwrap();
    }

    #[test]
    fn depth_must_exceed_node_count() {
        let err = LayeredNetwork::unfold(&chain(), 3, UnfoldOptions::default()).unwrap_err();
        assert!(matches!(err, Error::UnfoldingDepth { depth: 3, nodes: 3 }));
    }

    #[test]
    fn single_edge_appears_in_every_gap() {
        let net = LdnNetwork::from_shifts(2, 1, 2, Roles::broadcast(0, &[1], &[]), &[(0, 1, 1)]).unwrap();
        let u = LayeredNetwork::unfold(&net, 3, UnfoldOptions::default()).unwrap();
        let steps: Vec<usize> = u
            .network()
            .edges()
            .iter()
            .map(|e| match u.label(e.from) {
                NodeLabel::Copy { step, .. } => step,
                _ => panic!("channel edge from a buffer"),
            })
            .collect();
        assert_eq!(steps, vec![1, 2]);
    }

    #[test]
    fn all_transmit_schedule_silences_every_link() {
        let net = chain();
        let s = Schedule::constant(4, 3, Mode::Tx);
        let u = LayeredNetwork::unfold_scheduled(&net, &s, UnfoldOptions::default()).unwrap();
        assert!(u.network().edges().is_empty());
    }

    #[test]
    fn alternating_schedule() {
        let net = chain();
        let s: Schedule = "TRR,RTR,TRR,RTR".parse().unwrap();
        let u = LayeredNetwork::unfold_scheduled(&net, &s, UnfoldOptions::default()).unwrap();
        let mut got: Vec<(usize, usize, usize)> = u
            .network()
            .edges()
            .iter()
            .map(|e| match (u.label(e.from), u.label(e.to)) {
                (NodeLabel::Copy { node: a, step }, NodeLabel::Copy { node: b, .. }) => (step, a.0, b.0),
                _ => panic!(),
            })
            .collect();
        got.sort();
        assert_eq!(got, vec![(1, 0, 1), (2, 1, 2), (3, 0, 1)]);
    }

    #[test]
    fn malformed_schedule_is_rejected() {
        assert!(matches!("TR,T".parse::<Schedule>(), Err(Error::Schedule(_))));
        let s: Schedule = "TR,RT,TR,RT".parse().unwrap();
        assert!(LayeredNetwork::unfold_scheduled(&chain(), &s, UnfoldOptions::default()).is_err());
        assert_eq!(s.to_string(), "TR,RT,TR,RT");
    }

    #[test]
    fn non_layered_network_is_rejected() {
        let net = LdnNetwork::from_shifts(2, 1, 3, Roles::broadcast(0, &[2], &[]), &[(0, 1, 1), (1, 2, 1), (0, 2, 1)])
            .unwrap();
        assert!(matches!(LayeredNetwork::from_network(net), Err(Error::NotLayered(_))));
        let layered = LayeredNetwork::from_network(chain()).unwrap();
        assert_eq!(layered.layers().len(), 3);
    }
}
