//! Finite deterministic layered networks: every receiving node's output is
//! a table over the product of its senders' input alphabets. Linear
//! deterministic networks, discrete superposition networks and explicit
//! broadcast channels all reduce to this form.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dsn::{round_lattice, DsnNetwork, Lattice};
use crate::error::{Error, Result};
use crate::model::{LayeredNetwork, LdnNetwork, NodeId, RelayNetwork, Roles};

/// Largest receiver table built.
pub const MAX_TABLE: u128 = 1 << 22;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Receiver {
    pub senders: Vec<NodeId>,
    /// Output index for every sender configuration; sender `senders[0]` is
    /// the least significant digit.
    pub table: Vec<u32>,
    pub outputs: usize,
}

impl Receiver {
    pub fn output(&self, inputs: &[usize], sizes: &[usize]) -> u32 {
        let mut idx = 0;
        for &s in self.senders.iter().rev() {
            idx = idx * sizes[s.0] + inputs[s.0];
        }
        self.table[idx]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetNet {
    roles: Roles,
    layers: Vec<Vec<NodeId>>,
    input_sizes: Vec<usize>,
    receivers: Vec<Option<Receiver>>,
    /// Lattice value of every output index, for networks built from a
    /// discrete superposition network.
    #[serde(skip)]
    lattice: Option<Vec<Vec<Lattice>>>,
}

fn transmitters<N: RelayNetwork>(net: &N) -> Vec<bool> {
    let mut t = vec![false; net.node_count()];
    for e in net.gains().keys() {
        t[e.from.0] = true;
    }
    t
}

fn table_size(senders: &[NodeId], sizes: &[usize]) -> Result<usize> {
    let total: u128 = senders.iter().map(|s| sizes[s.0] as u128).product();
    if total > MAX_TABLE {
        return Err(Error::cap("receiver table entries", total, MAX_TABLE, "reduce alphabets or fan-in"));
    }
    Ok(total as usize)
}

fn digits(mut idx: usize, senders: &[NodeId], sizes: &[usize], out: &mut [usize]) {
    for &s in senders {
        out[s.0] = idx % sizes[s.0];
        idx /= sizes[s.0];
    }
}

impl DetNet {
    /// Layered linear deterministic network; inputs and outputs of a node
    /// are vectors of `F_p^q` read as base-`p` numbers.
    pub fn from_ldn(layered: &LayeredNetwork<LdnNetwork>) -> Result<Self> {
        layered.check()?;
        let net = layered.network();
        let (p, q) = (net.p() as usize, net.q());
        let symbols = (p as u128).pow(q as u32);
        if symbols > MAX_TABLE {
            return Err(Error::cap("field vector alphabet", symbols, MAX_TABLE, "reduce p or q"));
        }
        let symbols = symbols as usize;
        let tx = transmitters(net);
        let sizes: Vec<usize> = tx.iter().map(|&t| if t { symbols } else { 1 }).collect();
        let to_vec = |mut x: usize| -> Vec<u32> {
            (0..q)
                .map(|_| {
                    let d = (x % p) as u32;
                    x /= p;
                    d
                })
                .collect()
        };
        let from_vec = |v: &[u32]| -> u32 { v.iter().rev().fold(0u32, |acc, &d| acc * p as u32 + d) };
        let mut receivers = vec![None; net.node_count()];
        let mut scratch = vec![0usize; net.node_count()];
        for v in 0..net.node_count() {
            let senders: Vec<NodeId> = net.gains().keys().filter(|e| e.to.0 == v).map(|e| e.from).collect();
            if senders.is_empty() {
                continue;
            }
            let len = table_size(&senders, &sizes)?;
            let mut table = Vec::with_capacity(len);
            for idx in 0..len {
                digits(idx, &senders, &sizes, &mut scratch);
                let mut y = vec![0u32; q];
                for &s in &senders {
                    let g = net.gain(s, NodeId(v)).expect("sender");
                    let part = g.mul_vec(&to_vec(scratch[s.0]))?;
                    for (a, b) in y.iter_mut().zip(part) {
                        *a = (*a + b) % p as u32;
                    }
                }
                table.push(from_vec(&y));
            }
            receivers[v] = Some(Receiver {
                senders,
                table,
                outputs: symbols,
            });
        }
        Ok(DetNet {
            roles: net.roles().clone(),
            layers: layered.layers().to_vec(),
            input_sizes: sizes,
            receivers,
            lattice: None,
        })
    }

    /// Layered discrete superposition network; the reachable lattice
    /// outputs of each node are numbered in sorted order.
    pub fn from_dsn(dsn: &DsnNetwork) -> Result<Self> {
        let layered = LayeredNetwork::from_network(dsn.base().clone())?;
        let tx = transmitters(dsn.base());
        let n = dsn.node_count();
        let sizes: Vec<usize> = (0..n).map(|v| if tx[v] { dsn.alphabet_size(NodeId(v)) } else { 1 }).collect();
        let mut receivers = vec![None; n];
        let mut lattice = vec![Vec::new(); n];
        let mut scratch = vec![0usize; n];
        for v in 0..n {
            let senders = dsn.senders(NodeId(v));
            if senders.is_empty() {
                continue;
            }
            let len = table_size(&senders, &sizes)?;
            let mut raw = Vec::with_capacity(len);
            for idx in 0..len {
                digits(idx, &senders, &sizes, &mut scratch);
                let mu: num_complex::Complex64 = senders
                    .iter()
                    .map(|&s| dsn.gain(s, NodeId(v)) * dsn.alphabet(s)[scratch[s.0]])
                    .sum();
                raw.push(round_lattice(mu));
            }
            let mut values: Vec<Lattice> = raw.clone();
            values.sort_by_key(|z| (z.re, z.im));
            values.dedup();
            let index: BTreeMap<(i32, i32), u32> =
                values.iter().enumerate().map(|(i, z)| ((z.re, z.im), i as u32)).collect();
            receivers[v] = Some(Receiver {
                senders,
                table: raw.iter().map(|z| index[&(z.re, z.im)]).collect(),
                outputs: values.len(),
            });
            lattice[v] = values;
        }
        Ok(DetNet {
            roles: dsn.base().roles().clone(),
            layers: layered.layers().to_vec(),
            input_sizes: sizes,
            receivers,
            lattice: Some(lattice),
        })
    }

    /// Single-hop broadcast channel: node 0 is the source with
    /// `input_size` symbols, node `j + 1` is destination `j` and sees
    /// `maps[j][x]`.
    pub fn broadcast(input_size: usize, maps: &[Vec<u32>]) -> Result<Self> {
        if input_size == 0 || maps.is_empty() {
            return Err(Error::Precondition("broadcast channel needs inputs and destinations".into()));
        }
        let mut receivers = vec![None];
        for (j, m) in maps.iter().enumerate() {
            if m.len() != input_size {
                return Err(Error::Dimension(format!(
                    "map of destination {j} has {} entries for {input_size} inputs",
                    m.len()
                )));
            }
            receivers.push(Some(Receiver {
                senders: vec![NodeId(0)],
                table: m.clone(),
                outputs: m.iter().max().map_or(1, |&x| x as usize + 1),
            }));
        }
        let dests: Vec<usize> = (1..=maps.len()).collect();
        let mut sizes = vec![1; maps.len() + 1];
        sizes[0] = input_size;
        Ok(DetNet {
            roles: Roles::broadcast(0, &dests, &[]),
            layers: vec![vec![NodeId(0)], (1..=maps.len()).map(NodeId).collect()],
            input_sizes: sizes,
            receivers,
            lattice: None,
        })
    }

    /// Same channel with some broadcast destinations turned into multicast
    /// destinations.
    pub fn with_roles(mut self, roles: Roles) -> Result<Self> {
        if roles.source()? != self.source() {
            return Err(Error::Precondition("roles must keep the source".into()));
        }
        for d in roles.bc_destinations().iter().chain(roles.mc_destinations()) {
            if self.receivers.get(d.0).is_none_or(Option::is_none) {
                return Err(Error::Precondition(format!("node {d} receives nothing")));
            }
        }
        self.roles = roles;
        Ok(self)
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn source(&self) -> NodeId {
        self.roles.source().expect("broadcast roles")
    }

    pub fn node_count(&self) -> usize {
        self.input_sizes.len()
    }

    pub fn layers(&self) -> &[Vec<NodeId>] {
        &self.layers
    }

    pub fn input_size(&self, v: NodeId) -> usize {
        self.input_sizes[v.0]
    }

    pub fn input_sizes(&self) -> &[usize] {
        &self.input_sizes
    }

    pub fn receiver(&self, v: NodeId) -> Option<&Receiver> {
        self.receivers[v.0].as_ref()
    }

    /// Nodes with an output, in layer order.
    pub fn receiving_nodes(&self) -> Vec<NodeId> {
        self.layers.iter().flatten().copied().filter(|v| self.receivers[v.0].is_some()).collect()
    }

    /// Receiving nodes that also transmit.
    pub fn relays(&self) -> Vec<NodeId> {
        let mut tx = vec![false; self.node_count()];
        for r in self.receivers.iter().flatten() {
            for s in &r.senders {
                tx[s.0] = true;
            }
        }
        self.receiving_nodes().into_iter().filter(|v| tx[v.0]).collect()
    }

    pub fn lattice_value(&self, v: NodeId, output: u32) -> Option<Lattice> {
        self.lattice.as_ref().map(|l| l[v.0][output as usize])
    }

    /// Outputs of every receiving node for one use, given every
    /// transmitter's input.
    pub fn step(&self, inputs: &[usize]) -> Vec<Option<u32>> {
        self.receivers
            .iter()
            .map(|r| r.as_ref().map(|r| r.output(inputs, &self.input_sizes)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsn::complex_grid;
    use crate::model::GaussianNetwork;
    use num_complex::Complex64;

    #[test]
    fn ldn_tables_match_matrix_products() {
        let net = LdnNetwork::from_shifts(
            2,
            2,
            4,
            Roles::broadcast(0, &[3], &[]),
            &[(0, 1, 1), (0, 2, 2), (1, 3, 2), (2, 3, 1)],
        )
        .unwrap();
        let d = DetNet::from_ldn(&LayeredNetwork::from_network(net).unwrap()).unwrap();
        assert_eq!(d.input_size(NodeId(0)), 4);
        assert_eq!(d.input_size(NodeId(3)), 1);
        // x = (1, 0): shift 1 moves x0 to row 1 -> value 2; shift 2 keeps it
        let out = d.step(&[1, 0, 0, 0]);
        assert_eq!(out[1], Some(2));
        assert_eq!(out[2], Some(1));
        assert_eq!(d.relays(), vec![NodeId(1), NodeId(2)]);
    }

    #[test]
    fn dsn_outputs_are_numbered_lattice_points() {
        let net = GaussianNetwork::scalar(2, Roles::broadcast(0, &[1], &[]), &[(0, 1, Complex64::new(8.0, 0.0))])
            .unwrap();
        let dsn = DsnNetwork::derive(&net, 1).unwrap();
        let d = DetNet::from_dsn(&dsn).unwrap();
        let r = d.receiver(NodeId(1)).unwrap();
        assert_eq!(r.outputs, 4);
        for x in 0..4 {
            let y = d.step(&[x, 0])[1].unwrap();
            let expect = round_lattice(Complex64::new(8.0, 0.0) * complex_grid(1)[x]);
            assert_eq!(d.lattice_value(NodeId(1), y), Some(expect));
        }
    }

    #[test]
    fn explicit_broadcast() {
        let d = DetNet::broadcast(3, &[vec![0, 0, 1], vec![0, 1, 1]]).unwrap();
        assert_eq!(d.step(&[1, 0, 0]), vec![None, Some(0), Some(1)]);
        assert!(d.relays().is_empty());
        assert!(DetNet::broadcast(3, &[vec![0, 1]]).is_err());
    }
}
