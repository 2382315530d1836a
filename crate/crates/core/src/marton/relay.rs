//! Random relay tables over level-1 blocks and the broadcast channel they
//! induce from the source to every receiving node.

use std::collections::{BTreeMap, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::cutset::ProductDist;
use crate::detnet::DetNet;
use crate::error::{Error, Result};
use crate::info::entropy;
use crate::model::NodeId;

/// Largest block alphabet tabulated (inputs of the source, rows of a
/// relay table).
pub const MAX_BLOCK_ALPHABET: u128 = 1 << 22;
/// Largest number of relay-table combinations enumerated for exact
/// expectations.
pub const MAX_TABLE_COMBINATIONS: u128 = 1 << 25;

fn block_size(symbols: usize, t1: usize, what: &'static str) -> Result<usize> {
    let n = (symbols as u128).checked_pow(t1 as u32).unwrap_or(u128::MAX);
    if n > MAX_BLOCK_ALPHABET {
        return Err(Error::cap(what, n, MAX_BLOCK_ALPHABET, "reduce T1 or the alphabets"));
    }
    Ok(n as usize)
}

/// Probability of every block of `t1` i.i.d. symbols; symbol 0 is the
/// least significant digit.
pub fn block_probs(dist: &[f64], t1: usize) -> Vec<f64> {
    let mut probs = vec![1.0];
    for _ in 0..t1 {
        let mut next = Vec::with_capacity(probs.len() * dist.len());
        for &d in dist {
            for &p in &probs {
                next.push(p * d);
            }
        }
        probs = next;
    }
    probs
}

fn check_dist(net: &DetNet, dist: &ProductDist) -> Result<()> {
    if dist.len() != net.node_count() {
        return Err(Error::Dimension(format!(
            "{} input distributions for {} nodes",
            dist.len(),
            net.node_count()
        )));
    }
    for (v, d) in dist.iter().enumerate() {
        let s: f64 = d.iter().sum();
        if d.len() != net.input_size(NodeId(v)) || (s - 1.0).abs() > 1e-9 || d.iter().any(|&p| p < 0.0) {
            return Err(Error::Precondition(format!("input distribution of node {v} is not a distribution over its alphabet")));
        }
    }
    Ok(())
}

/// Uniform inputs at every node.
pub fn uniform_dist(net: &DetNet) -> ProductDist {
    net.input_sizes().iter().map(|&k| vec![1.0 / k as f64; k]).collect()
}

/// Relay mappings for one level-2 block: `tables[r][y]` is the input
/// block relay `r` sends after receiving output block `y`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelayTables {
    pub t1: usize,
    pub tables: BTreeMap<NodeId, Vec<u64>>,
}

impl RelayTables {
    pub fn from_fn(net: &DetNet, t1: usize, mut f: impl FnMut(NodeId, u64) -> u64) -> Result<Self> {
        let mut tables = BTreeMap::new();
        for r in net.relays() {
            let rows = block_size(net.receiver(r).expect("relay").outputs, t1, "relay table rows")?;
            tables.insert(r, (0..rows as u64).map(|y| f(r, y)).collect());
        }
        Ok(RelayTables { t1, tables })
    }
}

pub fn sample_relay_tables<R: Rng + ?Sized>(net: &DetNet, dist: &ProductDist, t1: usize, rng: &mut R) -> Result<RelayTables> {
    check_dist(net, dist)?;
    let mut tables = BTreeMap::new();
    for r in net.relays() {
        let rows = block_size(net.receiver(r).expect("relay").outputs, t1, "relay table rows")?;
        block_size(net.input_size(r), t1, "relay input blocks")?;
        let w = WeightedIndex::new(&dist[r.0]).map_err(|e| Error::Precondition(e.to_string()))?;
        let k = net.input_size(r) as u64;
        let table = (0..rows)
            .map(|_| (0..t1).fold((0u64, 1u64), |(acc, base), _| (acc + base * w.sample(rng) as u64, base * k)).0)
            .collect();
        tables.insert(r, table);
    }
    Ok(RelayTables { t1, tables })
}

/// Pushes one source block through the network.
struct Propagator<'a> {
    net: &'a DetNet,
    t1: usize,
    order: Vec<NodeId>,
    cur: Vec<Vec<usize>>,
    raw: Vec<u64>,
}

impl<'a> Propagator<'a> {
    fn new(net: &'a DetNet, t1: usize) -> Self {
        Propagator {
            net,
            t1,
            order: net.receiving_nodes(),
            cur: vec![vec![0; net.node_count()]; t1],
            raw: vec![0; net.node_count()],
        }
    }

    /// Raw output blocks of the receiving nodes, in `order`.
    fn run(&mut self, x: u64, tables: &BTreeMap<NodeId, &[u64]>) {
        let net = self.net;
        let s = net.source();
        let ks = net.input_size(s) as u64;
        let mut rest = x;
        for t in 0..self.t1 {
            self.cur[t][s.0] = (rest % ks) as usize;
            rest /= ks;
        }
        for &v in &self.order {
            let r = net.receiver(v).expect("receiving");
            let base = r.outputs as u64;
            let mut y = 0u64;
            let mut place = 1u64;
            for t in 0..self.t1 {
                y += place * u64::from(r.output(&self.cur[t], net.input_sizes()));
                place *= base;
            }
            self.raw[v.0] = y;
            if let Some(table) = tables.get(&v) {
                let kv = net.input_size(v) as u64;
                let mut xv = table[y as usize];
                for t in 0..self.t1 {
                    self.cur[t][v.0] = (xv % kv) as usize;
                    xv /= kv;
                }
            }
        }
    }
}

/// End-to-end map from source blocks to the output blocks of every
/// receiving node under fixed relay tables.
///
/// Output blocks are renumbered per node; a joint letter is a distinct
/// tuple of outputs over all receiving nodes produced by an input of
/// positive probability.
#[derive(Clone, Debug, Serialize)]
pub struct InducedChannel {
    pub t1: usize,
    pub nodes: Vec<NodeId>,
    pub node_alphabets: Vec<Vec<u64>>,
    pub input_probs: Vec<f64>,
    /// `outputs[x][i]`: output of `nodes[i]` for input block `x`.
    pub outputs: Vec<Vec<u32>>,
    pub letters: Vec<Vec<u32>>,
    pub letter_probs: Vec<f64>,
    pub letter_of_input: Vec<Option<u32>>,
    /// Inputs producing each letter, with their probabilities.
    pub preimages: Vec<Vec<(u32, f64)>>,
}

impl InducedChannel {
    pub fn induce(net: &DetNet, dist: &ProductDist, tables: &RelayTables) -> Result<Self> {
        check_dist(net, dist)?;
        let t1 = tables.t1;
        let s = net.source();
        let count = block_size(net.input_size(s), t1, "source input blocks")?;
        for r in net.relays() {
            if !tables.tables.contains_key(&r) {
                return Err(Error::Precondition(format!("no table for relay {r}")));
            }
        }
        let borrowed: BTreeMap<NodeId, &[u64]> = tables.tables.iter().map(|(&k, v)| (k, v.as_slice())).collect();
        let mut prop = Propagator::new(net, t1);
        let nodes = prop.order.clone();
        let mut raw_out = Vec::with_capacity(count);
        for x in 0..count as u64 {
            prop.run(x, &borrowed);
            raw_out.push(nodes.iter().map(|v| prop.raw[v.0]).collect::<Vec<u64>>());
        }
        let node_alphabets: Vec<Vec<u64>> = (0..nodes.len())
            .map(|i| {
                let mut a: Vec<u64> = raw_out.iter().map(|o| o[i]).collect();
                a.sort_unstable();
                a.dedup();
                a
            })
            .collect();
        let outputs: Vec<Vec<u32>> = raw_out
            .iter()
            .map(|o| {
                o.iter()
                    .zip(&node_alphabets)
                    .map(|(y, a)| a.binary_search(y).expect("present") as u32)
                    .collect()
            })
            .collect();
        let input_probs = block_probs(&dist[s.0], t1);
        let mut letter_index: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut letters = Vec::new();
        let mut letter_probs = Vec::new();
        let mut preimages: Vec<Vec<(u32, f64)>> = Vec::new();
        let mut letter_of_input = vec![None; count];
        for (x, o) in outputs.iter().enumerate() {
            let p = input_probs[x];
            if p <= 0.0 {
                continue;
            }
            let id = *letter_index.entry(o.clone()).or_insert_with(|| {
                letters.push(o.clone());
                letter_probs.push(0.0);
                preimages.push(Vec::new());
                (letters.len() - 1) as u32
            });
            letter_probs[id as usize] += p;
            preimages[id as usize].push((x as u32, p));
            letter_of_input[x] = Some(id);
        }
        Ok(InducedChannel {
            t1,
            nodes,
            node_alphabets,
            input_probs,
            outputs,
            letters,
            letter_probs,
            letter_of_input,
            preimages,
        })
    }

    pub fn position(&self, v: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&u| u == v)
    }

    pub fn node_marginal(&self, pos: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.node_alphabets[pos].len()];
        for (l, &p) in self.letters.iter().zip(&self.letter_probs) {
            m[l[pos] as usize] += p;
        }
        m
    }

    /// Joint entropy of the output blocks at the given positions, in bits
    /// per level-1 block.
    pub fn entropy(&self, positions: &[usize]) -> f64 {
        let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (l, &p) in self.letters.iter().zip(&self.letter_probs) {
            *acc.entry(positions.iter().map(|&i| l[i]).collect()).or_insert(0.0) += p;
        }
        entropy(&acc.into_values().collect::<Vec<_>>())
    }

    /// Letter sequence produced by a sequence of input blocks; `None` for
    /// inputs of probability zero.
    pub fn letters_of(&self, block: &[u32]) -> Option<Vec<u32>> {
        block.iter().map(|&x| self.letter_of_input[x as usize]).collect()
    }

    /// Output sequence seen by the node at `pos`.
    pub fn node_sequence(&self, pos: usize, block: &[u32]) -> Vec<u32> {
        block.iter().map(|&x| self.outputs[x as usize][pos]).collect()
    }

    pub fn project(&self, pos: usize, letters: &[u32]) -> Vec<u32> {
        letters.iter().map(|&l| self.letters[l as usize][pos]).collect()
    }
}

/// Exact `E_F H(Y_targets | F)` over i.i.d. relay tables, in bits per
/// level-1 block, by enumerating every table combination of positive
/// probability.
pub fn expected_entropy(net: &DetNet, dist: &ProductDist, t1: usize, targets: &[NodeId]) -> Result<f64> {
    check_dist(net, dist)?;
    let relays = net.relays();
    let s = net.source();
    let count = block_size(net.input_size(s), t1, "source input blocks")?;
    let input_probs = block_probs(&dist[s.0], t1);
    // one digit per (relay, row); each digit ranges over the support of
    // the relay's block distribution
    let mut digits: Vec<(NodeId, usize)> = Vec::new();
    let mut supports: BTreeMap<NodeId, Vec<(u64, f64)>> = BTreeMap::new();
    let mut combos: u128 = 1;
    for &r in &relays {
        let rows = block_size(net.receiver(r).expect("relay").outputs, t1, "relay table rows")?;
        let probs = block_probs(&dist[r.0], t1);
        let support: Vec<(u64, f64)> =
            probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(x, &p)| (x as u64, p)).collect();
        for row in 0..rows {
            combos = combos.saturating_mul(support.len() as u128);
            digits.push((r, row));
        }
        supports.insert(r, support);
    }
    if combos > MAX_TABLE_COMBINATIONS {
        return Err(Error::cap(
            "relay table combinations",
            combos,
            MAX_TABLE_COMBINATIONS,
            "estimate by sampling relay tables instead",
        ));
    }
    let mut owned: BTreeMap<NodeId, Vec<u64>> = relays
        .iter()
        .map(|&r| (r, vec![supports[&r][0].0; block_size(net.receiver(r).expect("relay").outputs, t1, "rows").unwrap()]))
        .collect();
    let mut state = vec![0usize; digits.len()];
    let mut prop = Propagator::new(net, t1);
    let mut total = 0.0;
    let mut acc: Vec<(Vec<u64>, f64)> = Vec::with_capacity(count);
    loop {
        let weight: f64 = digits.iter().zip(&state).map(|((r, _), &i)| supports[r][i].1).product();
        {
            let borrowed: BTreeMap<NodeId, &[u64]> = owned.iter().map(|(&k, v)| (k, v.as_slice())).collect();
            acc.clear();
            for x in 0..count {
                if input_probs[x] <= 0.0 {
                    continue;
                }
                prop.run(x as u64, &borrowed);
                acc.push((targets.iter().map(|v| prop.raw[v.0]).collect(), input_probs[x]));
            }
        }
        acc.sort_by(|a, b| a.0.cmp(&b.0));
        let mut probs = Vec::with_capacity(acc.len());
        for (i, (k, p)) in acc.iter().enumerate() {
            if i > 0 && acc[i - 1].0 == *k {
                *probs.last_mut().unwrap() += p;
            } else {
                probs.push(*p);
            }
        }
        total += weight * entropy(&probs);
        // odometer
        let mut i = 0;
        loop {
            if i == digits.len() {
                return Ok(total);
            }
            let (r, row) = digits[i];
            state[i] += 1;
            if state[i] < supports[&r].len() {
                owned.get_mut(&r).unwrap()[row] = supports[&r][state[i]].0;
                break;
            }
            state[i] = 0;
            owned.get_mut(&r).unwrap()[row] = supports[&r][0].0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LayeredNetwork, LdnNetwork, Roles};
    use crate::rng::derive_rng;

    fn chain() -> DetNet {
        let net = LdnNetwork::from_shifts(2, 1, 3, Roles::broadcast(0, &[2], &[]), &[(0, 1, 1), (1, 2, 1)]).unwrap();
        DetNet::from_ldn(&LayeredNetwork::from_network(net).unwrap()).unwrap()
    }

    #[test]
    fn identity_relays_compose_gains() {
        let net = chain();
        let dist = uniform_dist(&net);
        let tables = RelayTables::from_fn(&net, 2, |_, y| y).unwrap();
        let ch = InducedChannel::induce(&net, &dist, &tables).unwrap();
        let d = ch.position(NodeId(2)).unwrap();
        for x in 0..4u32 {
            assert_eq!(ch.node_alphabets[d][ch.outputs[x as usize][d] as usize], u64::from(x));
        }
        assert!((ch.entropy(&[d]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_relays_give_constant_outputs() {
        let net = chain();
        let tables = RelayTables::from_fn(&net, 2, |_, _| 3).unwrap();
        let ch = InducedChannel::induce(&net, &uniform_dist(&net), &tables).unwrap();
        let d = ch.position(NodeId(2)).unwrap();
        assert_eq!(ch.node_alphabets[d].len(), 1);
        assert_eq!(ch.entropy(&[d]), 0.0);
    }

    #[test]
    fn sampled_entries_follow_the_input_law() {
        let net = DetNet::broadcast(2, &[vec![0, 1]]).unwrap();
        // a relay with a large output alphabet: chain over F_2^4 with T1 = 1
        let ldn = LdnNetwork::from_shifts(2, 4, 3, Roles::broadcast(0, &[2], &[]), &[(0, 1, 4), (1, 2, 4)]).unwrap();
        let chain = DetNet::from_ldn(&LayeredNetwork::from_network(ldn).unwrap()).unwrap();
        let mut dist = uniform_dist(&chain);
        dist[1] = (0..16).map(|x| if x == 0 { 0.5 } else { 0.5 / 15.0 }).collect();
        let mut zeros = 0usize;
        let mut n = 0usize;
        for t in 0..700 {
            let tables = sample_relay_tables(&chain, &dist, 1, &mut derive_rng(1, "tables", t)).unwrap();
            for &e in &tables.tables[&NodeId(1)] {
                n += 1;
                zeros += usize::from(e == 0);
            }
        }
        let sigma = (0.25 / n as f64).sqrt();
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 3.0 * sigma);
        assert!(net.relays().is_empty());
    }

    #[test]
    fn expected_entropy_of_a_single_relay_row() {
        // T1 = 1: the relay is a uniformly random map on {0,1}; half of
        // the maps are bijections
        let net = chain();
        let h = expected_entropy(&net, &uniform_dist(&net), 1, &[NodeId(2)]).unwrap();
        assert!((h - 0.5).abs() < 1e-12);
    }
}
