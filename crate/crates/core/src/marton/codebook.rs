//! Marton source codes over an induced broadcast channel, with optional
//! pruning of the output sets.

use std::collections::{BTreeSet, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::Serialize;

use super::relay::InducedChannel;
use super::typical::{is_typical, typical_set, DEFAULT_DELTA, DEFAULT_TYPICAL_CAP};
use crate::error::{Error, Result};
use crate::model::NodeId;
use crate::rng::derive_rng;

/// Largest message space enumerated by the multicast decoder.
pub const MAX_MESSAGE_SPACE: u128 = 1 << 20;

/// Pruning exponent of the asymptotic analysis for `n` nodes; far too
/// large for block lengths simulated here.
pub fn asymptotic_kappa(n: usize) -> f64 {
    (12.0 * n as f64 - 2.0).log2() + 11.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SchemeParams {
    pub t1: usize,
    pub t2: usize,
    pub t3: usize,
    pub delta: f64,
    pub kappa: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            t1: 1,
            t2: 8,
            t3: 1,
            delta: DEFAULT_DELTA,
            kappa: 0.0,
        }
    }
}

impl SchemeParams {
    pub fn check(&self) -> Result<()> {
        if self.t1 == 0 || self.t2 == 0 || self.t3 == 0 {
            return Err(Error::Precondition("block sizes must be positive".into()));
        }
        if !(self.delta > 0.0) || !(self.kappa >= 0.0) {
            return Err(Error::Precondition("need delta > 0 and kappa >= 0".into()));
        }
        Ok(())
    }

    /// Size of a pruned subset of a typical set of size `n`.
    pub fn pruned_size(&self, n: usize) -> usize {
        let exp = -(self.t1 as f64) * self.t2 as f64 * self.kappa;
        ((n as f64) * exp.exp2()).ceil() as usize
    }
}

/// Per receiving node: the randomly kept part `selected` of its typical
/// set, and the members `reachable` that extend to a jointly typical tuple
/// whose every component is kept.
#[derive(Clone, Debug, Serialize)]
pub struct PrunedSets {
    pub typical_sizes: Vec<usize>,
    pub selected: Vec<BTreeSet<Vec<u32>>>,
    pub reachable: Vec<BTreeSet<Vec<u32>>>,
}

fn joint_tuples(ch: &InducedChannel, params: &SchemeParams) -> Result<Vec<Vec<u32>>> {
    typical_set(&ch.letter_probs, params.t2, params.delta, DEFAULT_TYPICAL_CAP)
}

pub fn prune_sets<R: Rng + ?Sized>(ch: &InducedChannel, params: &SchemeParams, rng: &mut R) -> Result<PrunedSets> {
    params.check()?;
    let mut typical_sizes = Vec::new();
    let mut selected: Vec<BTreeSet<Vec<u32>>> = Vec::new();
    for (pos, &v) in ch.nodes.iter().enumerate() {
        let set = typical_set(&ch.node_marginal(pos), params.t2, params.delta, DEFAULT_TYPICAL_CAP)?;
        let keep = params.pruned_size(set.len());
        if keep == 0 {
            return Err(Error::EmptyPrunedSet(v));
        }
        typical_sizes.push(set.len());
        selected.push(index::sample(rng, set.len(), keep).into_iter().map(|i| set[i].clone()).collect());
    }
    let mut reachable = vec![BTreeSet::new(); ch.nodes.len()];
    for t in joint_tuples(ch, params)? {
        let parts: Vec<Vec<u32>> = (0..ch.nodes.len()).map(|p| ch.project(p, &t)).collect();
        if parts.iter().zip(&selected).all(|(s, set)| set.contains(s)) {
            for (r, s) in reachable.iter_mut().zip(parts) {
                r.insert(s);
            }
        }
    }
    Ok(PrunedSets {
        typical_sizes,
        selected,
        reachable,
    })
}

/// Outcome of encoding one message tuple.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Encoded {
    Codeword { tuple: usize, block: Vec<u32> },
    /// No jointly typical tuple lies in the requested bins; the source
    /// sends a random block instead.
    Failure { fallback: Vec<u32> },
}

impl Encoded {
    pub fn block(&self) -> &[u32] {
        match self {
            Encoded::Codeword { block, .. } => block,
            Encoded::Failure { fallback } => fallback,
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, Encoded::Failure { .. })
    }
}

#[derive(Clone, Debug)]
pub struct MartonCodebook {
    params: SchemeParams,
    channel: InducedChannel,
    seed: u64,
    destinations: Vec<usize>,
    bins: Vec<u64>,
    bin_of: Vec<HashMap<Vec<u32>, u64>>,
    tuples: Vec<Vec<u32>>,
    by_bins: HashMap<u128, u32>,
    source_weights: Vec<Option<WeightedIndex<f64>>>,
}

/// Number of bins for rate `r` bits per channel use.
pub fn bin_count(params: &SchemeParams, rate: f64) -> u64 {
    let e = params.t1 as f64 * params.t2 as f64 * rate;
    if e >= 63.0 {
        u64::MAX
    } else {
        // guard against 2^(log2 M) landing just below M
        (e.exp2() * (1.0 + 1e-12)).floor().max(1.0) as u64
    }
}

impl MartonCodebook {
    /// `destinations` are the broadcast destinations, one rate each, in
    /// bits per channel use.
    pub fn build(
        channel: &InducedChannel,
        destinations: &[NodeId],
        rates: &[f64],
        params: &SchemeParams,
        seed: u64,
        pruned: Option<&PrunedSets>,
    ) -> Result<Self> {
        params.check()?;
        if destinations.len() != rates.len() || destinations.is_empty() {
            return Err(Error::Dimension("one rate per destination".into()));
        }
        let mut positions = Vec::new();
        for &d in destinations {
            positions.push(
                channel
                    .position(d)
                    .ok_or_else(|| Error::Precondition(format!("node {d} receives nothing")))?,
            );
        }
        let bins: Vec<u64> = rates.iter().map(|&r| bin_count(params, r.max(0.0))).collect();
        let mut bin_of = Vec::new();
        for (j, (&pos, &m)) in positions.iter().zip(&bins).enumerate() {
            let mut members: Vec<Vec<u32>> = match pruned {
                Some(p) => {
                    let z = &p.reachable[pos];
                    if z.is_empty() {
                        return Err(Error::EmptyPrunedSet(destinations[j]));
                    }
                    z.iter().cloned().collect()
                }
                None => typical_set(&channel.node_marginal(pos), params.t2, params.delta, DEFAULT_TYPICAL_CAP)?,
            };
            if (members.len() as u64) < m {
                return Err(Error::RateTooHigh {
                    destination: destinations[j].0,
                    bins: m,
                    members: members.len(),
                });
            }
            members.shuffle(&mut derive_rng(seed, "bins", j as u64));
            bin_of.push(members.into_iter().enumerate().map(|(i, s)| (s, i as u64 % m)).collect::<HashMap<_, _>>());
        }
        let mut tuples = Vec::new();
        for t in joint_tuples(channel, params)? {
            let keep = match pruned {
                Some(p) => (0..channel.nodes.len()).all(|q| p.selected[q].contains(&channel.project(q, &t))),
                None => true,
            };
            if keep && positions.iter().zip(&bin_of).all(|(&q, b)| b.contains_key(&channel.project(q, &t))) {
                tuples.push(t);
            }
        }
        let mut order: Vec<u32> = (0..tuples.len() as u32).collect();
        order.shuffle(&mut derive_rng(seed, "encoder-order", 0));
        let mut book = MartonCodebook {
            params: *params,
            channel: channel.clone(),
            seed,
            destinations: positions,
            bins,
            bin_of,
            tuples,
            by_bins: HashMap::new(),
            source_weights: channel
                .preimages
                .iter()
                .map(|pre| WeightedIndex::new(pre.iter().map(|&(_, p)| p)).ok())
                .collect(),
        };
        for i in order {
            let key = book.pack(&book.bins_of_tuple(i as usize));
            book.by_bins.entry(key).or_insert(i);
        }
        Ok(book)
    }

    fn bins_of_tuple(&self, i: usize) -> Vec<u64> {
        let t = &self.tuples[i];
        self.destinations
            .iter()
            .zip(&self.bin_of)
            .map(|(&q, b)| b[&self.channel.project(q, t)])
            .collect()
    }

    fn pack(&self, messages: &[u64]) -> u128 {
        messages
            .iter()
            .zip(&self.bins)
            .rev()
            .fold(0u128, |acc, (&w, &m)| acc * u128::from(m) + u128::from(w))
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn channel(&self) -> &InducedChannel {
        &self.channel
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }

    /// Jointly typical tuples whose components are all binned.
    pub fn tuples(&self) -> &[Vec<u32>] {
        &self.tuples
    }

    /// Message tuples that have a codeword.
    pub fn covered(&self) -> usize {
        self.by_bins.len()
    }

    pub fn bin(&self, destination: usize, seq: &[u32]) -> Option<u64> {
        self.bin_of[destination].get(seq).copied()
    }

    /// Members of the binned set of a destination.
    pub fn binned_len(&self, destination: usize) -> usize {
        self.bin_of[destination].len()
    }

    /// Input block producing tuple `i`: each position draws a preimage of
    /// its letter from a stream keyed by the tuple.
    pub fn source_block(&self, i: usize) -> Vec<u32> {
        let mut rng = derive_rng(self.seed, "source-map", i as u64);
        self.tuples[i]
            .iter()
            .map(|&l| {
                let pre = &self.channel.preimages[l as usize];
                match &self.source_weights[l as usize] {
                    Some(w) => pre[w.sample(&mut rng)].0,
                    None => pre[0].0,
                }
            })
            .collect()
    }

    pub fn encode<R: Rng + ?Sized>(&self, messages: &[u64], rng: &mut R) -> Result<Encoded> {
        if messages.len() != self.bins.len() || messages.iter().zip(&self.bins).any(|(&w, &m)| w >= m) {
            return Err(Error::Precondition(format!("messages {messages:?} outside bins {:?}", self.bins)));
        }
        match self.by_bins.get(&self.pack(messages)) {
            Some(&i) => Ok(Encoded::Codeword {
                tuple: i as usize,
                block: self.source_block(i as usize),
            }),
            None => {
                let w = WeightedIndex::new(&self.channel.input_probs).map_err(|e| Error::Precondition(e.to_string()))?;
                Ok(Encoded::Failure {
                    fallback: (0..self.params.t2).map(|_| w.sample(rng) as u32).collect(),
                })
            }
        }
    }

    /// Bin of the received sequence at destination `destination` (index
    /// into the destinations passed to `build`), or `None` for an erasure.
    pub fn decode(&self, destination: usize, seq: &[u32]) -> Option<u64> {
        self.bin(destination, seq)
    }

    /// Sequences seen by every destination when `block` is sent.
    pub fn received(&self, block: &[u32]) -> Vec<Vec<u32>> {
        self.destinations.iter().map(|&q| self.channel.node_sequence(q, block)).collect()
    }

    /// Checks that every stored codeword reproduces its tuple; returns the
    /// number checked.
    pub fn verify_consistency(&self) -> Result<usize> {
        for i in 0..self.tuples.len() {
            let block = self.source_block(i);
            if self.channel.letters_of(&block).as_deref() != Some(self.tuples[i].as_slice()) {
                return Err(Error::Precondition(format!("codeword {i} does not reproduce its outputs")));
            }
        }
        Ok(self.tuples.len())
    }

    /// Decoder for a receiving node that wants every message.
    pub fn multicast_decoder(&self, node: NodeId) -> Result<MulticastDecoder> {
        let pos = self
            .channel
            .position(node)
            .ok_or_else(|| Error::Precondition(format!("node {node} receives nothing")))?;
        let space = self.bins.iter().fold(1u128, |a, &m| a.saturating_mul(u128::from(m)));
        if space > MAX_MESSAGE_SPACE {
            return Err(Error::cap("message space", space, MAX_MESSAGE_SPACE, "lower the rates or T2"));
        }
        let mut table: HashMap<Vec<u32>, Option<Vec<u64>>> = HashMap::new();
        let mut w = vec![0u64; self.bins.len()];
        'all: loop {
            if let Some(&i) = self.by_bins.get(&self.pack(&w)) {
                let seq = self.channel.project(pos, &self.tuples[i as usize]);
                table
                    .entry(seq)
                    .and_modify(|e| *e = None)
                    .or_insert_with(|| Some(w.clone()));
            }
            for j in 0..w.len() {
                w[j] += 1;
                if w[j] < self.bins[j] {
                    continue 'all;
                }
                w[j] = 0;
            }
            break;
        }
        Ok(MulticastDecoder {
            position: pos,
            dist: self.channel.node_marginal(pos),
            delta: self.params.delta,
            table,
        })
    }
}

/// Typical-set decoding of the whole message tuple from one node's output.
#[derive(Clone, Debug)]
pub struct MulticastDecoder {
    pub position: usize,
    dist: Vec<f64>,
    delta: f64,
    table: HashMap<Vec<u32>, Option<Vec<u64>>>,
}

impl MulticastDecoder {
    /// The unique message tuple whose codeword produces `seq`; `None` when
    /// there is none, several, or `seq` is atypical.
    pub fn decode(&self, seq: &[u32]) -> Option<Vec<u64>> {
        if !is_typical(seq, &self.dist, self.delta) {
            return None;
        }
        self.table.get(seq).cloned().flatten()
    }
}
