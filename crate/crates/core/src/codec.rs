//! Random linear coding over layered linear deterministic networks.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::cutset::{layered_min_cut, LdnRank};
use crate::error::{Error, Result};
use crate::ff::FpMatrix;
use crate::model::{LayeredNetwork, LdnNetwork, NodeId, RelayNetwork, Roles};
use crate::rng::derive_rng;

/// Largest precoder (entries) searched exhaustively.
pub const MAX_EXHAUSTIVE_PRECODER_ENTRIES: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RelayKind {
    Linear,
    Permutation,
}

/// One `q x q` matrix per transmitting relay.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelayAssignment {
    pub matrices: BTreeMap<NodeId, FpMatrix>,
}

/// Nodes that transmit but are not sources.
pub fn relays(net: &LdnNetwork) -> Vec<NodeId> {
    let sources = sources(net.roles());
    let mut out: Vec<NodeId> = net
        .edges()
        .iter()
        .map(|e| e.from)
        .filter(|v| !sources.contains(v))
        .collect();
    out.sort();
    out.dedup();
    out
}

fn sources(roles: &Roles) -> Vec<NodeId> {
    match roles {
        Roles::Broadcast { source, .. } => vec![*source],
        Roles::MultiSource { sources, .. } => sources.clone(),
    }
}

impl RelayAssignment {
    pub fn sample<R: Rng + ?Sized>(net: &LdnNetwork, kind: RelayKind, rng: &mut R) -> Result<Self> {
        let mut matrices = BTreeMap::new();
        for r in relays(net) {
            let m = match kind {
                RelayKind::Linear => FpMatrix::random(net.p(), net.q(), net.q(), rng)?,
                RelayKind::Permutation => FpMatrix::random_permutation(net.p(), net.q(), rng)?,
            };
            matrices.insert(r, m);
        }
        Ok(RelayAssignment { matrices })
    }

    pub fn identity(net: &LdnNetwork) -> Result<Self> {
        let mut matrices = BTreeMap::new();
        for r in relays(net) {
            matrices.insert(r, FpMatrix::identity(net.p(), net.q())?);
        }
        Ok(RelayAssignment { matrices })
    }

    /// Transposed matrices, used on the reciprocal network.
    pub fn transposed(&self) -> Self {
        RelayAssignment {
            matrices: self.matrices.iter().map(|(v, m)| (*v, m.transpose())).collect(),
        }
    }
}

/// Received block of every non-source node as a linear function of the
/// stacked source inputs (`q` columns per source).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndToEndTransfer {
    roles: Roles,
    q: usize,
    received: BTreeMap<NodeId, FpMatrix>,
}

impl EndToEndTransfer {
    pub fn received(&self, v: NodeId) -> Option<&FpMatrix> {
        self.received.get(&v)
    }

    /// Transfer matrix seen by the flows in `targets`: stacked destination
    /// blocks for a broadcast network, the sink's columns of the target
    /// sources for a multi-source network.
    pub fn stacked(&self, targets: u32) -> FpMatrix {
        match &self.roles {
            Roles::Broadcast { bc_destinations, .. } => {
                let parts: Vec<&FpMatrix> = bc_destinations
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| targets >> j & 1 == 1)
                    .map(|(_, d)| &self.received[d])
                    .collect();
                FpMatrix::vstack(&parts).expect("equal widths")
            }
            Roles::MultiSource { sources, destination } => {
                let cols: Vec<usize> = (0..sources.len())
                    .filter(|j| targets >> j & 1 == 1)
                    .flat_map(|j| j * self.q..(j + 1) * self.q)
                    .collect();
                self.received[destination].select_cols(&cols)
            }
        }
    }
}

/// Composes gains and relay matrices layer by layer.
pub fn end_to_end(layered: &LayeredNetwork<LdnNetwork>, relays: &RelayAssignment) -> Result<EndToEndTransfer> {
    layered.check()?;
    let net = layered.network();
    let (p, q) = (net.p(), net.q());
    let srcs = sources(net.roles());
    let cols = q * srcs.len();
    let mut sent: BTreeMap<NodeId, FpMatrix> = BTreeMap::new();
    for (j, &s) in srcs.iter().enumerate() {
        let mut x = FpMatrix::zeros(p, q, cols)?;
        x.set_block(0, j * q, &FpMatrix::identity(p, q)?)?;
        sent.insert(s, x);
    }
    let mut received = BTreeMap::new();
    for layer in &layered.layers()[1..] {
        for &v in layer {
            if srcs.contains(&v) {
                continue;
            }
            let mut y = FpMatrix::zeros(p, q, cols)?;
            for (e, g) in net.gains().iter().filter(|(e, _)| e.to == v) {
                let x = sent
                    .get(&e.from)
                    .ok_or_else(|| Error::Precondition(format!("node {} transmits before receiving", e.from)))?;
                y = y.add(&g.mul(x)?)?;
            }
            if net.gains().keys().any(|e| e.from == v) {
                let f = relays
                    .matrices
                    .get(&v)
                    .ok_or_else(|| Error::Precondition(format!("relay {v} has no mapping")))?;
                sent.insert(v, f.mul(&y)?);
            }
            received.insert(v, y);
        }
    }
    Ok(EndToEndTransfer {
        roles: net.roles().clone(),
        q,
        received,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    /// Rank for every nonempty flow subset, indexed by `mask - 1`.
    pub ranks: Vec<usize>,
    /// Whether every subset reached its minimum-cut rank.
    pub success: bool,
}

/// Minimum-cut rank for every nonempty flow subset, indexed by `mask - 1`.
pub fn min_cut_ranks(layered: &LayeredNetwork<LdnNetwork>) -> Result<Vec<usize>> {
    let flows = layered.network().roles().flow_count();
    (1u32..1 << flows)
        .map(|mask| Ok(layered_min_cut(layered, mask, &LdnRank(layered.network()))?.0))
        .collect()
}

/// Independent relay draws; trial `t` uses its own stream so the records
/// do not depend on evaluation order.
pub fn run_trials(
    layered: &LayeredNetwork<LdnNetwork>,
    trials: u64,
    seed: u64,
    kind: RelayKind,
) -> Result<Vec<TrialRecord>> {
    let cuts = min_cut_ranks(layered)?;
    (0..trials)
        .map(|t| {
            let mut rng = derive_rng(seed, "ldn-relays", t);
            let relays = RelayAssignment::sample(layered.network(), kind, &mut rng)?;
            let transfer = end_to_end(layered, &relays)?;
            let ranks: Vec<usize> = (1..=cuts.len() as u32).map(|m| transfer.stacked(m).rank()).collect();
            let success = ranks.iter().zip(&cuts).all(|(r, c)| r >= c);
            Ok(TrialRecord {
                trial: t,
                ranks,
                success,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AchievabilityReport {
    pub trials: u64,
    pub successes: u64,
    pub probability: f64,
    pub min_cut_rank: usize,
}

/// Fraction of relay draws whose transfer to the flows in `targets` reaches
/// the minimum-cut rank.
pub fn rank_achievability_trial(
    layered: &LayeredNetwork<LdnNetwork>,
    targets: u32,
    trials: u64,
    seed: u64,
    kind: RelayKind,
) -> Result<AchievabilityReport> {
    if trials == 0 {
        return Err(Error::Precondition("at least one trial is required".into()));
    }
    let (min_cut_rank, _) = layered_min_cut(layered, targets, &LdnRank(layered.network()))?;
    let mut successes = 0;
    for t in 0..trials {
        let mut rng = derive_rng(seed, "ldn-relays", t);
        let relays = RelayAssignment::sample(layered.network(), kind, &mut rng)?;
        if end_to_end(layered, &relays)?.stacked(targets).rank() >= min_cut_rank {
            successes += 1;
        }
    }
    Ok(AchievabilityReport {
        trials,
        successes,
        probability: successes as f64 / trials as f64,
        min_cut_rank,
    })
}

/// How a precoder was found.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderSearch {
    Greedy,
    Exhaustive,
}

fn column_blocks(rates: &[usize]) -> Vec<std::ops::Range<usize>> {
    let mut start = 0;
    rates
        .iter()
        .map(|&r| {
            let b = start..start + r;
            start += r;
            b
        })
        .collect()
}

/// Destination `j` recovers its block from `A_j P w` iff
/// `rank(A_j P) = r_j + rank(A_j P_{-j})`.
pub fn precoder_decodable(transfers: &[FpMatrix], rates: &[usize], precoder: &FpMatrix) -> Result<bool> {
    let blocks = column_blocks(rates);
    for (j, a) in transfers.iter().enumerate() {
        if rates[j] == 0 {
            continue;
        }
        let ap = a.mul(precoder)?;
        let others: Vec<usize> = (0..precoder.cols()).filter(|c| !blocks[j].contains(c)).collect();
        if ap.rank() != rates[j] + ap.select_cols(&others).rank() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Zero-forcing column choice: destination `j`'s columns lie in the common
/// kernel of every other destination's transfer.
fn greedy_precoder(transfers: &[FpMatrix], rates: &[usize], p: u32, q: usize) -> Result<Option<FpMatrix>> {
    let total: usize = rates.iter().sum();
    let mut precoder = FpMatrix::zeros(p, q, total)?;
    let blocks = column_blocks(rates);
    for (j, a) in transfers.iter().enumerate() {
        if rates[j] == 0 {
            continue;
        }
        let others: Vec<&FpMatrix> = transfers.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, m)| m).collect();
        let kernel = if others.is_empty() {
            FpMatrix::identity(p, q)?.to_rows()
        } else {
            FpMatrix::vstack(&others)?.kernel()
        };
        if kernel.len() < rates[j] {
            return Ok(None);
        }
        // kernel basis as columns of a q x k matrix
        let basis = FpMatrix::from_vec(
            p,
            q,
            kernel.len(),
            (0..q).flat_map(|r| kernel.iter().map(move |v| v[r])).collect(),
        )?;
        let (_, pivots) = a.mul(&basis)?.rref();
        if pivots.len() < rates[j] {
            return Ok(None);
        }
        for (c, &piv) in blocks[j].clone().zip(&pivots) {
            for r in 0..q {
                precoder.set(r, c, basis.get(r, piv));
            }
        }
    }
    Ok(precoder_decodable(transfers, rates, &precoder)?.then_some(precoder))
}

fn exhaustive_precoder(transfers: &[FpMatrix], rates: &[usize], p: u32, q: usize) -> Result<Option<FpMatrix>> {
    let total: usize = rates.iter().sum();
    let entries = q * total;
    let mut digits = vec![0u32; entries];
    loop {
        let candidate = FpMatrix::from_vec(p, q, total, digits.clone())?;
        if precoder_decodable(transfers, rates, &candidate)? {
            return Ok(Some(candidate));
        }
        let mut i = 0;
        loop {
            if i == entries {
                return Ok(None);
            }
            digits[i] += 1;
            if digits[i] < p {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Finds a source precoder for the rate vector (in p-ary symbols per
/// destination): zero-forcing first, then exhaustive search when the
/// precoder has at most [`MAX_EXHAUSTIVE_PRECODER_ENTRIES`] entries.
pub fn find_precoder(transfers: &[FpMatrix], rates: &[usize], p: u32, q: usize) -> Result<(FpMatrix, PrecoderSearch)> {
    if let Some(m) = greedy_precoder(transfers, rates, p, q)? {
        return Ok((m, PrecoderSearch::Greedy));
    }
    let entries = q * rates.iter().sum::<usize>();
    let space = (p as f64).powi(entries as i32);
    if entries <= MAX_EXHAUSTIVE_PRECODER_ENTRIES && space <= (1u64 << 20) as f64 {
        if let Some(m) = exhaustive_precoder(transfers, rates, p, q)? {
            return Ok((m, PrecoderSearch::Exhaustive));
        }
    }
    Err(Error::NoPrecoder)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundTrip {
    pub success: Vec<bool>,
    pub search: Option<PrecoderSearch>,
}

/// Checks `rates` against the rank region of this relay realization and
/// names the first violated subset (flow indices, zero based).
pub fn check_rank_region(transfer: &EndToEndTransfer, rates: &[usize]) -> Result<()> {
    for mask in 1u32..1 << rates.len() {
        let needed: usize = (0..rates.len()).filter(|j| mask >> j & 1 == 1).map(|j| rates[j]).sum();
        let rank = transfer.stacked(mask).rank();
        if needed > rank {
            return Err(Error::OutsideRankRegion {
                subset: (0..rates.len()).filter(|j| mask >> j & 1 == 1).collect(),
                needed,
                rank,
            });
        }
    }
    Ok(())
}

/// Sends independent uniform message blocks through a precoder and the
/// relays, and reports which destinations recover their block exactly.
pub fn encode_decode_roundtrip<R: Rng + ?Sized>(
    layered: &LayeredNetwork<LdnNetwork>,
    relays: &RelayAssignment,
    rates: &[usize],
    rng: &mut R,
) -> Result<RoundTrip> {
    let net = layered.network();
    let dests = net.roles().bc_destinations().to_vec();
    if !matches!(net.roles(), Roles::Broadcast { .. }) {
        return Err(Error::Precondition("round trips need a broadcast network".into()));
    }
    if rates.len() != dests.len() {
        return Err(Error::Dimension(format!("{} rates for {} destinations", rates.len(), dests.len())));
    }
    let transfer = end_to_end(layered, relays)?;
    check_rank_region(&transfer, rates)?;
    let total: usize = rates.iter().sum();
    if total == 0 {
        return Ok(RoundTrip {
            success: vec![true; dests.len()],
            search: None,
        });
    }
    let (p, q) = (net.p(), net.q());
    let transfers: Vec<FpMatrix> = dests.iter().map(|d| transfer.received(*d).expect("destination").clone()).collect();
    let (precoder, search) = find_precoder(&transfers, rates, p, q)?;
    let message: Vec<u32> = (0..total).map(|_| rng.random_range(0..p)).collect();
    let x = precoder.mul_vec(&message)?;
    let blocks = column_blocks(rates);
    let mut success = Vec::with_capacity(dests.len());
    for (j, a) in transfers.iter().enumerate() {
        let y = a.mul_vec(&x)?;
        let ap = a.mul(&precoder)?;
        let ok = match ap.solve(&y)? {
            Some(w) => w[blocks[j].clone()] == message[blocks[j].clone()],
            None => false,
        };
        success.push(ok);
    }
    Ok(RoundTrip {
        success,
        search: Some(search),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Roles;

    fn diamond(p: u32) -> LayeredNetwork<LdnNetwork> {
        let net = LdnNetwork::from_shifts(
            p,
            3,
            4,
            Roles::broadcast(0, &[3], &[]),
            &[(0, 1, 2), (0, 2, 1), (1, 3, 1), (2, 3, 2)],
        )
        .unwrap();
        LayeredNetwork::from_network(net).unwrap()
    }

    #[test]
    fn relay_free_transfer_is_the_gain() {
        let net = LdnNetwork::from_shifts(3, 2, 2, Roles::broadcast(0, &[1], &[]), &[(0, 1, 1)]).unwrap();
        let layered = LayeredNetwork::from_network(net.clone()).unwrap();
        let t = end_to_end(&layered, &RelayAssignment::identity(&net).unwrap()).unwrap();
        assert_eq!(t.stacked(1), *net.gain(NodeId(0), NodeId(1)).unwrap());
        let r = rank_achievability_trial(&layered, 1, 20, 1, RelayKind::Linear).unwrap();
        assert_eq!(r.probability, 1.0);
    }

    #[test]
    fn identity_relays_compose_gains() {
        let mut gains = BTreeMap::new();
        let mut rng = derive_rng(5, "chain", 0);
        let a = FpMatrix::random(5, 3, 3, &mut rng).unwrap();
        let b = FpMatrix::random(5, 3, 3, &mut rng).unwrap();
        gains.insert(crate::model::Edge::new(0, 1), a.clone());
        gains.insert(crate::model::Edge::new(1, 2), b.clone());
        let net = LdnNetwork::new(5, 3, 3, Roles::broadcast(0, &[2], &[]), gains).unwrap();
        let layered = LayeredNetwork::from_network(net.clone()).unwrap();
        let t = end_to_end(&layered, &RelayAssignment::identity(&net).unwrap()).unwrap();
        assert_eq!(t.stacked(1), b.mul(&a).unwrap());
    }

    #[test]
    fn rank_never_exceeds_cut() {
        let layered = diamond(2);
        let cut = min_cut_ranks(&layered).unwrap()[0];
        for rec in run_trials(&layered, 200, 3, RelayKind::Linear).unwrap() {
            assert!(rec.ranks[0] <= cut);
        }
    }

    #[test]
    fn large_field_almost_always_succeeds() {
        let r = rank_achievability_trial(&diamond(101), 1, 500, 9, RelayKind::Linear).unwrap();
        assert!(r.probability >= 0.95, "{r:?}");
    }

    #[test]
    fn trials_are_reproducible() {
        let a = run_trials(&diamond(2), 50, 7, RelayKind::Permutation).unwrap();
        let b = run_trials(&diamond(2), 50, 7, RelayKind::Permutation).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_and_full_rate_round_trips() {
        let net = LdnNetwork::from_shifts(2, 3, 2, Roles::broadcast(0, &[1], &[]), &[(0, 1, 3)]).unwrap();
        let layered = LayeredNetwork::from_network(net.clone()).unwrap();
        let relays = RelayAssignment::identity(&net).unwrap();
        let mut rng = derive_rng(1, "rt", 0);
        assert_eq!(encode_decode_roundtrip(&layered, &relays, &[0], &mut rng).unwrap().success, vec![true]);
        for _ in 0..20 {
            assert_eq!(encode_decode_roundtrip(&layered, &relays, &[3], &mut rng).unwrap().success, vec![true]);
        }
    }

    #[test]
    fn rates_outside_region_are_refused() {
        let net = LdnNetwork::from_shifts(2, 2, 3, Roles::broadcast(0, &[1, 2], &[]), &[(0, 1, 2), (0, 2, 1)]).unwrap();
        let layered = LayeredNetwork::from_network(net.clone()).unwrap();
        let relays = RelayAssignment::identity(&net).unwrap();
        let err = encode_decode_roundtrip(&layered, &relays, &[0, 2], &mut derive_rng(1, "rt", 0)).unwrap_err();
        match err {
            Error::OutsideRankRegion { subset, needed, rank } => {
                assert_eq!((subset, needed, rank), (vec![1], 2, 1));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn reciprocal_scheme_rank_matches() {
        let net = LdnNetwork::from_shifts(
            3,
            2,
            5,
            Roles::broadcast(0, &[3, 4], &[]),
            &[(0, 1, 2), (0, 2, 1), (1, 3, 1), (2, 3, 2), (1, 4, 2), (2, 4, 1)],
        )
        .unwrap();
        let fwd = LayeredNetwork::from_network(net.clone()).unwrap();
        let rev = LayeredNetwork::from_network(net.reciprocal().unwrap()).unwrap();
        for t in 0..30 {
            let relays = RelayAssignment::sample(&net, RelayKind::Linear, &mut derive_rng(2, "recip", t)).unwrap();
            let a = end_to_end(&fwd, &relays).unwrap();
            let b = end_to_end(&rev, &relays.transposed()).unwrap();
            for mask in 1..4 {
                assert_eq!(a.stacked(mask).rank(), b.stacked(mask).rank());
            }
        }
    }
}
