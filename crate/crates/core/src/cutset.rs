//! Cut enumeration, cut values and cut-set rate regions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::Hash;
use std::ops::Add;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::dsn::{round_lattice, DsnNetwork, Lattice};
use crate::error::{Error, Result};
use crate::ff::FpMatrix;
use crate::info::{entropy, miller_madow};
use crate::model::{
    CMatrix, Edge, GaussianNetwork, LayeredNetwork, LdnNetwork, NodeId, NodeSet, RelayNetwork, Roles,
};

/// Plain networks with more nodes than this are refused by exhaustive
/// enumeration.
pub const MAX_ENUMERATION_NODES: usize = 24;

/// Cap on cuts listed for networks with buffer edges.
pub const MAX_ENUMERATED_CUTS: u128 = 1 << 24;

/// Cap on input configurations visited by exact discrete cut values.
pub const DEFAULT_DSN_CAP: u128 = 1 << 20;

/// Widest layer accepted by the layer-by-layer minimum cut.
pub const MAX_LAYER_WIDTH: usize = 20;

/// Relative tolerance for covariance checks.
pub const COVARIANCE_TOL: f64 = 1e-9;

/// Something whose node partitions can be enumerated.
pub trait CutGraph {
    fn graph_node_count(&self) -> usize;
    fn graph_roles(&self) -> &Roles;
    /// Infinite-capacity edges; a cut may not separate one forward.
    fn buffer_edges(&self) -> &[Edge] {
        &[]
    }
}

impl<N: RelayNetwork> CutGraph for N {
    fn graph_node_count(&self) -> usize {
        self.node_count()
    }

    fn graph_roles(&self) -> &Roles {
        self.roles()
    }
}

impl<N: RelayNetwork> CutGraph for LayeredNetwork<N> {
    fn graph_node_count(&self) -> usize {
        self.network().node_count()
    }

    fn graph_roles(&self) -> &Roles {
        self.network().roles()
    }

    fn buffer_edges(&self) -> &[Edge] {
        LayeredNetwork::buffer_edges(self)
    }
}

impl CutGraph for DsnNetwork {
    fn graph_node_count(&self) -> usize {
        self.base().node_count()
    }

    fn graph_roles(&self) -> &Roles {
        self.base().roles()
    }
}

/// A node partition; `omega` is the sending side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Cut {
    pub omega: NodeSet,
}

impl fmt::Display for Cut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.omega.fmt(f)
    }
}

/// Cuts in `Λ_J` for the flows in `targets` (bitmask over flow indices).
pub fn enumerate_cuts<G: CutGraph + ?Sized>(g: &G, targets: u32) -> Result<Vec<Cut>> {
    let flows = g.graph_roles().flow_count();
    if targets == 0 {
        return Err(Error::Precondition("target set is empty".into()));
    }
    if flows < 32 && targets >> flows != 0 {
        return Err(Error::Precondition(format!(
            "target mask {targets:#b} names flows beyond the {flows} present"
        )));
    }
    let (inside, outside) = g.graph_roles().cut_sides(targets);
    enumerate_between(g, inside, outside)
}

/// All cuts with `inside ⊆ Ω` and `outside ⊆ Ω^c` that do not cut a
/// buffer edge forward.
pub fn enumerate_between<G: CutGraph + ?Sized>(g: &G, inside: NodeSet, outside: NodeSet) -> Result<Vec<Cut>> {
    let n = g.graph_node_count();
    let buffers = g.buffer_edges();
    if buffers.is_empty() && n > MAX_ENUMERATION_NODES {
        return Err(Error::cap(
            "nodes for exhaustive cut enumeration",
            n as u128,
            MAX_ENUMERATION_NODES as u128,
            "reduce the node count",
        ));
    }
    let mut out = Vec::new();
    let Some((inn, outs)) = propagate(inside, outside, buffers) else {
        return Ok(out);
    };
    let mut count: u128 = 0;
    dfs_cuts(n, buffers, inn, outs, 0, &mut count, &mut out)?;
    Ok(out)
}

fn propagate(mut inn: NodeSet, mut out: NodeSet, buffers: &[Edge]) -> Option<(NodeSet, NodeSet)> {
    if !NodeSet::from_bits(inn.bits() & out.bits()).is_empty() {
        return None;
    }
    loop {
        let mut changed = false;
        for e in buffers {
            if inn.contains(e.from) && !inn.contains(e.to) {
                if out.contains(e.to) {
                    return None;
                }
                inn.insert(e.to);
                changed = true;
            }
            if out.contains(e.to) && !out.contains(e.from) {
                if inn.contains(e.from) {
                    return None;
                }
                out.insert(e.from);
                changed = true;
            }
        }
        if !changed {
            return Some((inn, out));
        }
    }
}

fn dfs_cuts(
    n: usize,
    buffers: &[Edge],
    inn: NodeSet,
    out: NodeSet,
    from: usize,
    count: &mut u128,
    acc: &mut Vec<Cut>,
) -> Result<()> {
    let decided = inn.bits() | out.bits();
    let next = (from..n).find(|&v| decided >> v & 1 == 0);
    let Some(v) = next else {
        *count += 1;
        if *count > MAX_ENUMERATED_CUTS {
            return Err(Error::cap(
                "enumerated cuts",
                *count,
                MAX_ENUMERATED_CUTS,
                "use the layered minimum cut instead of listing cuts",
            ));
        }
        acc.push(Cut { omega: inn });
        return Ok(());
    };
    if let Some((i, o)) = propagate(inn.with(NodeId(v)), out, buffers) {
        dfs_cuts(n, buffers, i, o, v + 1, count, acc)?;
    }
    if let Some((i, o)) = propagate(inn, out.with(NodeId(v)), buffers) {
        dfs_cuts(n, buffers, i, o, v + 1, count, acc)?;
    }
    Ok(())
}

/// A cut value that can be evaluated between any sending set and any
/// receiving set, so that values of layered networks split per layer gap.
pub trait CutMetric {
    type Value: Copy + PartialOrd + Add<Output = Self::Value> + Default + fmt::Debug;

    fn node_count(&self) -> usize;

    /// Value of the information flow from `from` to `to`; nodes in neither
    /// set are treated as known to the receiving side.
    fn between(&self, from: NodeSet, to: NodeSet) -> Result<Self::Value>;

    fn cut_value(&self, cut: &Cut) -> Result<Self::Value> {
        self.between(cut.omega, cut.omega.complement(self.node_count()))
    }
}

/// Stacked transfer matrix `G_{from,to}`: block `(l, k)` is `G_{kl}`.
pub fn ldn_transfer(net: &LdnNetwork, from: NodeSet, to: NodeSet) -> FpMatrix {
    let q = net.q();
    let senders: Vec<NodeId> = from.iter().collect();
    let receivers: Vec<NodeId> = to.iter().collect();
    let mut m = FpMatrix::zeros(net.p(), q * receivers.len(), q * senders.len()).expect("validated field");
    for (r, &l) in receivers.iter().enumerate() {
        for (c, &k) in senders.iter().enumerate() {
            if let Some(g) = net.gain(k, l) {
                m.set_block(r * q, c * q, g).expect("block fits");
            }
        }
    }
    m
}

/// `rank G_{Ω,Ω^c}` over F_p.
pub fn ldn_cut_rank(net: &LdnNetwork, cut: &Cut) -> usize {
    ldn_transfer(net, cut.omega, cut.omega.complement(net.node_count())).rank()
}

/// Cut value in bits per channel use: rank times `log2 p`.
pub fn ldn_cut_value(net: &LdnNetwork, cut: &Cut) -> f64 {
    ldn_cut_rank(net, cut) as f64 * f64::from(net.p()).log2()
}

/// Rank metric for linear deterministic networks.
pub struct LdnRank<'a>(pub &'a LdnNetwork);

impl CutMetric for LdnRank<'_> {
    type Value = usize;

    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    fn between(&self, from: NodeSet, to: NodeSet) -> Result<usize> {
        Ok(ldn_transfer(self.0, from, to).rank())
    }
}

/// Bits metric for linear deterministic networks.
pub struct LdnBits<'a>(pub &'a LdnNetwork);

impl CutMetric for LdnBits<'_> {
    type Value = f64;

    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    fn between(&self, from: NodeSet, to: NodeSet) -> Result<f64> {
        Ok(ldn_transfer(self.0, from, to).rank() as f64 * f64::from(self.0.p()).log2())
    }
}

/// Antenna-expanded transfer matrix from `from` to `to`.
pub fn gaussian_transfer(net: &GaussianNetwork, from: NodeSet, to: NodeSet) -> CMatrix {
    let ant = net.antennas();
    let rows: usize = to.iter().map(|v| ant[v.0]).sum();
    let cols: usize = from.iter().map(|v| ant[v.0]).sum();
    let mut h = CMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for l in to.iter() {
        let mut c0 = 0;
        for k in from.iter() {
            if let Some(g) = net.gain(k, l) {
                h.view_mut((r0, c0), (g.nrows(), g.ncols())).copy_from(g);
            }
            c0 += ant[k.0];
        }
        r0 += ant[l.0];
    }
    h
}

/// `log2 det M` for a Hermitian positive definite `M`.
pub fn log2_det_hpd(m: &CMatrix) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    match m.clone().cholesky() {
        Some(ch) => Ok(ch.l().diagonal().iter().map(|d| 2.0 * d.re.log2()).sum()),
        None => {
            let eig = m.clone().symmetric_eigen();
            if eig.eigenvalues.iter().any(|&e| e <= 0.0) {
                return Err(Error::Covariance("matrix is not positive definite".into()));
            }
            Ok(eig.eigenvalues.iter().map(|e| e.log2()).sum())
        }
    }
}

/// Checks that `k` is Hermitian positive semidefinite with unit-bounded
/// diagonal, within [`COVARIANCE_TOL`].
pub fn check_covariance(k: &CMatrix) -> Result<()> {
    if k.nrows() != k.ncols() {
        return Err(Error::Covariance(format!("covariance is {}x{}", k.nrows(), k.ncols())));
    }
    let scale = k.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = COVARIANCE_TOL * scale;
    if (k - k.adjoint()).iter().any(|z| z.norm() > tol) {
        return Err(Error::Covariance("covariance is not Hermitian".into()));
    }
    for i in 0..k.nrows() {
        if k[(i, i)].re > 1.0 + tol {
            return Err(Error::Covariance(format!(
                "diagonal entry {i} is {:.6}, above the unit power limit",
                k[(i, i)].re
            )));
        }
    }
    let herm = (k + k.adjoint()).scale(0.5);
    let min = herm.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::Covariance(format!(
            "covariance has negative eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

/// `log2 det(I + H K_Ω H*)` across the cut. `covariance` covers every
/// antenna of the network (`M x M`); its `Ω` block is used. The default is
/// the identity.
pub fn gaussian_cut_value(net: &GaussianNetwork, cut: &Cut, covariance: Option<&CMatrix>) -> Result<f64> {
    let n = net.node_count();
    let h = gaussian_transfer(net, cut.omega, cut.omega.complement(n));
    let gram = match covariance {
        None => &h * h.adjoint(),
        Some(k) => {
            check_covariance(k)?;
            let total = net.total_antennas();
            if k.nrows() != total {
                return Err(Error::Covariance(format!(
                    "covariance is {}x{}, network has {total} antennas",
                    k.nrows(),
                    k.ncols()
                )));
            }
            let mut offsets = Vec::with_capacity(n);
            let mut acc = 0;
            for &m in net.antennas() {
                offsets.push(acc);
                acc += m;
            }
            let idx: Vec<usize> = cut
                .omega
                .iter()
                .flat_map(|v| offsets[v.0]..offsets[v.0] + net.antennas()[v.0])
                .collect();
            let k_omega = DMatrix::from_fn(idx.len(), idx.len(), |r, c| k[(idx[r], idx[c])]);
            &h * k_omega * h.adjoint()
        }
    };
    let m = DMatrix::<Complex64>::identity(gram.nrows(), gram.ncols()) + gram;
    let m = (&m + m.adjoint()).scale(0.5);
    log2_det_hpd(&m)
}

/// Gaussian metric with i.i.d. unit-power inputs.
pub struct GaussianLogDet<'a>(pub &'a GaussianNetwork);

impl CutMetric for GaussianLogDet<'_> {
    type Value = f64;

    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    fn between(&self, from: NodeSet, to: NodeSet) -> Result<f64> {
        let h = gaussian_transfer(self.0, from, to);
        let m = DMatrix::<Complex64>::identity(h.nrows(), h.nrows()) + &h * h.adjoint();
        log2_det_hpd(&((&m + m.adjoint()).scale(0.5)))
    }
}

/// Product input distribution: one probability vector per node alphabet.
pub type ProductDist = Vec<Vec<f64>>;

pub fn uniform_inputs(dsn: &DsnNetwork) -> ProductDist {
    (0..dsn.node_count())
        .map(|v| {
            let m = dsn.alphabet_size(NodeId(v));
            vec![1.0 / m as f64; m]
        })
        .collect()
}

fn check_dist(dsn: &DsnNetwork, dist: &ProductDist) -> Result<()> {
    if dist.len() != dsn.node_count() {
        return Err(Error::Dimension(format!(
            "{} input distributions for {} nodes",
            dist.len(),
            dsn.node_count()
        )));
    }
    for (v, d) in dist.iter().enumerate() {
        if d.len() != dsn.alphabet_size(NodeId(v)) {
            return Err(Error::Dimension(format!("distribution of node {v} has the wrong length")));
        }
        let s: f64 = d.iter().sum();
        if d.iter().any(|&p| !(p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!("distribution of node {v} is not a probability vector")));
        }
    }
    Ok(())
}

/// Cut geometry for discrete cut values: receivers on the far side, the
/// senders whose inputs vary, and those whose inputs are conditioned on.
struct DsnGeometry {
    receivers: Vec<NodeId>,
    varying: Vec<NodeId>,
    known: Vec<NodeId>,
}

fn dsn_geometry(dsn: &DsnNetwork, from: NodeSet, to: NodeSet) -> DsnGeometry {
    let mut receivers = Vec::new();
    let mut senders = BTreeSet::new();
    for l in to.iter() {
        let s = dsn.senders(l);
        if !s.is_empty() {
            receivers.push(l);
            senders.extend(s);
        }
    }
    let (varying, known) = senders.into_iter().partition(|v| from.contains(*v));
    DsnGeometry {
        receivers,
        varying,
        known,
    }
}

/// Mixed-radix counter over the alphabets of `nodes`.
fn configurations(dsn: &DsnNetwork, nodes: &[NodeId]) -> u128 {
    nodes.iter().map(|&v| dsn.alphabet_size(v) as u128).product()
}

fn next_config(digits: &mut [usize], radix: &[usize]) -> bool {
    for (d, &r) in digits.iter_mut().zip(radix) {
        *d += 1;
        if *d < r {
            return true;
        }
        *d = 0;
    }
    false
}

/// Packs lattice outputs into a `u128` when they fit, else into a vector.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum OutputKey {
    Packed(u128),
    Wide(Vec<i32>),
}

fn output_key(ys: &[Lattice]) -> OutputKey {
    let fits = ys.len() <= 4
        && ys
            .iter()
            .all(|y| i16::try_from(y.re).is_ok() && i16::try_from(y.im).is_ok());
    if fits {
        let mut k: u128 = 0;
        for y in ys {
            k = k << 32 | u128::from(y.re as i16 as u16) << 16 | u128::from(y.im as i16 as u16);
        }
        OutputKey::Packed(k)
    } else {
        OutputKey::Wide(ys.iter().flat_map(|y| [y.re, y.im]).collect())
    }
}

/// Exact `H(Y_to | X_known)` where the inputs of `from` vary; `cap` bounds
/// the number of input configurations visited.
pub fn dsn_between(dsn: &DsnNetwork, from: NodeSet, to: NodeSet, dist: &ProductDist, cap: u128) -> Result<f64> {
    check_dist(dsn, dist)?;
    let geo = dsn_geometry(dsn, from, to);
    let total = configurations(dsn, &geo.varying).saturating_mul(configurations(dsn, &geo.known));
    if total > cap {
        return Err(Error::cap(
            "input configurations for exact discrete cut value",
            total,
            cap,
            "use the Monte Carlo estimator",
        ));
    }
    if geo.receivers.is_empty() || geo.varying.is_empty() {
        return Ok(0.0);
    }
    let gain = |k: NodeId, l: NodeId| dsn.gain(k, l);
    let radix_known: Vec<usize> = geo.known.iter().map(|&v| dsn.alphabet_size(v)).collect();
    let radix_vary: Vec<usize> = geo.varying.iter().map(|&v| dsn.alphabet_size(v)).collect();
    let mut known = vec![0usize; geo.known.len()];
    let mut value = 0.0;
    let mut ys = vec![Lattice::new(0, 0); geo.receivers.len()];
    loop {
        let pk: f64 = geo.known.iter().zip(&known).map(|(v, &x)| dist[v.0][x]).product();
        if pk > 0.0 {
            let base: Vec<Complex64> = geo
                .receivers
                .iter()
                .map(|&l| {
                    geo.known
                        .iter()
                        .zip(&known)
                        .map(|(&k, &x)| gain(k, l) * dsn.alphabet(k)[x])
                        .sum()
                })
                .collect();
            let mut acc: BTreeMap<OutputKey, f64> = BTreeMap::new();
            let mut vary = vec![0usize; geo.varying.len()];
            loop {
                let pv: f64 = geo.varying.iter().zip(&vary).map(|(v, &x)| dist[v.0][x]).product();
                if pv > 0.0 {
                    for (i, &l) in geo.receivers.iter().enumerate() {
                        let mut s = base[i];
                        for (&k, &x) in geo.varying.iter().zip(&vary) {
                            s += gain(k, l) * dsn.alphabet(k)[x];
                        }
                        ys[i] = round_lattice(s);
                    }
                    *acc.entry(output_key(&ys)).or_insert(0.0) += pv;
                }
                if !next_config(&mut vary, &radix_vary) {
                    break;
                }
            }
            let probs: Vec<f64> = acc.into_values().collect();
            value += pk * entropy(&probs);
        }
        if !next_config(&mut known, &radix_known) {
            break;
        }
    }
    Ok(value)
}

/// Exact discrete cut value `H(Y_{Ω^c} | X_{Ω^c})`.
pub fn dsn_cut_value(dsn: &DsnNetwork, cut: &Cut, dist: &ProductDist) -> Result<f64> {
    dsn_between(dsn, cut.omega, cut.omega.complement(dsn.node_count()), dist, DEFAULT_DSN_CAP)
}

/// Discrete metric with a fixed input distribution.
pub struct DsnEntropy<'a> {
    pub dsn: &'a DsnNetwork,
    pub dist: &'a ProductDist,
    pub cap: u128,
}

impl CutMetric for DsnEntropy<'_> {
    type Value = f64;

    fn node_count(&self) -> usize {
        self.dsn.node_count()
    }

    fn between(&self, from: NodeSet, to: NodeSet) -> Result<f64> {
        dsn_between(self.dsn, from, to, self.dist, self.cap)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
}

fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Monte Carlo estimate of the discrete cut value for alphabets too large
/// to enumerate: plug-in `H(Y, X_known)` with the Miller–Madow correction,
/// minus the exact `H(X_known)`. For reporting only.
pub fn dsn_cut_value_mc<R: Rng + ?Sized>(
    dsn: &DsnNetwork,
    cut: &Cut,
    dist: &ProductDist,
    samples: u64,
    rng: &mut R,
) -> Result<Estimate> {
    check_dist(dsn, dist)?;
    if samples < 2 {
        return Err(Error::Precondition("need at least two samples".into()));
    }
    let geo = dsn_geometry(dsn, cut.omega, cut.omega.complement(dsn.node_count()));
    let mut counts: BTreeMap<(Vec<usize>, OutputKey), u64> = BTreeMap::new();
    let mut draws = Vec::with_capacity(samples as usize);
    let mut ys = vec![Lattice::new(0, 0); geo.receivers.len()];
    for _ in 0..samples {
        let known: Vec<usize> = geo.known.iter().map(|v| sample_index(&dist[v.0], rng)).collect();
        let vary: Vec<usize> = geo.varying.iter().map(|v| sample_index(&dist[v.0], rng)).collect();
        for (i, &l) in geo.receivers.iter().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for (&k, &x) in geo.known.iter().zip(&known).chain(geo.varying.iter().zip(&vary)) {
                s += dsn.gain(k, l) * dsn.alphabet(k)[x];
            }
            ys[i] = round_lattice(s);
        }
        let key = (known, output_key(&ys));
        *counts.entry(key.clone()).or_insert(0) += 1;
        draws.push(key);
    }
    let n = samples as f64;
    let joint = miller_madow(&counts.values().copied().collect::<Vec<_>>());
    let h_known: f64 = geo.known.iter().map(|v| entropy(&dist[v.0])).sum();
    let logs: Vec<f64> = draws.iter().map(|k| -(counts[k] as f64 / n).log2()).collect();
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(Estimate {
        value: (joint - h_known).max(0.0),
        std_error: (var / n).sqrt(),
        samples,
    })
}

/// Minimum over `Λ_J` by listing every cut.
pub fn min_cut<G, M>(g: &G, targets: u32, metric: &M) -> Result<(M::Value, Cut)>
where
    G: CutGraph + ?Sized,
    M: CutMetric,
{
    let cuts = enumerate_cuts(g, targets)?;
    let mut best: Option<(M::Value, Cut)> = None;
    for c in cuts {
        let v = metric.cut_value(&c)?;
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, c));
        }
    }
    best.ok_or_else(|| Error::Precondition("no admissible cut separates the targets".into()))
}

/// Minimum over `Λ_J` of a layered network, computed layer by layer. The
/// metric must split over layer gaps, which holds for every metric here
/// because gains only join consecutive layers.
pub fn layered_min_cut<N, M>(layered: &LayeredNetwork<N>, targets: u32, metric: &M) -> Result<(M::Value, Cut)>
where
    N: RelayNetwork,
    M: CutMetric,
{
    if targets == 0 {
        return Err(Error::Precondition("target set is empty".into()));
    }
    let roles = layered.network().roles();
    let (inside, outside) = roles.cut_sides(targets);
    let layers = layered.layers();
    if let Some(w) = layers.iter().map(Vec::len).max() {
        if w > MAX_LAYER_WIDTH {
            return Err(Error::cap(
                "layer width",
                w as u128,
                MAX_LAYER_WIDTH as u128,
                "reduce the node count or number of destinations",
            ));
        }
    }
    let edges = layered.network().edges();
    let buffers = layered.buffer_edges();

    // states of a layer are the subsets of it placed in Ω
    let local_states = |layer: &[NodeId]| -> Vec<NodeSet> {
        (0u32..1 << layer.len())
            .map(|s| {
                layer
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| s >> i & 1 == 1)
                    .map(|(_, &v)| v)
                    .collect::<NodeSet>()
            })
            .filter(|set| {
                layer
                    .iter()
                    .all(|&v| (!inside.contains(v) || set.contains(v)) && (!outside.contains(v) || !set.contains(v)))
            })
            .collect()
    };

    let mut states: Vec<Vec<NodeSet>> = vec![local_states(&layers[0])];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new()];
    let mut cost: Vec<M::Value> = vec![M::Value::default(); states[0].len()];
    for k in 0..layers.len() - 1 {
        let candidates = local_states(&layers[k + 1]);
        let next_layer: NodeSet = layers[k + 1].iter().copied().collect();
        let senders: NodeSet = edges
            .iter()
            .filter(|e| layered.layer_of(e.from) == k)
            .map(|e| e.from)
            .collect();
        let receivers: NodeSet = edges
            .iter()
            .filter(|e| layered.layer_of(e.to) == k + 1)
            .map(|e| e.to)
            .collect();
        let gap_buffers: Vec<&Edge> = buffers.iter().filter(|e| layered.layer_of(e.from) == k).collect();
        let mut memo: HashMap<(u128, u128), M::Value> = HashMap::new();
        let (mut kept, mut kept_cost, mut kept_pred) = (Vec::new(), Vec::new(), Vec::new());
        for t in candidates {
            let far = NodeSet::from_bits(next_layer.bits() & !t.bits() & receivers.bits());
            let mut best: Option<(M::Value, usize)> = None;
            for (i, s) in states[k].iter().enumerate() {
                if gap_buffers.iter().any(|e| s.contains(e.from) && !t.contains(e.to)) {
                    continue;
                }
                let near = NodeSet::from_bits(s.bits() & senders.bits());
                let gap = match memo.get(&(near.bits(), far.bits())) {
                    Some(v) => *v,
                    None => {
                        let v = if near.is_empty() || far.is_empty() {
                            M::Value::default()
                        } else {
                            metric.between(near, far)?
                        };
                        memo.insert((near.bits(), far.bits()), v);
                        v
                    }
                };
                let total = cost[i] + gap;
                if best.as_ref().is_none_or(|(b, _)| total < *b) {
                    best = Some((total, i));
                }
            }
            if let Some((v, i)) = best {
                kept.push(t);
                kept_cost.push(v);
                kept_pred.push(i);
            }
        }
        if kept.is_empty() {
            return Err(Error::Precondition("no admissible cut separates the targets".into()));
        }
        states.push(kept);
        preds.push(kept_pred);
        cost = kept_cost;
    }
    let mut j = 0;
    for (i, v) in cost.iter().enumerate() {
        if *v < cost[j] {
            j = i;
        }
    }
    let best = cost[j];
    let mut omega = NodeSet::empty();
    for k in (0..layers.len()).rev() {
        omega = NodeSet::from_bits(omega.bits() | states[k][j].bits());
        if k > 0 {
            j = preds[k][j];
        }
    }
    Ok((best, Cut { omega }))
}

/// Flow subset or multicast node that a region constraint refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Targets {
    Flows(u32),
    Multicast(NodeId),
}

impl fmt::Display for Targets {
    /// Flows are written one based and joined by `+`; the multicast sum
    /// constraint of node `m` is written `sum@m`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Targets::Flows(mask) => {
                let parts: Vec<String> = (0..32)
                    .filter(|j| mask >> j & 1 == 1)
                    .map(|j| (j + 1).to_string())
                    .collect();
                f.write_str(&parts.join("+"))
            }
            Targets::Multicast(m) => write!(f, "sum@{m}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bound {
    pub value: f64,
    pub cut: Cut,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionRow {
    pub targets: Targets,
    pub cut: Cut,
    pub value: f64,
}

/// Cut-set region: `R_J <= C_J` for every nonempty flow subset `J`, plus
/// the multicast bound on the sum of all rates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRegion {
    pub flow_count: usize,
    pub constraints: BTreeMap<u32, Bound>,
    pub multicast_sum_bound: Option<Bound>,
    /// Every evaluated cut, grouped by targets.
    pub rows: Vec<RegionRow>,
}

impl RateRegion {
    pub fn bound(&self, targets: u32) -> Option<f64> {
        self.constraints.get(&targets).map(|b| b.value)
    }

    /// Whether `rates` satisfies every constraint within `tol`.
    pub fn contains(&self, rates: &[f64], tol: f64) -> bool {
        let ok = self.constraints.iter().all(|(&mask, b)| {
            let sum: f64 = (0..rates.len()).filter(|j| mask >> j & 1 == 1).map(|j| rates[j]).sum();
            sum <= b.value + tol
        });
        let sum: f64 = rates.iter().sum();
        ok && self.multicast_sum_bound.is_none_or(|b| sum <= b.value + tol)
    }
}

/// Cut-set region of any network under a bits-valued metric.
pub fn cutset_region<G, M>(g: &G, metric: &M) -> Result<RateRegion>
where
    G: CutGraph + ?Sized,
    M: CutMetric<Value = f64>,
{
    let flows = g.graph_roles().flow_count();
    if flows == 0 || flows > 16 {
        return Err(Error::Precondition(format!("{flows} flows; between 1 and 16 are supported")));
    }
    let mut memo: HashMap<Cut, f64> = HashMap::new();
    let mut eval = |c: &Cut| -> Result<f64> {
        if let Some(v) = memo.get(c) {
            return Ok(*v);
        }
        let v = metric.cut_value(c)?;
        memo.insert(*c, v);
        Ok(v)
    };
    let mut constraints = BTreeMap::new();
    let mut rows = Vec::new();
    for mask in 1u32..1 << flows {
        let mut best: Option<Bound> = None;
        for c in enumerate_cuts(g, mask)? {
            let v = eval(&c)?;
            rows.push(RegionRow {
                targets: Targets::Flows(mask),
                cut: c,
                value: v,
            });
            if best.is_none_or(|b| v < b.value) {
                best = Some(Bound { value: v, cut: c });
            }
        }
        if let Some(b) = best {
            constraints.insert(mask, b);
        }
    }
    let mut multicast_sum_bound: Option<Bound> = None;
    if let Roles::Broadcast {
        source,
        mc_destinations,
        ..
    } = g.graph_roles()
    {
        for &m in mc_destinations {
            let cuts = enumerate_between(g, NodeSet::empty().with(*source), NodeSet::empty().with(m))?;
            for c in cuts {
                let v = eval(&c)?;
                rows.push(RegionRow {
                    targets: Targets::Multicast(m),
                    cut: c,
                    value: v,
                });
                if multicast_sum_bound.is_none_or(|b| v < b.value) {
                    multicast_sum_bound = Some(Bound { value: v, cut: c });
                }
            }
        }
    }
    Ok(RateRegion {
        flow_count: flows,
        constraints,
        multicast_sum_bound,
        rows,
    })
}

pub fn ldn_region(net: &LdnNetwork) -> Result<RateRegion> {
    cutset_region(net, &LdnBits(net))
}

pub fn gaussian_region(net: &GaussianNetwork) -> Result<RateRegion> {
    cutset_region(net, &GaussianLogDet(net))
}

pub fn dsn_region(dsn: &DsnNetwork, dist: &ProductDist) -> Result<RateRegion> {
    cutset_region(
        dsn,
        &DsnEntropy {
            dsn,
            dist,
            cap: DEFAULT_DSN_CAP,
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapEntry {
    pub cut: Cut,
    pub gaussian: f64,
    pub discrete: f64,
    pub gap: f64,
}

/// Per-cut comparison of the Gaussian cut value with i.i.d. unit inputs
/// against the discrete cut value of a derived network.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapCertificate {
    pub entries: Vec<GapEntry>,
    pub worst_gap: f64,
    pub node_count: usize,
}

/// Evaluates every cut that separates the source from at least one
/// broadcast destination. Nothing is asserted.
pub fn gap_certificate(net: &GaussianNetwork, dsn: &DsnNetwork, dist: &ProductDist) -> Result<GapCertificate> {
    if dsn.base() != net {
        return Err(Error::Precondition("discrete network was not derived from this network".into()));
    }
    let flows = net.roles().flow_count();
    let mut cuts = BTreeSet::new();
    for mask in 1u32..1 << flows {
        cuts.extend(enumerate_cuts(net, mask)?);
    }
    let mut entries = Vec::with_capacity(cuts.len());
    for cut in cuts {
        let gaussian = gaussian_cut_value(net, &cut, None)?;
        let discrete = dsn_cut_value(dsn, &cut, dist)?;
        entries.push(GapEntry {
            cut,
            gaussian,
            discrete,
            gap: gaussian - discrete,
        });
    }
    let worst_gap = entries.iter().map(|e| e.gap).fold(f64::NEG_INFINITY, f64::max);
    Ok(GapCertificate {
        entries,
        worst_gap,
        node_count: net.node_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsn::DsnNetwork;
    use crate::model::UnfoldOptions;
    use crate::rng::derive_rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diamond() -> LdnNetwork {
        LdnNetwork::from_shifts(
            2,
            3,
            4,
            Roles::broadcast(0, &[3], &[]),
            &[(0, 1, 2), (0, 2, 1), (1, 3, 1), (2, 3, 2)],
        )
        .unwrap()
    }

    fn omegas(cuts: &[Cut]) -> Vec<u128> {
        cuts.iter().map(|c| c.omega.bits()).collect()
    }

    #[test]
    fn chain_has_two_cuts() {
        let net = LdnNetwork::from_shifts(2, 1, 3, Roles::broadcast(0, &[2], &[]), &[(0, 1, 1), (1, 2, 1)]).unwrap();
        assert_eq!(omegas(&enumerate_cuts(&net, 1).unwrap()), vec![0b011, 0b001]);
    }

    #[test]
    fn cut_count_is_power_of_two() {
        for n in 2..9 {
            let net = LdnNetwork::from_shifts(2, 1, n, Roles::broadcast(0, &[n - 1], &[]), &[]).unwrap();
            assert_eq!(enumerate_cuts(&net, 1).unwrap().len(), 1 << (n - 2));
        }
    }

    #[test]
    fn both_destinations_on_far_side() {
        let net = LdnNetwork::from_shifts(2, 1, 4, Roles::broadcast(0, &[2, 3], &[]), &[]).unwrap();
        let mut got = omegas(&enumerate_cuts(&net, 0b11).unwrap());
        got.sort();
        assert_eq!(got, vec![0b0001, 0b0011]);
        assert!(enumerate_cuts(&net, 0).is_err());
        assert!(enumerate_cuts(&net, 0b100).is_err());
    }

    #[test]
    fn too_many_nodes_is_a_cap_error() {
        let net = LdnNetwork::from_shifts(2, 1, 25, Roles::broadcast(0, &[24], &[]), &[]).unwrap();
        assert!(matches!(enumerate_cuts(&net, 1), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn gaussian_values() {
        let empty = GaussianNetwork::scalar(2, Roles::broadcast(0, &[1], &[]), &[]).unwrap();
        assert_eq!(gaussian_cut_value(&empty, &Cut { omega: NodeSet::from_bits(1) }, None).unwrap(), 0.0);

        let h = Complex64::new(1.5, -2.0);
        let link = GaussianNetwork::scalar(2, Roles::broadcast(0, &[1], &[]), &[(0, 1, h)]).unwrap();
        let v = gaussian_cut_value(&link, &Cut { omega: NodeSet::from_bits(1) }, None).unwrap();
        assert!((v - (1.0 + h.norm_sqr()).log2()).abs() < 1e-12);

        let mut gains = BTreeMap::new();
        gains.insert(Edge::new(0, 1), CMatrix::identity(2, 2));
        let mimo = GaussianNetwork::new(2, Roles::broadcast(0, &[1], &[]), vec![2, 2], gains).unwrap();
        let v = gaussian_cut_value(&mimo, &Cut { omega: NodeSet::from_bits(1) }, Some(&CMatrix::identity(4, 4)))
            .unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bad_covariances_are_rejected() {
        let link = GaussianNetwork::scalar(2, Roles::broadcast(0, &[1], &[]), &[(0, 1, c(1.0))]).unwrap();
        let cut = Cut { omega: NodeSet::from_bits(1) };
        let hot = CMatrix::from_diagonal_element(2, 2, c(2.0));
        assert!(matches!(gaussian_cut_value(&link, &cut, Some(&hot)), Err(Error::Covariance(_))));
        let mut indefinite = CMatrix::identity(2, 2);
        indefinite[(0, 1)] = c(1.5);
        indefinite[(1, 0)] = c(1.5);
        assert!(matches!(gaussian_cut_value(&link, &cut, Some(&indefinite)), Err(Error::Covariance(_))));
        let mut skew = CMatrix::identity(2, 2);
        skew[(0, 1)] = Complex64::new(0.0, 0.5);
        skew[(1, 0)] = Complex64::new(0.0, 0.5);
        assert!(matches!(gaussian_cut_value(&link, &cut, Some(&skew)), Err(Error::Covariance(_))));
    }

    #[test]
    fn ldn_values() {
        let link = LdnNetwork::from_shifts(2, 3, 2, Roles::broadcast(0, &[1], &[]), &[(0, 1, 2)]).unwrap();
        assert_eq!(ldn_cut_value(&link, &Cut { omega: NodeSet::from_bits(1) }), 2.0);

        let net = diamond();
        // stacked [S->R1; S->R2] = [shift 2; shift 1] as an explicit 6x3 matrix
        let stacked = FpMatrix::from_rows(
            2,
            &[
                vec![0, 0, 0],
                vec![1, 0, 0],
                vec![0, 1, 0],
                vec![0, 0, 0],
                vec![0, 0, 0],
                vec![1, 0, 0],
            ],
        )
        .unwrap();
        assert_eq!(ldn_cut_rank(&net, &Cut { omega: NodeSet::from_bits(0b0001) }), stacked.rank());
        let ranks: Vec<usize> = [0b0001, 0b0011, 0b0101, 0b0111]
            .iter()
            .map(|&b| ldn_cut_rank(&net, &Cut { omega: NodeSet::from_bits(b) }))
            .collect();
        assert_eq!(ranks, vec![2, 2, 4, 2]);
        assert_eq!(min_cut(&net, 1, &LdnRank(&net)).unwrap().0, 2);
    }

    #[test]
    fn disjoint_receivers_add_ranks() {
        let net = LdnNetwork::from_shifts(
            2,
            4,
            5,
            Roles::broadcast(0, &[3, 4], &[]),
            &[(1, 3, 1), (2, 4, 3)],
        )
        .unwrap();
        assert_eq!(ldn_cut_rank(&net, &Cut { omega: NodeSet::from_bits(0b00111) }), 4);
    }

    #[test]
    fn dsn_values() {
        let link = GaussianNetwork::scalar(2, Roles::broadcast(0, &[1], &[]), &[(0, 1, c(2.0))]).unwrap();
        let cut = Cut { omega: NodeSet::from_bits(1) };
        let one = DsnNetwork::with_alphabets(&link, vec![vec![c(0.25)]; 2]).unwrap();
        assert_eq!(dsn_cut_value(&one, &cut, &uniform_inputs(&one)).unwrap(), 0.0);
        let two = DsnNetwork::with_alphabets(&link, vec![vec![c(-0.5), c(0.0)], vec![c(0.0)]]).unwrap();
        assert!((dsn_cut_value(&two, &cut, &uniform_inputs(&two)).unwrap() - 1.0).abs() < 1e-15);

        let grid = crate::dsn::complex_grid(2);
        let mut shuffled = grid.clone();
        shuffled.reverse();
        let a = DsnNetwork::with_alphabets(&link, vec![grid.clone(), grid]).unwrap();
        let b = DsnNetwork::with_alphabets(&link, vec![shuffled.clone(), shuffled]).unwrap();
        let va = dsn_cut_value(&a, &cut, &uniform_inputs(&a)).unwrap();
        let vb = dsn_cut_value(&b, &cut, &uniform_inputs(&b)).unwrap();
        assert!((va - vb).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_tracks_exact_value() {
        let net = GaussianNetwork::scalar(
            3,
            Roles::broadcast(0, &[2], &[]),
            &[(0, 1, c(3.0)), (0, 2, Complex64::new(1.0, 2.0)), (1, 2, c(2.5))],
        )
        .unwrap();
        let dsn = DsnNetwork::derive(&net, 2).unwrap();
        let dist = uniform_inputs(&dsn);
        let cut = Cut { omega: NodeSet::from_bits(0b011) };
        let exact = dsn_cut_value(&dsn, &cut, &dist).unwrap();
        let est = dsn_cut_value_mc(&dsn, &cut, &dist, 50_000, &mut derive_rng(3, "mc", 0)).unwrap();
        assert!((est.value - exact).abs() < 0.05 + 5.0 * est.std_error, "{exact} vs {est:?}");
    }

    #[test]
    fn over_cap_discrete_cut_suggests_estimator() {
        let net = GaussianNetwork::scalar(
            4,
            Roles::broadcast(0, &[3], &[]),
            &[(0, 3, c(1.0)), (1, 3, c(1.0)), (2, 3, c(1.0))],
        )
        .unwrap();
        let dsn = DsnNetwork::derive(&net, 4).unwrap();
        let err = dsn_cut_value(&dsn, &Cut { omega: NodeSet::from_bits(0b0111) }, &uniform_inputs(&dsn));
        assert!(matches!(err, Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn regions() {
        let h = c(3.0);
        let link = GaussianNetwork::scalar(2, Roles::broadcast(0, &[1], &[]), &[(0, 1, h)]).unwrap();
        let r = gaussian_region(&link).unwrap();
        assert_eq!(r.constraints.len(), 1);
        assert!((r.bound(1).unwrap() - 10f64.log2()).abs() < 1e-12);

        let net = LdnNetwork::from_shifts(2, 2, 3, Roles::broadcast(0, &[1, 2], &[]), &[(0, 1, 2)]).unwrap();
        let r = ldn_region(&net).unwrap();
        assert_eq!(r.bound(0b10), Some(0.0));
        assert_eq!(r.bound(0b11), r.bound(0b01));
        assert!(r.multicast_sum_bound.is_none());
    }

    #[test]
    fn gap_certificates() {
        let silent = GaussianNetwork::scalar(3, Roles::broadcast(0, &[2], &[]), &[]).unwrap();
        let dsn = DsnNetwork::derive(&silent, 1).unwrap();
        let cert = gap_certificate(&silent, &dsn, &uniform_inputs(&dsn)).unwrap();
        assert!(cert.entries.iter().all(|e| e.gap == 0.0));

        let weak = GaussianNetwork::scalar(2, Roles::broadcast(0, &[1], &[]), &[(0, 1, Complex64::new(0.3, 0.4))])
            .unwrap();
        let dsn = DsnNetwork::derive(&weak, 1).unwrap();
        let cert = gap_certificate(&weak, &dsn, &uniform_inputs(&dsn)).unwrap();
        assert_eq!(cert.entries[0].discrete, 0.0);
        assert_eq!(cert.entries[0].gap, cert.entries[0].gaussian);

        let chain = GaussianNetwork::scalar(3, Roles::broadcast(0, &[2], &[]), &[(0, 1, c(4.0)), (1, 2, c(4.0))])
            .unwrap();
        let dsn = DsnNetwork::derive(&chain, 3).unwrap();
        let cert = gap_certificate(&chain, &dsn, &uniform_inputs(&dsn)).unwrap();
        assert!(cert.worst_gap <= 23.0 * 3.0);
    }

    #[test]
    fn layered_minimum_matches_listing() {
        let net = LdnNetwork::from_shifts(
            2,
            2,
            3,
            Roles::broadcast(0, &[2], &[]),
            &[(0, 1, 2), (1, 2, 1), (0, 2, 1), (2, 1, 1)],
        )
        .unwrap();
        for depth in 4..7 {
            let u = LayeredNetwork::unfold(&net, depth, UnfoldOptions::default()).unwrap();
            let (fast, cut) = layered_min_cut(&u, 1, &LdnRank(u.network())).unwrap();
            let (slow, _) = min_cut(&u, 1, &LdnRank(u.network())).unwrap();
            assert_eq!(fast, slow);
            assert_eq!(LdnRank(u.network()).cut_value(&cut).unwrap(), fast);
            assert!(enumerate_cuts(&u, 1).unwrap().contains(&cut));
        }
    }

    #[test]
    fn region_is_monotone_under_edge_addition() {
        let base = diamond();
        let before = ldn_region(&base).unwrap();
        let mut gains = base.gains().clone();
        gains.insert(Edge::new(0, 3), FpMatrix::shift(2, 3, 1).unwrap());
        let more = LdnNetwork::new(2, 3, 4, base.roles().clone(), gains).unwrap();
        let after = ldn_region(&more).unwrap();
        assert!(after.bound(1).unwrap() >= before.bound(1).unwrap());
    }
}
