//! Lifting: recovering the discrete superposition output block of a node
//! from its Gaussian received block.
//!
//! The joint law of the DSN output and the Gaussian output is tabulated by
//! discretizing the Gaussian output onto square cells. A candidate block is
//! accepted when its conditional log-likelihood given the observed cells is
//! within `weak_slack` bits per symbol of the conditional entropy, it is
//! strongly typical for the DSN output marginal, and it belongs to the
//! node's candidate set.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use super::{complex_noise, round_lattice, DsnNetwork, Lattice};
use crate::cutset::ProductDist;
use crate::detnet::DetNet;
use crate::error::{Error, Result};
use crate::info::{erfc, normal_cdf};
use crate::marton::typical::count_bounds;
use crate::marton::{InducedChannel, RelayTables};
use crate::model::NodeId;
use crate::rng::{fnv1a, mix};

pub const CELL_WIDTH: f64 = 0.125;
pub const BOX_SIGMAS: f64 = 6.0;
pub const DEFAULT_WEAK_SLACK: f64 = 0.5;
pub const DEFAULT_SEARCH_BUDGET: usize = 1 << 20;
/// Candidate sets larger than this are represented by a keyed hash.
pub const MAX_EXPLICIT_SET: u128 = 1 << 22;

/// One support point of the natural joint law: DSN output letter, noiseless
/// Gaussian output and probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub letter: u32,
    pub mean: Complex64,
    pub prob: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
struct Axis {
    lo: f64,
    cells: usize,
}

/// Tabulated joint statistics of `(DSN output, discretized Gaussian output)`
/// at one node.
#[derive(Clone, Debug, Serialize)]
pub struct LiftStats {
    pub node: NodeId,
    pub atoms: Vec<Atom>,
    /// Lattice point of every letter.
    pub lattice: Vec<Lattice>,
    pub marginal: Vec<f64>,
    pub noise_variance: f64,
    pub cell_width: f64,
    /// `H(Y_dsn | cell)` in bits; zero without noise.
    pub cond_entropy: f64,
    axes: [Axis; 2],
}

impl LiftStats {
    pub fn from_atoms(node: NodeId, atoms: Vec<Atom>, lattice: Vec<Lattice>, noise_variance: f64) -> Result<Self> {
        if atoms.is_empty() || atoms.iter().any(|a| a.letter as usize >= lattice.len()) {
            return Err(Error::Precondition("atoms must name letters of the lattice list".into()));
        }
        let mut marginal = vec![0.0; lattice.len()];
        for a in &atoms {
            marginal[a.letter as usize] += a.prob;
        }
        let sigma = (noise_variance / 2.0).sqrt();
        let axis = |f: fn(&Complex64) -> f64| {
            let lo = atoms.iter().map(|a| f(&a.mean)).fold(f64::INFINITY, f64::min) - BOX_SIGMAS * sigma;
            let hi = atoms.iter().map(|a| f(&a.mean)).fold(f64::NEG_INFINITY, f64::max) + BOX_SIGMAS * sigma;
            Axis {
                lo,
                cells: (((hi - lo) / CELL_WIDTH).ceil() as usize).max(1),
            }
        };
        let axes = [axis(|z| z.re), axis(|z| z.im)];
        let mut stats = LiftStats {
            node,
            atoms,
            lattice,
            marginal,
            noise_variance,
            cell_width: CELL_WIDTH,
            cond_entropy: 0.0,
            axes,
        };
        if noise_variance > 0.0 {
            stats.cond_entropy = stats.tabulate_cond_entropy();
        }
        Ok(stats)
    }

    /// Natural joint law at `node` with level-1 blocks of length one: the
    /// source draws from its input law, relays apply their tables.
    pub fn natural(
        dsn: &DsnNetwork,
        det: &DetNet,
        dist: &ProductDist,
        tables: &RelayTables,
        channel: &InducedChannel,
        node: NodeId,
        noise_variance: f64,
    ) -> Result<Self> {
        if tables.t1 != 1 {
            return Err(Error::Precondition("lifting needs level-1 blocks of length 1".into()));
        }
        let pos = channel
            .position(node)
            .ok_or_else(|| Error::Precondition(format!("node {node} receives nothing")))?;
        let lattice: Vec<Lattice> = channel.node_alphabets[pos]
            .iter()
            .map(|&raw| det.lattice_value(node, raw as u32).expect("network built from a DSN"))
            .collect();
        let s = det.source();
        let mut acc: BTreeMap<(u32, u64, u64), f64> = BTreeMap::new();
        let mut inputs = vec![0usize; det.node_count()];
        for (x, &p) in dist[s.0].iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            inputs[s.0] = x;
            let mut mean = None;
            for v in det.receiving_nodes() {
                let r = det.receiver(v).expect("receiving");
                let y = r.output(&inputs, det.input_sizes());
                if v == node {
                    let mu: Complex64 = r.senders.iter().map(|&k| dsn.gain(k, v) * dsn.alphabet(k)[inputs[k.0]]).sum();
                    mean = Some(mu);
                    break;
                }
                if let Some(t) = tables.tables.get(&v) {
                    inputs[v.0] = t[y as usize] as usize;
                }
            }
            let mu = mean.expect("node reached");
            let letter = channel.outputs[x][pos];
            *acc.entry((letter, mu.re.to_bits(), mu.im.to_bits())).or_insert(0.0) += p;
        }
        let mut atoms: Vec<Atom> = acc
            .into_iter()
            .map(|((letter, re, im), prob)| Atom {
                letter,
                mean: Complex64::new(f64::from_bits(re), f64::from_bits(im)),
                prob,
            })
            .collect();
        atoms.sort_by(|a, b| (a.letter, a.mean.re, a.mean.im).partial_cmp(&(b.letter, b.mean.re, b.mean.im)).unwrap());
        Self::from_atoms(node, atoms, lattice, noise_variance)
    }

    pub fn letters(&self) -> usize {
        self.lattice.len()
    }

    fn sigma(&self) -> f64 {
        (self.noise_variance / 2.0).sqrt()
    }

    fn cell(&self, axis: usize, y: f64) -> usize {
        let a = self.axes[axis];
        (((y - a.lo) / CELL_WIDTH).floor().max(0.0) as usize).min(a.cells - 1)
    }

    /// Probability that one axis of `mean + noise` falls in `cell`; edge
    /// cells extend to infinity.
    fn axis_prob(&self, axis: usize, cell: usize, mean: f64) -> f64 {
        let a = self.axes[axis];
        let s = self.sigma();
        let lo = if cell == 0 { f64::NEG_INFINITY } else { a.lo + cell as f64 * CELL_WIDTH };
        let hi = if cell + 1 == a.cells { f64::INFINITY } else { a.lo + (cell + 1) as f64 * CELL_WIDTH };
        let (a, b) = ((lo - mean) / s, (hi - mean) / s);
        let p = if a > 0.0 {
            // upper tails keep precision far from the mean
            0.5 * (erfc(a / std::f64::consts::SQRT_2) - erfc(b / std::f64::consts::SQRT_2))
        } else {
            normal_cdf(b) - normal_cdf(a)
        };
        p.max(0.0)
    }

    fn tabulate_cond_entropy(&self) -> f64 {
        let per_axis: Vec<[Vec<f64>; 2]> = self
            .atoms
            .iter()
            .map(|at| {
                [
                    (0..self.axes[0].cells).map(|c| self.axis_prob(0, c, at.mean.re)).collect(),
                    (0..self.axes[1].cells).map(|c| self.axis_prob(1, c, at.mean.im)).collect(),
                ]
            })
            .collect();
        let mut joint = vec![0.0; self.letters()];
        let mut h = 0.0;
        for c0 in 0..self.axes[0].cells {
            for c1 in 0..self.axes[1].cells {
                joint.iter_mut().for_each(|x| *x = 0.0);
                for (at, pa) in self.atoms.iter().zip(&per_axis) {
                    joint[at.letter as usize] += at.prob * pa[0][c0] * pa[1][c1];
                }
                let pc: f64 = joint.iter().sum();
                if pc > 0.0 {
                    for &pj in &joint {
                        if pj > 0.0 {
                            h -= pj * (pj / pc).log2();
                        }
                    }
                }
            }
        }
        h
    }

    /// `H(Y_dsn)` in bits.
    pub fn output_entropy(&self) -> f64 {
        crate::info::entropy(&self.marginal)
    }

    /// Posterior of the DSN letter given the cell containing `y`.
    pub fn posterior(&self, y: Complex64) -> Vec<f64> {
        let (c0, c1) = (self.cell(0, y.re), self.cell(1, y.im));
        let mut joint = vec![0.0; self.letters()];
        for at in &self.atoms {
            joint[at.letter as usize] += at.prob * self.axis_prob(0, c0, at.mean.re) * self.axis_prob(1, c1, at.mean.im);
        }
        let pc: f64 = joint.iter().sum();
        if pc > 0.0 {
            joint.iter_mut().for_each(|x| *x /= pc);
        }
        joint
    }

    pub fn letter_of(&self, z: Lattice) -> Option<u32> {
        self.lattice.iter().position(|&l| l == z).map(|i| i as u32)
    }

    /// Gaussian observation of a letter sequence: each position draws an
    /// atom of its letter, then adds noise.
    pub fn observe<R: Rng + ?Sized>(&self, seq: &[u32], rng: &mut R) -> Result<Vec<Complex64>> {
        seq.iter()
            .map(|&l| {
                let atoms: Vec<&Atom> = self.atoms.iter().filter(|a| a.letter == l).collect();
                let w = WeightedIndex::new(atoms.iter().map(|a| a.prob))
                    .map_err(|_| Error::Precondition(format!("letter {l} has no atom")))?;
                Ok(atoms[w.sample(rng)].mean + complex_noise(self.noise_variance, rng))
            })
            .collect()
    }
}

/// Candidate DSN blocks of one node.
#[derive(Clone, Debug)]
pub enum Candidates {
    Explicit(BTreeSet<Vec<u32>>),
    /// Typical blocks whose keyed hash falls below `fraction`.
    Hashed { key: u64, fraction: f64 },
}

impl Candidates {
    /// Keyed selection of a `2^(-t2 kappa)` fraction.
    pub fn hashed(key: u64, t2: usize, kappa: f64) -> Self {
        Candidates::Hashed {
            key,
            fraction: (-(t2 as f64) * kappa).exp2(),
        }
    }

    pub fn selects(&self, seq: &[u32]) -> bool {
        match self {
            Candidates::Explicit(set) => set.contains(seq),
            Candidates::Hashed { key, fraction } => {
                let bytes: Vec<u8> = seq.iter().flat_map(|l| l.to_le_bytes()).collect();
                let h = mix(*key, fnv1a(&bytes));
                (h as f64) < fraction * 2f64.powi(64)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LiftOutcome {
    Decoded(Vec<u32>),
    /// No accepted candidate, several, or the search budget ran out.
    Erasure { found: usize, exhausted: bool },
}

#[derive(Clone, Debug)]
pub struct LiftDecoder {
    pub stats: LiftStats,
    pub candidates: Candidates,
    pub delta: f64,
    pub weak_slack: f64,
    pub budget: usize,
}

impl LiftDecoder {
    pub fn new(stats: LiftStats, candidates: Candidates, delta: f64) -> Self {
        LiftDecoder {
            stats,
            candidates,
            delta,
            weak_slack: DEFAULT_WEAK_SLACK,
            budget: DEFAULT_SEARCH_BUDGET,
        }
    }

    fn typical_counts(&self, counts: &[usize], bounds: &[(usize, usize)]) -> bool {
        counts.iter().zip(bounds).all(|(&c, &(lo, hi))| lo <= c && c <= hi)
    }

    pub fn decode(&self, y: &[Complex64]) -> LiftOutcome {
        let n = y.len();
        let bounds = count_bounds(&self.stats.marginal, n, self.delta);
        if self.stats.noise_variance == 0.0 {
            let seq: Option<Vec<u32>> = y.iter().map(|&z| self.stats.letter_of(round_lattice(z))).collect();
            return match seq {
                Some(s) if self.accepts(&s, &bounds) => LiftOutcome::Decoded(s),
                _ => LiftOutcome::Erasure {
                    found: 0,
                    exhausted: false,
                },
            };
        }
        // per position: letters by increasing cost -log2 p(letter | cell)
        let costs: Vec<Vec<(u32, f64)>> = y
            .iter()
            .map(|&z| {
                let mut c: Vec<(u32, f64)> = self
                    .stats
                    .posterior(z)
                    .iter()
                    .enumerate()
                    .filter(|&(l, &p)| p > 0.0 && bounds[l].1 > 0)
                    .map(|(l, &p)| (l as u32, -p.log2()))
                    .collect();
                c.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                c
            })
            .collect();
        if costs.iter().any(Vec::is_empty) {
            return LiftOutcome::Erasure {
                found: 0,
                exhausted: false,
            };
        }
        let mut suffix = vec![0.0; n + 1];
        for t in (0..n).rev() {
            suffix[t] = suffix[t + 1] + costs[t][0].1;
        }
        let threshold = n as f64 * (self.stats.cond_entropy + self.weak_slack);
        let mut search = Search {
            dec: self,
            costs: &costs,
            suffix: &suffix,
            bounds: &bounds,
            threshold,
            counts: vec![0; self.stats.letters()],
            seq: Vec::with_capacity(n),
            found: Vec::new(),
            visited: 0,
            exhausted: false,
        };
        search.run(0.0);
        if search.found.len() == 1 && !search.exhausted {
            LiftOutcome::Decoded(search.found.pop().unwrap())
        } else {
            LiftOutcome::Erasure {
                found: search.found.len(),
                exhausted: search.exhausted,
            }
        }
    }

    fn accepts(&self, seq: &[u32], bounds: &[(usize, usize)]) -> bool {
        let mut counts = vec![0usize; self.stats.letters()];
        for &l in seq {
            counts[l as usize] += 1;
        }
        self.typical_counts(&counts, bounds) && self.candidates.selects(seq)
    }

    /// Most likely letter at every position, ignoring the candidate set.
    pub fn hard_decision(&self, y: &[Complex64]) -> Vec<u32> {
        y.iter()
            .map(|&z| {
                if self.stats.noise_variance == 0.0 {
                    return self.stats.letter_of(round_lattice(z)).unwrap_or(0);
                }
                let p = self.stats.posterior(z);
                (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b]).then(b.cmp(&a))).unwrap_or(0) as u32
            })
            .collect()
    }
}

struct Search<'a> {
    dec: &'a LiftDecoder,
    costs: &'a [Vec<(u32, f64)>],
    suffix: &'a [f64],
    bounds: &'a [(usize, usize)],
    threshold: f64,
    counts: Vec<usize>,
    seq: Vec<u32>,
    found: Vec<Vec<u32>>,
    visited: usize,
    exhausted: bool,
}

impl Search<'_> {
    fn run(&mut self, cost: f64) {
        let t = self.seq.len();
        if t == self.costs.len() {
            if self.dec.typical_counts(&self.counts, self.bounds) && self.dec.candidates.selects(&self.seq) {
                self.found.push(self.seq.clone());
            }
            return;
        }
        let left = self.costs.len() - t;
        let missing: usize = self
            .counts
            .iter()
            .zip(self.bounds)
            .map(|(&c, &(lo, _))| lo.saturating_sub(c))
            .sum();
        if missing > left {
            return;
        }
        for &(l, c) in &self.costs[t] {
            if self.found.len() >= 2 || self.exhausted {
                return;
            }
            if cost + c + self.suffix[t + 1] > self.threshold + 1e-12 {
                // letters are sorted by cost
                break;
            }
            if self.counts[l as usize] >= self.bounds[l as usize].1 {
                continue;
            }
            self.visited += 1;
            if self.visited > self.dec.budget {
                self.exhausted = true;
                return;
            }
            self.counts[l as usize] += 1;
            self.seq.push(l);
            self.run(cost + c);
            self.seq.pop();
            self.counts[l as usize] -= 1;
        }
    }
}

/// Candidate member drawn from the i.i.d. output law conditioned on being
/// typical and selected; uniform over the candidates when the law is
/// uniform.
pub fn sample_candidate<R: Rng + ?Sized>(
    stats: &LiftStats,
    candidates: &Candidates,
    len: usize,
    delta: f64,
    attempts: usize,
    rng: &mut R,
) -> Result<Vec<u32>> {
    if let Candidates::Explicit(set) = candidates {
        if set.is_empty() {
            return Err(Error::EmptyPrunedSet(stats.node));
        }
        let i = rng.random_range(0..set.len());
        return Ok(set.iter().nth(i).expect("in range").clone());
    }
    let bounds = count_bounds(&stats.marginal, len, delta);
    let w = WeightedIndex::new(&stats.marginal).map_err(|e| Error::Precondition(e.to_string()))?;
    let mut counts = vec![0usize; stats.letters()];
    for _ in 0..attempts {
        let seq: Vec<u32> = (0..len).map(|_| w.sample(rng) as u32).collect();
        counts.iter_mut().for_each(|c| *c = 0);
        for &l in &seq {
            counts[l as usize] += 1;
        }
        if counts.iter().zip(&bounds).all(|(&c, &(lo, hi))| lo <= c && c <= hi) && candidates.selects(&seq) {
            return Ok(seq);
        }
    }
    Err(Error::EmptyPrunedSet(stats.node))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn two_letters(variance: f64) -> LiftStats {
        let atoms = vec![
            Atom {
                letter: 0,
                mean: Complex64::new(-4.0, 0.0),
                prob: 0.5,
            },
            Atom {
                letter: 1,
                mean: Complex64::new(4.0, 0.0),
                prob: 0.5,
            },
        ];
        LiftStats::from_atoms(NodeId(1), atoms, vec![Lattice::new(-4, 0), Lattice::new(4, 0)], variance).unwrap()
    }

    #[test]
    fn erfc_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((normal_cdf(1.96) - 0.975_002).abs() < 1e-6);
        assert!((normal_cdf(-3.0) - 0.001_349_9).abs() < 1e-6);
    }

    #[test]
    fn well_separated_letters_have_small_equivocation() {
        let s = two_letters(1.0);
        assert!(s.cond_entropy > 0.0 && s.cond_entropy < 0.01, "{}", s.cond_entropy);
        assert!((s.output_entropy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_decoding_is_exact() {
        let s = two_letters(0.0);
        let dec = LiftDecoder::new(s, Candidates::hashed(1, 8, 0.0), 0.5);
        let seq = vec![0, 1, 1, 0, 1, 0, 0, 1];
        let y = dec.stats.observe(&seq, &mut derive_rng(1, "t", 0)).unwrap();
        assert_eq!(dec.decode(&y), LiftOutcome::Decoded(seq));
    }

    #[test]
    fn singleton_candidate_set() {
        let s = two_letters(1.0);
        let only = vec![0, 1, 0, 1, 0, 1, 0, 1];
        let dec = LiftDecoder::new(s, Candidates::Explicit([only.clone()].into()), 0.5);
        let mut rng = derive_rng(2, "t", 0);
        let y = dec.stats.observe(&only, &mut rng).unwrap();
        assert_eq!(dec.decode(&y), LiftOutcome::Decoded(only));
        let other = vec![1, 1, 0, 0, 1, 1, 0, 0];
        let y = dec.stats.observe(&other, &mut rng).unwrap();
        assert!(matches!(dec.decode(&y), LiftOutcome::Erasure { found: 0, .. }));
    }

    #[test]
    fn full_typical_set_decodes_separated_letters() {
        let s = two_letters(1.0);
        let dec = LiftDecoder::new(s, Candidates::hashed(3, 8, 0.0), 0.5);
        let mut rng = derive_rng(3, "t", 0);
        let mut ok = 0;
        for _ in 0..100 {
            let seq = sample_candidate(&dec.stats, &dec.candidates, 8, 0.5, 1000, &mut rng).unwrap();
            let y = dec.stats.observe(&seq, &mut rng).unwrap();
            ok += usize::from(dec.decode(&y) == LiftOutcome::Decoded(seq));
        }
        assert!(ok >= 95, "{ok}");
    }

    #[test]
    fn hashed_selection_fraction() {
        let c = Candidates::hashed(9, 4, 0.5);
        let hits = (0u32..4096).filter(|&i| c.selects(&[i & 7, i >> 3 & 7, i >> 6 & 7, i >> 9])).count();
        // expected 1024
        assert!((900..1150).contains(&hits), "{hits}");
    }
}
