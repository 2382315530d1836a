//! Running a pruned DSN Marton scheme over the Gaussian network: every
//! receiving node lifts its Gaussian block to a DSN block, relays apply
//! their DSN tables, destinations decode their bins.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use super::lift::{Candidates, LiftDecoder, LiftOutcome, LiftStats, CELL_WIDTH, DEFAULT_SEARCH_BUDGET, DEFAULT_WEAK_SLACK};
use super::{complex_noise, round_lattice, DsnNetwork};
use crate::cutset::ProductDist;
use crate::detnet::DetNet;
use crate::error::{Error, Result};
use crate::marton::{prune_sets, InducedChannel, MartonCodebook, PrunedSets, RelayTables, SchemeParams};
use crate::model::NodeId;
use crate::rng::derive_rng;

/// Everything a pruned DSN scheme needs, built once and shared by trials.
#[derive(Clone, Debug)]
pub struct EmulationScheme {
    pub dsn: DsnNetwork,
    pub det: DetNet,
    pub dist: ProductDist,
    pub tables: RelayTables,
    pub channel: InducedChannel,
    pub pruned: PrunedSets,
    pub codebook: MartonCodebook,
    pub params: SchemeParams,
}

impl EmulationScheme {
    /// Rates are per broadcast destination, in bits per channel use.
    pub fn build(
        dsn: &DsnNetwork,
        dist: ProductDist,
        tables: RelayTables,
        params: &SchemeParams,
        rates: &[f64],
        seed: u64,
    ) -> Result<Self> {
        if params.t1 != 1 || tables.t1 != 1 {
            return Err(Error::Precondition("emulation uses level-1 blocks of length 1".into()));
        }
        let det = DetNet::from_dsn(dsn)?;
        let channel = InducedChannel::induce(&det, &dist, &tables)?;
        let pruned = prune_sets(&channel, params, &mut derive_rng(seed, "prune", 0))?;
        let dests = det.roles().bc_destinations().to_vec();
        let codebook = MartonCodebook::build(&channel, &dests, rates, params, seed, Some(&pruned))?;
        Ok(EmulationScheme {
            dsn: dsn.clone(),
            det,
            dist,
            tables,
            channel,
            pruned,
            codebook,
            params: *params,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EmulationConfig {
    pub trials: usize,
    pub seed: u64,
    /// Test-harness knob: drop the channel noise.
    pub noiseless: bool,
    pub weak_slack: f64,
    pub budget: usize,
}

impl Default for EmulationConfig {
    fn default() -> Self {
        EmulationConfig {
            trials: 100,
            seed: 0,
            noiseless: false,
            weak_slack: DEFAULT_WEAK_SLACK,
            budget: DEFAULT_SEARCH_BUDGET,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    pub node: NodeId,
    pub erasures: usize,
    /// Decoded block differs from the true DSN block.
    pub errors: usize,
    pub budget_exhausted: usize,
    pub cond_entropy_bits: f64,
    pub candidates: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EmulationReport {
    pub trials: usize,
    pub noiseless: bool,
    pub cell_width: f64,
    pub weak_slack: f64,
    pub encoding_failures: usize,
    pub stages: Vec<StageReport>,
    pub destination_errors: Vec<usize>,
    pub end_to_end_errors: usize,
    pub error_rate: f64,
}

pub fn emulation_run(scheme: &EmulationScheme, cfg: &EmulationConfig) -> Result<EmulationReport> {
    let variance = if cfg.noiseless { 0.0 } else { 1.0 };
    let det = &scheme.det;
    let ch = &scheme.channel;
    let order = det.receiving_nodes();
    let dests = det.roles().bc_destinations().to_vec();
    let mut decoders = Vec::new();
    for &v in &order {
        let stats = LiftStats::natural(&scheme.dsn, det, &scheme.dist, &scheme.tables, ch, v, variance)?;
        let pos = ch.position(v).expect("receiving");
        let mut d = LiftDecoder::new(stats, Candidates::Explicit(scheme.pruned.selected[pos].clone()), scheme.params.delta);
        d.weak_slack = cfg.weak_slack;
        d.budget = cfg.budget;
        decoders.push(d);
    }
    let mut stages: Vec<StageReport> = order
        .iter()
        .zip(&decoders)
        .map(|(&v, d)| StageReport {
            node: v,
            erasures: 0,
            errors: 0,
            budget_exhausted: 0,
            cond_entropy_bits: d.stats.cond_entropy,
            candidates: scheme.pruned.selected[ch.position(v).expect("receiving")].len(),
        })
        .collect();
    let mut destination_errors = vec![0; dests.len()];
    let (mut failures, mut e2e) = (0, 0);
    let t2 = scheme.params.t2;
    let s = det.source();
    for trial in 0..cfg.trials {
        let mut rng = derive_rng(cfg.seed, "emulation", trial as u64);
        let w: Vec<u64> = scheme.codebook.bins().iter().map(|&m| rng.random_range(0..m)).collect();
        let enc = scheme.codebook.encode(&w, &mut rng)?;
        failures += usize::from(enc.is_failure());
        let mut inputs = vec![vec![0usize; t2]; det.node_count()];
        inputs[s.0] = enc.block().iter().map(|&x| x as usize).collect();
        let mut wrong = false;
        for (i, &v) in order.iter().enumerate() {
            let r = det.receiver(v).expect("receiving");
            let mut y = Vec::with_capacity(t2);
            let mut truth = Vec::with_capacity(t2);
            for t in 0..t2 {
                let mu: Complex64 = r
                    .senders
                    .iter()
                    .map(|&k| scheme.dsn.gain(k, v) * scheme.dsn.alphabet(k)[inputs[k.0][t]])
                    .sum();
                truth.push(decoders[i].stats.letter_of(round_lattice(mu)));
                y.push(mu + complex_noise(variance, &mut rng));
            }
            let decoded = match decoders[i].decode(&y) {
                LiftOutcome::Decoded(seq) => {
                    if truth.iter().zip(&seq).any(|(a, &b)| *a != Some(b)) {
                        stages[i].errors += 1;
                    }
                    Some(seq)
                }
                LiftOutcome::Erasure { exhausted, .. } => {
                    stages[i].erasures += 1;
                    stages[i].budget_exhausted += usize::from(exhausted);
                    None
                }
            };
            if let Some(table) = scheme.tables.tables.get(&v) {
                // after an erasure the relay forwards its symbol-wise guess
                let seq = decoded.clone().unwrap_or_else(|| decoders[i].hard_decision(&y));
                let pos = ch.position(v).expect("receiving");
                for t in 0..t2 {
                    let raw = ch.node_alphabets[pos][seq[t] as usize];
                    inputs[v.0][t] = table[raw as usize] as usize;
                }
            }
            if let Some(j) = dests.iter().position(|&d| d == v) {
                let ok = decoded.and_then(|seq| scheme.codebook.decode(j, &seq)) == Some(w[j]);
                if !ok {
                    destination_errors[j] += 1;
                    wrong = true;
                }
            }
        }
        e2e += usize::from(wrong);
    }
    Ok(EmulationReport {
        trials: cfg.trials,
        noiseless: cfg.noiseless,
        cell_width: CELL_WIDTH,
        weak_slack: cfg.weak_slack,
        encoding_failures: failures,
        stages,
        destination_errors,
        end_to_end_errors: e2e,
        error_rate: if cfg.trials == 0 { 0.0 } else { e2e as f64 / cfg.trials as f64 },
    })
}
