//! Level-3 runs: fresh relay tables per level-2 block, per-block entropy
//! terms, Marton transmission trials and the best fixed mapping.

use rand::Rng;
use serde::Serialize;

use super::codebook::{prune_sets, MartonCodebook, SchemeParams};
use super::relay::{sample_relay_tables, InducedChannel, RelayTables};
use crate::cutset::ProductDist;
use crate::detnet::DetNet;
use crate::error::{Error, Result};
use crate::model::NodeId;
use crate::rng::derive_rng;

/// `H(Y_{D_J} | f)` per channel use for every nonempty subset `J` of the
/// broadcast destinations, indexed by `mask - 1`.
pub fn subset_entropies(ch: &InducedChannel, destinations: &[NodeId]) -> Result<Vec<f64>> {
    let pos: Vec<usize> = destinations
        .iter()
        .map(|&d| ch.position(d).ok_or_else(|| Error::Precondition(format!("node {d} receives nothing"))))
        .collect::<Result<_>>()?;
    Ok((1u32..1 << pos.len())
        .map(|mask| {
            let sel: Vec<usize> = (0..pos.len()).filter(|i| mask >> i & 1 == 1).map(|i| pos[i]).collect();
            ch.entropy(&sel) / ch.t1 as f64
        })
        .collect())
}

/// Largest equal rate with `|J| r <= margin (h_J - |J| n kappa)` for all
/// subsets, where `n` is the number of pruned nodes.
pub fn symmetric_rate(entropies: &[f64], n: usize, kappa: f64, margin: f64) -> f64 {
    entropies
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let size = (i as u32 + 1).count_ones() as f64;
            margin * (h - size * n as f64 * kappa) / size
        })
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

/// Vertex of the polymatroid `{R : R_J <= h_J}` maximizing `sum w_i R_i`
/// (greedy in decreasing weight; ties by index).
pub fn weighted_vertex(entropies: &[f64], weights: &[f64]) -> Vec<f64> {
    let j = weights.len();
    let mut order: Vec<usize> = (0..j).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut rates = vec![0.0; j];
    let mut mask = 0usize;
    let mut prev = 0.0;
    for i in order {
        mask |= 1 << i;
        let h = entropies[mask - 1];
        rates[i] = h - prev;
        prev = h;
    }
    rates
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockReport {
    pub block: usize,
    /// Per channel use, indexed by subset mask − 1.
    pub entropy_bits: Vec<f64>,
    pub rates: Vec<f64>,
    pub bins: Vec<u64>,
    pub trials: usize,
    pub failures: usize,
    pub errors: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Level3Report {
    pub params: SchemeParams,
    pub margin: f64,
    pub per_block: Vec<BlockReport>,
    pub mean_entropy_bits: Vec<f64>,
    pub entropy_std_error: Vec<f64>,
    pub mean_rates: Vec<f64>,
    pub trials: usize,
    pub failures: usize,
    pub errors: usize,
    pub error_rate: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct Level3Config {
    pub params: SchemeParams,
    pub margin: f64,
    pub trials_per_block: usize,
    pub pruned: bool,
    pub seed: u64,
}

/// Relay tables of level-2 block `block` for a run seeded with `seed`.
pub fn block_tables(net: &DetNet, dist: &ProductDist, params: &SchemeParams, seed: u64, block: usize) -> Result<RelayTables> {
    sample_relay_tables(net, dist, params.t1, &mut derive_rng(seed, "relay-tables", block as u64))
}

fn block_channel(net: &DetNet, dist: &ProductDist, params: &SchemeParams, seed: u64, block: usize) -> Result<InducedChannel> {
    InducedChannel::induce(net, dist, &block_tables(net, dist, params, seed, block)?)
}

/// Per-block subset entropies of the broadcast destinations for the
/// relay tables `level3_run` draws with the same seed.
pub fn block_entropies(net: &DetNet, dist: &ProductDist, params: &SchemeParams, seed: u64) -> Result<Vec<Vec<f64>>> {
    params.check()?;
    let dests = net.roles().bc_destinations().to_vec();
    (0..params.t3)
        .map(|b| subset_entropies(&block_channel(net, dist, params, seed, b)?, &dests))
        .collect()
}

/// Block whose relay tables maximize `sum weights_i R_i(t3)` over the
/// per-block rate region; ties go to the lowest index.
pub fn best_fixed_mapping(net: &DetNet, dist: &ProductDist, params: &SchemeParams, seed: u64, weights: &[f64]) -> Result<usize> {
    let per_block = block_entropies(net, dist, params, seed)?;
    if weights.len() != net.roles().bc_destinations().len() {
        return Err(Error::Dimension("one weight per broadcast destination".into()));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (b, h) in per_block.iter().enumerate() {
        let r = weighted_vertex(h, weights);
        let v: f64 = r.iter().zip(weights).map(|(a, w)| a * w).sum();
        if v > best.1 + 1e-12 {
            best = (b, v);
        }
    }
    Ok(best.0)
}

/// Runs `t3` level-2 blocks. Each block samples relay tables, sets equal
/// rates `margin (h_J - |J| N kappa) / |J|` from its own entropies, builds a
/// codebook and transmits random message tuples. Encoding failures and
/// erasures count as errors.
pub fn level3_run(net: &DetNet, dist: &ProductDist, cfg: &Level3Config) -> Result<Level3Report> {
    let params = cfg.params;
    params.check()?;
    let dests = net.roles().bc_destinations().to_vec();
    let mcs = net.roles().mc_destinations().to_vec();
    if dests.is_empty() {
        return Err(Error::Precondition("no broadcast destination".into()));
    }
    let n = net.receiving_nodes().len();
    let mut per_block = Vec::new();
    for b in 0..params.t3 {
        let ch = block_channel(net, dist, &params, cfg.seed, b)?;
        let h = subset_entropies(&ch, &dests)?;
        let kappa = if cfg.pruned { params.kappa } else { 0.0 };
        let r = symmetric_rate(&h, n, kappa, cfg.margin);
        let rates = vec![r; dests.len()];
        let pruned = if cfg.pruned {
            Some(prune_sets(&ch, &params, &mut derive_rng(cfg.seed, "prune", b as u64))?)
        } else {
            None
        };
        let book = MartonCodebook::build(&ch, &dests, &rates, &params, cfg.seed ^ b as u64, pruned.as_ref())?;
        let decoders = mcs.iter().map(|&m| book.multicast_decoder(m)).collect::<Result<Vec<_>>>()?;
        let mut rng = derive_rng(cfg.seed, "level3-trials", b as u64);
        let (mut failures, mut errors) = (0, 0);
        for _ in 0..cfg.trials_per_block {
            let w: Vec<u64> = book.bins().iter().map(|&m| rng.random_range(0..m)).collect();
            let enc = book.encode(&w, &mut rng)?;
            failures += usize::from(enc.is_failure());
            let y = book.received(enc.block());
            let mut ok = y.iter().enumerate().all(|(i, s)| book.decode(i, s) == Some(w[i]));
            for d in &decoders {
                ok &= d.decode(&ch.node_sequence(d.position, enc.block())).as_deref() == Some(w.as_slice());
            }
            errors += usize::from(!ok);
        }
        per_block.push(BlockReport {
            block: b,
            entropy_bits: h,
            rates,
            bins: book.bins().to_vec(),
            trials: cfg.trials_per_block,
            failures,
            errors,
        });
    }
    let t3 = per_block.len() as f64;
    let k = per_block[0].entropy_bits.len();
    let mean: Vec<f64> = (0..k).map(|i| per_block.iter().map(|b| b.entropy_bits[i]).sum::<f64>() / t3).collect();
    let se: Vec<f64> = (0..k)
        .map(|i| {
            if per_block.len() < 2 {
                return 0.0;
            }
            let var = per_block.iter().map(|b| (b.entropy_bits[i] - mean[i]).powi(2)).sum::<f64>() / (t3 - 1.0);
            (var / t3).sqrt()
        })
        .collect();
    let mean_rates = (0..dests.len()).map(|i| per_block.iter().map(|b| b.rates[i]).sum::<f64>() / t3).collect();
    let trials: usize = per_block.iter().map(|b| b.trials).sum();
    let failures = per_block.iter().map(|b| b.failures).sum();
    let errors = per_block.iter().map(|b| b.errors).sum();
    Ok(Level3Report {
        params,
        margin: cfg.margin,
        per_block,
        mean_entropy_bits: mean,
        entropy_std_error: se,
        mean_rates,
        trials,
        failures,
        errors,
        error_rate: if trials == 0 { 0.0 } else { errors as f64 / trials as f64 },
    })
}
