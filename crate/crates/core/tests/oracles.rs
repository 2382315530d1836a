//! Library results against independent closed forms and direct simulation.

use bcnet_core::cutset::{dsn_cut_value, gaussian_cut_value, uniform_inputs, Cut};
use bcnet_core::detnet::DetNet;
use bcnet_core::dsn::emulation::{emulation_run, EmulationConfig, EmulationScheme};
use bcnet_core::dsn::DsnNetwork;
use bcnet_core::marton::{
    block_entropies, expected_entropy, sample_relay_tables, subset_entropies, symmetric_rate, uniform_dist,
    InducedChannel, SchemeParams,
};
use bcnet_core::rng::derive_rng;
use bcnet_core::{CMatrix, GaussianNetwork, LayeredNetwork, LdnNetwork, NodeId, NodeSet, Roles};
use num_complex::Complex64;

fn chain_ldn() -> DetNet {
    let net = LdnNetwork::from_shifts(2, 1, 3, Roles::broadcast(0, &[2], &[]), &[(0, 1, 1), (1, 2, 1)]).unwrap();
    DetNet::from_ldn(&LayeredNetwork::from_network(net).unwrap()).unwrap()
}

fn ln_binom(n: u64, k: u64) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// Expected entropy of the image of a uniform `n`-point set under a uniform
/// random map into `m` points: `m E[f(K)]` with `K ~ Binom(n, 1/m)`.
fn random_map_entropy(n: u64, m: u64) -> f64 {
    let p = 1.0 / m as f64;
    let mut e = 0.0;
    for k in 1..=n {
        let w = (ln_binom(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp();
        let f = k as f64 / n as f64;
        e += w * -f * f.log2();
    }
    m as f64 * e
}

#[test]
fn expected_block_entropy_of_a_random_relay() {
    let net = chain_ldn();
    let dist = uniform_dist(&net);
    for t1 in 1..=3 {
        let got = expected_entropy(&net, &dist, t1, &[NodeId(2)]).unwrap();
        let n = 1u64 << t1;
        let want = random_map_entropy(n, n);
        assert!((got - want).abs() < 1e-9, "T1={t1}: {got} vs {want}");
    }
    // hand value for T1 = 1: the relay map is constant with probability 1/2
    assert!((random_map_entropy(2, 2) - 0.5).abs() < 1e-12);
}

#[test]
fn per_use_loss_does_not_grow_with_block_length() {
    let net = chain_ldn();
    let dist = uniform_dist(&net);
    let loss: Vec<f64> = (1..=3)
        .map(|t1| 1.0 - expected_entropy(&net, &dist, t1, &[NodeId(2)]).unwrap() / t1 as f64)
        .chain((4..=8).map(|t1| 1.0 - random_map_entropy(1 << t1, 1 << t1) / t1 as f64))
        .collect();
    for w in loss.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{loss:?}");
    }
}

#[test]
fn block_entropies_average_to_the_expectation() {
    let net = chain_ldn();
    let dist = uniform_dist(&net);
    let params = SchemeParams {
        t1: 2,
        t2: 4,
        t3: 400,
        delta: 0.1,
        kappa: 0.0,
    };
    let blocks = block_entropies(&net, &dist, &params, 99).unwrap();
    let xs: Vec<f64> = blocks.iter().map(|h| h[0]).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let want = random_map_entropy(4, 4) / 2.0;
    assert!((mean - want).abs() <= 3.0 * (var / n).sqrt(), "mean {mean} vs {want}");
}

/// Shift-matrix action on a bit vector stored little end first.
fn shift_apply(x: &[u32], n: usize) -> Vec<u32> {
    let q = x.len();
    let mut y = vec![0; q];
    for j in 0..n {
        y[j + q - n] ^= x[j];
    }
    y
}

fn bits(v: u64, q: usize) -> Vec<u32> {
    (0..q).map(|i| (v >> i & 1) as u32).collect()
}

fn value(b: &[u32]) -> u64 {
    b.iter().enumerate().map(|(i, &x)| u64::from(x) << i).sum()
}

#[test]
fn induced_channel_matches_direct_simulation() {
    // diamond over F_2^3 with two-use blocks
    let net = LdnNetwork::from_shifts(
        2,
        3,
        4,
        Roles::broadcast(0, &[3], &[]),
        &[(0, 1, 2), (0, 2, 1), (1, 3, 1), (2, 3, 2)],
    )
    .unwrap();
    let det = DetNet::from_ldn(&LayeredNetwork::from_network(net).unwrap()).unwrap();
    let dist = uniform_dist(&det);
    let t1 = 2;
    let tables = sample_relay_tables(&det, &dist, t1, &mut derive_rng(5, "oracle", 0)).unwrap();
    let ch = InducedChannel::induce(&det, &dist, &tables).unwrap();
    let raw = |pos: usize, x: usize| ch.node_alphabets[pos][ch.outputs[x][pos] as usize];
    let pos = |v: usize| ch.position(NodeId(v)).unwrap();
    for x in 0..64u64 {
        let xs = [x % 8, x / 8];
        let y1: Vec<u64> = xs.iter().map(|&s| value(&shift_apply(&bits(s, 3), 2))).collect();
        let y2: Vec<u64> = xs.iter().map(|&s| value(&shift_apply(&bits(s, 3), 1))).collect();
        let b1 = y1[0] + 8 * y1[1];
        let b2 = y2[0] + 8 * y2[1];
        assert_eq!(raw(pos(1), x as usize), b1);
        assert_eq!(raw(pos(2), x as usize), b2);
        let u1 = tables.tables[&NodeId(1)][b1 as usize];
        let u2 = tables.tables[&NodeId(2)][b2 as usize];
        let d: Vec<u64> = (0..2)
            .map(|t| {
                let a = shift_apply(&bits(u1 >> (3 * t) & 7, 3), 1);
                let b = shift_apply(&bits(u2 >> (3 * t) & 7, 3), 2);
                value(&a.iter().zip(&b).map(|(p, q)| p ^ q).collect::<Vec<_>>())
            })
            .collect();
        assert_eq!(raw(pos(3), x as usize), d[0] + 8 * d[1]);
    }
}

#[test]
fn scalar_and_mimo_gaussian_cuts() {
    let h = Complex64::new(1.0, -2.5);
    let p2p = GaussianNetwork::scalar(2, Roles::broadcast(0, &[1], &[]), &[(0, 1, h)]).unwrap();
    let c = Cut {
        omega: NodeSet::empty().with(NodeId(0)),
    };
    let v = gaussian_cut_value(&p2p, &c, None).unwrap();
    assert!((v - (1.0 + h.norm_sqr()).log2()).abs() < 1e-12);

    // two senders into one receiver: log2(1 + |a|^2 + |b|^2)
    let (a, b) = (Complex64::new(2.0, 1.0), Complex64::new(-0.5, 3.0));
    let mac = GaussianNetwork::scalar(3, Roles::broadcast(0, &[2], &[]), &[(0, 2, a), (1, 2, b)]).unwrap();
    let c = Cut {
        omega: NodeSet::empty().with(NodeId(0)).with(NodeId(1)),
    };
    let v = gaussian_cut_value(&mac, &c, None).unwrap();
    assert!((v - (1.0 + a.norm_sqr() + b.norm_sqr()).log2()).abs() < 1e-12);

    // fully correlated inputs add coherently
    let k = CMatrix::from_fn(3, 3, |r, c| if r < 2 && c < 2 || r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
    let v = gaussian_cut_value(&mac, &c, Some(&k)).unwrap();
    assert!((v - (1.0 + (a + b).norm_sqr()).log2()).abs() < 1e-9, "{v}");
}

#[test]
fn dsn_link_with_distinct_outputs_carries_its_alphabet() {
    let net = GaussianNetwork::scalar(2, Roles::broadcast(0, &[1], &[]), &[(0, 1, Complex64::new(8.0, 0.0))]).unwrap();
    let dsn = DsnNetwork::derive(&net, 3).unwrap();
    let c = Cut {
        omega: NodeSet::empty().with(NodeId(0)),
    };
    // 64 grid points land on 64 different lattice points
    let v = dsn_cut_value(&dsn, &c, &uniform_inputs(&dsn)).unwrap();
    assert!((v - 6.0).abs() < 1e-12, "{v}");
}

#[test]
fn noiseless_emulation_reproduces_the_discrete_network() {
    let net = GaussianNetwork::scalar(
        3,
        Roles::broadcast(0, &[2], &[]),
        &[(0, 1, Complex64::new(3.0, 1.0)), (1, 2, Complex64::new(2.0, -1.0))],
    )
    .unwrap();
    let dsn = DsnNetwork::derive(&net, 1).unwrap();
    let det = DetNet::from_dsn(&dsn).unwrap();
    let dist = uniform_dist(&det);
    let tables = sample_relay_tables(&det, &dist, 1, &mut derive_rng(3, "oracle", 1)).unwrap();
    let ch = InducedChannel::induce(&det, &dist, &tables).unwrap();
    let params = SchemeParams {
        t1: 1,
        t2: 6,
        t3: 1,
        delta: 1.0 / 6.0,
        kappa: 0.1,
    };
    let h = subset_entropies(&ch, &[NodeId(2)]).unwrap();
    let r = symmetric_rate(&h, 2, params.kappa, 0.7);
    let scheme = EmulationScheme::build(&dsn, dist, tables, &params, &[r], 3).unwrap();
    let cfg = EmulationConfig {
        trials: 40,
        seed: 3,
        noiseless: true,
        ..EmulationConfig::default()
    };
    let rep = emulation_run(&scheme, &cfg).unwrap();
    for s in &rep.stages {
        assert_eq!((s.erasures, s.errors), (0, 0), "node {}", s.node);
    }
    assert_eq!(rep.end_to_end_errors, rep.encoding_failures);
}
