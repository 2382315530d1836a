//! Discrete superposition networks: finite input grids and integer-rounded
//! superposition, plus simulation of the matching Gaussian channel.

pub mod emulation;
pub mod fractional;
pub mod lift;

use num_complex::{Complex, Complex64};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{GaussianNetwork, NodeId, RelayNetwork};

/// A Gaussian integer.
pub type Lattice = Complex<i32>;

/// Largest grid resolution accepted by the default rule.
pub const MAX_DEFAULT_BITS: u32 = 4;

/// Nearest Gaussian integer, ties rounded away from zero on each axis.
pub fn round_lattice(z: Complex64) -> Lattice {
    Lattice::new(z.re.round() as i32, z.im.round() as i32)
}

/// The `2^b` grid points `(i + 1/2) / 2^b - 1/2` on one real axis.
pub fn axis_grid(b: u32) -> Vec<f64> {
    let n = 1usize << b;
    (0..n).map(|i| (i as f64 + 0.5) / n as f64 - 0.5).collect()
}

/// Complex grid with `4^b` points; index `i_re * 2^b + i_im`.
pub fn complex_grid(b: u32) -> Vec<Complex64> {
    let axis = axis_grid(b);
    axis.iter()
        .flat_map(|&re| axis.iter().map(move |&im| Complex64::new(re, im)))
        .collect()
}

/// `ceil(log2(1 + max_l sum_k |h_kl|))`, clamped to `1..=4`.
pub fn default_resolution(net: &GaussianNetwork) -> u32 {
    let n = net.node_count();
    let worst = (0..n)
        .map(|l| {
            (0..n)
                .map(|k| net.scalar_gain(NodeId(k), NodeId(l)).norm())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    ((1.0 + worst).log2().ceil() as u32).clamp(1, MAX_DEFAULT_BITS)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DsnNetwork {
    base: GaussianNetwork,
    bits: Option<u32>,
    alphabets: Vec<Vec<Complex64>>,
}

impl DsnNetwork {
    /// Every node uses the `b`-bit complex grid.
    pub fn derive(base: &GaussianNetwork, b: u32) -> Result<Self> {
        if b == 0 {
            return Err(Error::Precondition("grid resolution must be at least 1 bit".into()));
        }
        if b > 8 {
            return Err(Error::cap("grid resolution", u128::from(b), 8, "use at most 8 bits per axis"));
        }
        let grid = complex_grid(b);
        let mut dsn = Self::with_alphabets(base, vec![grid; base.node_count()])?;
        dsn.bits = Some(b);
        Ok(dsn)
    }

    /// Explicit per-node input alphabets. Only single-antenna networks have
    /// a superposition counterpart here.
    pub fn with_alphabets(base: &GaussianNetwork, alphabets: Vec<Vec<Complex64>>) -> Result<Self> {
        if !base.is_single_antenna() {
            return Err(Error::Precondition(
                "discrete superposition networks are built from single-antenna networks".into(),
            ));
        }
        if alphabets.len() != base.node_count() {
            return Err(Error::Dimension(format!(
                "{} alphabets for {} nodes",
                alphabets.len(),
                base.node_count()
            )));
        }
        if let Some(v) = alphabets.iter().position(Vec::is_empty) {
            return Err(Error::Precondition(format!("alphabet of node {v} is empty")));
        }
        Ok(DsnNetwork {
            base: base.clone(),
            bits: None,
            alphabets,
        })
    }

    pub fn base(&self) -> &GaussianNetwork {
        &self.base
    }

    pub fn bits(&self) -> Option<u32> {
        self.bits
    }

    pub fn node_count(&self) -> usize {
        self.base.node_count()
    }

    pub fn alphabet(&self, v: NodeId) -> &[Complex64] {
        &self.alphabets[v.0]
    }

    pub fn alphabet_size(&self, v: NodeId) -> usize {
        self.alphabets[v.0].len()
    }

    pub fn gain(&self, from: NodeId, to: NodeId) -> Complex64 {
        self.base.scalar_gain(from, to)
    }

    /// Nodes with a nonzero link into `v`, in index order.
    pub fn senders(&self, v: NodeId) -> Vec<NodeId> {
        self.base
            .gains()
            .keys()
            .filter(|e| e.to == v)
            .map(|e| e.from)
            .collect()
    }

    /// Unrounded superposition `sum_k h_kv x_k` for alphabet indices.
    pub fn superposition(&self, v: NodeId, inputs: &[usize]) -> Result<Complex64> {
        self.check_inputs(inputs)?;
        Ok(self
            .senders(v)
            .into_iter()
            .map(|k| self.gain(k, v) * self.alphabets[k.0][inputs[k.0]])
            .sum())
    }

    fn check_inputs(&self, inputs: &[usize]) -> Result<()> {
        if inputs.len() != self.node_count() {
            return Err(Error::Dimension(format!(
                "{} inputs for {} nodes",
                inputs.len(),
                self.node_count()
            )));
        }
        for (v, &x) in inputs.iter().enumerate() {
            if x >= self.alphabets[v].len() {
                return Err(Error::OutOfAlphabet {
                    node: NodeId(v),
                    symbol: x,
                });
            }
        }
        Ok(())
    }

    /// One noiseless channel use: `y_l = [sum_k h_kl x_k]` at every node.
    pub fn step(&self, inputs: &[usize]) -> Result<Vec<Lattice>> {
        self.check_inputs(inputs)?;
        let mut acc = vec![Complex64::new(0.0, 0.0); self.node_count()];
        for (e, g) in self.base.gains() {
            acc[e.to.0] += g[(0, 0)] * self.alphabets[e.from.0][inputs[e.from.0]];
        }
        Ok(acc.into_iter().map(round_lattice).collect())
    }
}

/// Circularly-symmetric complex Gaussian noise with the given variance.
pub fn complex_noise<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    if variance == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let axis = Normal::new(0.0, (variance / 2.0).sqrt()).expect("finite variance");
    Complex64::new(axis.sample(rng), axis.sample(rng))
}

/// One use of the Gaussian channel. `inputs[v]` holds one entry per antenna
/// of node `v`; the result has the same shape. `noise_variance` is 1 for the
/// model and 0 only in test harnesses.
pub fn gaussian_step<R: Rng + ?Sized>(
    net: &GaussianNetwork,
    inputs: &[Vec<Complex64>],
    noise_variance: f64,
    rng: &mut R,
) -> Result<Vec<Vec<Complex64>>> {
    if inputs.len() != net.node_count() {
        return Err(Error::Dimension(format!(
            "{} inputs for {} nodes",
            inputs.len(),
            net.node_count()
        )));
    }
    for (v, x) in inputs.iter().enumerate() {
        if x.len() != net.antennas()[v] {
            return Err(Error::Dimension(format!(
                "node {v} has {} antennas, got {} inputs",
                net.antennas()[v],
                x.len()
            )));
        }
    }
    let mut out: Vec<Vec<Complex64>> = net
        .antennas()
        .iter()
        .map(|&m| vec![Complex64::new(0.0, 0.0); m])
        .collect();
    for (e, g) in net.gains() {
        let x = &inputs[e.from.0];
        for (r, y) in out[e.to.0].iter_mut().enumerate() {
            for (c, xc) in x.iter().enumerate() {
                *y += g[(r, c)] * xc;
            }
        }
    }
    for y in out.iter_mut().flatten() {
        *y += complex_noise(noise_variance, rng);
    }
    Ok(out)
}

/// Gaussian channel over a block. `inputs[v][t]` is node `v`'s antenna
/// vector at time `t`. Each node's average power over the block must not
/// exceed 1.
pub fn gaussian_block<R: Rng + ?Sized>(
    net: &GaussianNetwork,
    inputs: &[Vec<Vec<Complex64>>],
    noise_variance: f64,
    rng: &mut R,
) -> Result<Vec<Vec<Vec<Complex64>>>> {
    let len = inputs.first().map_or(0, Vec::len);
    for (v, block) in inputs.iter().enumerate() {
        if block.len() != len {
            return Err(Error::Dimension(format!("node {v} block length differs")));
        }
        if len > 0 {
            let power: f64 = block.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() / len as f64;
            if power > 1.0 + 1e-9 {
                return Err(Error::Precondition(format!(
                    "node {v} average power {power:.4} exceeds 1"
                )));
            }
        }
    }
    let mut out = vec![Vec::with_capacity(len); net.node_count()];
    for t in 0..len {
        let x: Vec<Vec<Complex64>> = inputs.iter().map(|b| b[t].clone()).collect();
        for (v, y) in gaussian_step(net, &x, noise_variance, rng)?.into_iter().enumerate() {
            out[v].push(y);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Roles;
    use crate::rng::derive_rng;

    fn link(h: f64) -> GaussianNetwork {
        GaussianNetwork::scalar(2, Roles::broadcast(0, &[1], &[]), &[(0, 1, Complex64::new(h, 0.0))]).unwrap()
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(complex_grid(1).len(), 4);
        assert_eq!(axis_grid(1), vec![-0.25, 0.25]);
        assert_eq!(complex_grid(3).len(), 64);
        for x in axis_grid(4) {
            assert!((-0.5..0.5).contains(&x));
        }
    }

    #[test]
    fn rounding_examples() {
        let dsn = DsnNetwork::with_alphabets(&link(1.4), vec![vec![Complex64::new(0.25, 0.0)]; 2]).unwrap();
        assert_eq!(dsn.step(&[0, 0]).unwrap()[1], Lattice::new(0, 0));
        assert_eq!(round_lattice(Complex64::new(0.5, -0.5)), Lattice::new(1, -1));
        assert_eq!(round_lattice(Complex64::new(-1.5, 2.5)), Lattice::new(-2, 3));
        let zero = DsnNetwork::derive(&link(0.0), 2).unwrap();
        for x in 0..16 {
            assert_eq!(zero.step(&[x, 0]).unwrap(), vec![Lattice::new(0, 0); 2]);
        }
    }

    #[test]
    fn two_unit_gains_tie_rounds_up() {
        let net = GaussianNetwork::scalar(
            3,
            Roles::broadcast(0, &[2], &[]),
            &[(0, 2, Complex64::new(1.0, 0.0)), (1, 2, Complex64::new(1.0, 0.0))],
        )
        .unwrap();
        let quarter = vec![Complex64::new(0.25, 0.0)];
        let dsn = DsnNetwork::with_alphabets(&net, vec![quarter.clone(), quarter.clone(), quarter]).unwrap();
        assert_eq!(dsn.step(&[0, 0, 0]).unwrap()[2], Lattice::new(1, 0));
    }

    #[test]
    fn out_of_alphabet_is_rejected() {
        let dsn = DsnNetwork::derive(&link(1.0), 1).unwrap();
        assert!(matches!(dsn.step(&[4, 0]), Err(Error::OutOfAlphabet { .. })));
    }

    #[test]
    fn default_resolution_follows_gain() {
        assert_eq!(default_resolution(&link(1.0)), 1);
        assert_eq!(default_resolution(&link(3.0)), 2);
        assert_eq!(default_resolution(&link(8.0)), 4);
        assert_eq!(default_resolution(&link(1000.0)), 4);
    }

    #[test]
    fn gaussian_moments() {
        let net = link(2.0);
        let mut rng = derive_rng(1, "moments", 0);
        let x = vec![vec![Complex64::new(0.5, -0.25)], vec![Complex64::new(0.0, 0.0)]];
        let n = 100_000;
        let (mut sum, mut sq) = (Complex64::new(0.0, 0.0), 0.0);
        for _ in 0..n {
            let y = gaussian_step(&net, &x, 1.0, &mut rng).unwrap()[1][0];
            sum += y;
            sq += (y - Complex64::new(1.0, -0.5)).norm_sqr();
        }
        let mean = sum / n as f64;
        // each axis has variance 1/2, so the mean's per-axis std is sqrt(1/(2n))
        let tol = 3.0 * (0.5 / n as f64).sqrt();
        assert!((mean.re - 1.0).abs() < tol && (mean.im + 0.5).abs() < tol);
        let var = sq / n as f64;
        // |z|^2 is exponential with mean 1 and variance 1
        assert!((var - 1.0).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn block_power_is_enforced() {
        let net = link(1.0);
        let mut rng = derive_rng(1, "power", 0);
        let hot = vec![vec![vec![Complex64::new(1.5, 0.0)]; 4], vec![vec![Complex64::new(0.0, 0.0)]; 4]];
        assert!(gaussian_block(&net, &hot, 1.0, &mut rng).is_err());
        let ok = vec![vec![vec![Complex64::new(1.0, 0.0)]; 4], vec![vec![Complex64::new(0.0, 0.0)]; 4]];
        assert_eq!(gaussian_block(&net, &ok, 1.0, &mut rng).unwrap()[1].len(), 4);
    }
}
