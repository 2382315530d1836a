use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{check_structure, Edge, NodeId, RelayNetwork, Roles, ValidationReport};
use crate::error::Result;

pub type CMatrix = DMatrix<Complex64>;

/// Gaussian relay network with unit noise variance and unit per-node power.
///
/// The gain of edge `k -> l` is an `m_l x m_k` complex matrix; single
/// antenna nodes use `1 x 1` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianNetwork {
    node_count: usize,
    roles: Roles,
    antennas: Vec<usize>,
    gains: BTreeMap<Edge, CMatrix>,
}

impl GaussianNetwork {
    pub fn new(
        node_count: usize,
        roles: Roles,
        antennas: Vec<usize>,
        gains: BTreeMap<Edge, CMatrix>,
    ) -> Result<Self> {
        let net = GaussianNetwork {
            node_count,
            roles,
            antennas,
            gains,
        };
        net.validate().into_result()?;
        Ok(net)
    }

    /// Single-antenna network from scalar gains.
    pub fn scalar(node_count: usize, roles: Roles, gains: &[(usize, usize, Complex64)]) -> Result<Self> {
        let gains = gains
            .iter()
            .map(|&(k, l, h)| (Edge::new(k, l), CMatrix::from_element(1, 1, h)))
            .collect();
        Self::new(node_count, roles, vec![1; node_count], gains)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        check_structure(self.node_count, &self.roles, self.gains.keys(), &mut report);
        if self.antennas.len() != self.node_count {
            report.push(
                "antenna count",
                format!("{} antenna entries for {} nodes", self.antennas.len(), self.node_count),
            );
            return report;
        }
        for (v, &m) in self.antennas.iter().enumerate() {
            if m == 0 {
                report.push("antenna count", format!("node {v} has zero antennas"));
            }
        }
        for (e, g) in &self.gains {
            if e.from.0 >= self.node_count || e.to.0 >= self.node_count {
                continue;
            }
            let (rows, cols) = (self.antennas[e.to.0], self.antennas[e.from.0]);
            if g.nrows() != rows || g.ncols() != cols {
                report.push(
                    "gain shape",
                    format!(
                        "gain {}->{} is {}x{}, expected {rows}x{cols}",
                        e.from,
                        e.to,
                        g.nrows(),
                        g.ncols()
                    ),
                );
            }
            if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                report.push("gain value", format!("gain {}->{} is not finite", e.from, e.to));
            }
        }
        report
    }

    pub fn antennas(&self) -> &[usize] {
        &self.antennas
    }

    pub fn antenna_count(&self, v: NodeId) -> usize {
        self.antennas[v.0]
    }

    /// Total antenna count `M`.
    pub fn total_antennas(&self) -> usize {
        self.antennas.iter().sum()
    }

    pub fn gain(&self, from: NodeId, to: NodeId) -> Option<&CMatrix> {
        self.gains.get(&Edge { from, to })
    }

    pub fn is_single_antenna(&self) -> bool {
        self.antennas.iter().all(|&m| m == 1)
    }

    /// Scalar gain of a single-antenna link, zero if absent.
    pub fn scalar_gain(&self, from: NodeId, to: NodeId) -> Complex64 {
        self.gain(from, to).map_or(Complex64::new(0.0, 0.0), |g| g[(0, 0)])
    }
}

impl RelayNetwork for GaussianNetwork {
    type Gain = CMatrix;

    fn node_count(&self) -> usize {
        self.node_count
    }

    fn roles(&self) -> &Roles {
        &self.roles
    }

    fn gains(&self) -> &BTreeMap<Edge, CMatrix> {
        &self.gains
    }

    fn rebuild(
        &self,
        node_count: usize,
        roles: Roles,
        gains: BTreeMap<Edge, CMatrix>,
        origin: &[Option<NodeId>],
    ) -> Result<Self> {
        let antennas = (0..node_count)
            .map(|v| origin.get(v).copied().flatten().map_or(1, |o| self.antennas[o.0]))
            .collect();
        GaussianNetwork::new(node_count, roles, antennas, gains)
    }

    /// Channel reciprocity keeps the coefficient and swaps the antenna
    /// roles, which for matrices is the plain transpose.
    fn reciprocal_gain(gain: &CMatrix) -> CMatrix {
        gain.transpose()
    }
}
