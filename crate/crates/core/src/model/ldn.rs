use std::collections::BTreeMap;

use super::{check_structure, Edge, NodeId, RelayNetwork, Roles, ValidationReport};
use crate::error::Result;
use crate::ff::{is_prime, FpMatrix, MAX_PRIME};

/// Linear deterministic network over F_p^q: `y_j = sum_i G_ij x_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LdnNetwork {
    p: u32,
    q: usize,
    node_count: usize,
    roles: Roles,
    gains: BTreeMap<Edge, FpMatrix>,
}

impl LdnNetwork {
    pub fn new(
        p: u32,
        q: usize,
        node_count: usize,
        roles: Roles,
        gains: BTreeMap<Edge, FpMatrix>,
    ) -> Result<Self> {
        let net = LdnNetwork {
            p,
            q,
            node_count,
            roles,
            gains,
        };
        net.validate().into_result()?;
        Ok(net)
    }

    /// Network whose links are all shift matrices with the given shift counts.
    pub fn from_shifts(
        p: u32,
        q: usize,
        node_count: usize,
        roles: Roles,
        shifts: &[(usize, usize, usize)],
    ) -> Result<Self> {
        let mut gains = BTreeMap::new();
        for &(i, j, n) in shifts {
            gains.insert(Edge::new(i, j), FpMatrix::shift(p, q, n)?);
        }
        Self::new(p, q, node_count, roles, gains)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        check_structure(self.node_count, &self.roles, self.gains.keys(), &mut report);
        if !(self.p < MAX_PRIME && is_prime(self.p)) {
            report.push("field", format!("p = {} is not a prime below 65536", self.p));
        }
        if self.q == 0 {
            report.push("field", "q must be positive");
        }
        for (e, g) in &self.gains {
            if g.p() != self.p {
                report.push("field", format!("gain {}->{} is over F_{}", e.from, e.to, g.p()));
            }
            if g.rows() != self.q || g.cols() != self.q {
                report.push(
                    "gain shape",
                    format!("gain {}->{} is {}x{}, expected {q}x{q}", e.from, e.to, g.rows(), g.cols(), q = self.q),
                );
            }
        }
        report
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn gain(&self, from: NodeId, to: NodeId) -> Option<&FpMatrix> {
        self.gains.get(&Edge { from, to })
    }
}

impl RelayNetwork for LdnNetwork {
    type Gain = FpMatrix;

    fn node_count(&self) -> usize {
        self.node_count
    }

    fn roles(&self) -> &Roles {
        &self.roles
    }

    fn gains(&self) -> &BTreeMap<Edge, FpMatrix> {
        &self.gains
    }

    fn rebuild(
        &self,
        node_count: usize,
        roles: Roles,
        gains: BTreeMap<Edge, FpMatrix>,
        _origin: &[Option<NodeId>],
    ) -> Result<Self> {
        LdnNetwork::new(self.p, self.q, node_count, roles, gains)
    }

    fn reciprocal_gain(gain: &FpMatrix) -> FpMatrix {
        gain.transpose()
    }
}
