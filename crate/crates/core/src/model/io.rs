//! JSON network descriptions.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    check_structure, CMatrix, Edge, GaussianNetwork, LdnNetwork, RelayNetwork, Roles,
    ValidationReport,
};
use crate::error::{Error, Result};
use crate::ff::{is_prime, FpMatrix, MAX_PRIME};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Gaussian,
    Ldn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDescription {
    pub kind: NetworkKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    pub nodes: usize,
    pub source: usize,
    pub bc_destinations: Vec<usize>,
    #[serde(default)]
    pub mc_destinations: Vec<usize>,
    pub gains: Vec<GainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antennas: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarGain {
    pub from: usize,
    pub to: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftGain {
    pub from: usize,
    pub to: usize,
    pub shift: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMatrixGain {
    pub from: usize,
    pub to: usize,
    pub matrix: Vec<Vec<u64>>,
}

/// Complex matrix entries are `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexMatrixGain {
    pub from: usize,
    pub to: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Scalar(ScalarGain),
    Shift(ShiftGain),
    FieldMatrix(FieldMatrixGain),
    ComplexMatrix(ComplexMatrixGain),
}

impl GainSpec {
    pub fn edge(&self) -> Edge {
        let (from, to) = match self {
            GainSpec::Scalar(g) => (g.from, g.to),
            GainSpec::Shift(g) => (g.from, g.to),
            GainSpec::FieldMatrix(g) => (g.from, g.to),
            GainSpec::ComplexMatrix(g) => (g.from, g.to),
        };
        Edge::new(from, to)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnyNetwork {
    Gaussian(GaussianNetwork),
    Ldn(LdnNetwork),
}

impl AnyNetwork {
    pub fn node_count(&self) -> usize {
        match self {
            AnyNetwork::Gaussian(n) => n.node_count(),
            AnyNetwork::Ldn(n) => n.node_count(),
        }
    }

    pub fn roles(&self) -> &Roles {
        match self {
            AnyNetwork::Gaussian(n) => n.roles(),
            AnyNetwork::Ldn(n) => n.roles(),
        }
    }
}

impl NetworkDescription {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network descriptions always serialize")
    }

    fn roles(&self) -> Roles {
        Roles::broadcast(self.source, &self.bc_destinations, &self.mc_destinations)
    }

    pub fn build(&self) -> Result<AnyNetwork> {
        validate(self).into_result()?;
        let roles = self.roles();
        match self.kind {
            NetworkKind::Gaussian => {
                let antennas = self.antennas.clone().unwrap_or_else(|| vec![1; self.nodes]);
                let mut gains = BTreeMap::new();
                for g in &self.gains {
                    let m = match g {
                        GainSpec::Scalar(s) => CMatrix::from_element(1, 1, Complex64::new(s.re, s.im)),
                        GainSpec::ComplexMatrix(c) => {
                            let rows = c.matrix.len();
                            let cols = c.matrix.first().map_or(0, Vec::len);
                            CMatrix::from_fn(rows, cols, |r, k| {
                                let [re, im] = c.matrix[r][k];
                                Complex64::new(re, im)
                            })
                        }
                        _ => unreachable!("validated"),
                    };
                    gains.insert(g.edge(), m);
                }
                Ok(AnyNetwork::Gaussian(GaussianNetwork::new(self.nodes, roles, antennas, gains)?))
            }
            NetworkKind::Ldn => {
                let (p, q) = (self.p.unwrap_or(0), self.q.unwrap_or(0));
                let mut gains = BTreeMap::new();
                for g in &self.gains {
                    let m = match g {
                        GainSpec::Shift(s) => FpMatrix::shift(p, q, s.shift)?,
                        GainSpec::FieldMatrix(f) => {
                            let rows: Vec<Vec<u32>> = f
                                .matrix
                                .iter()
                                .map(|r| r.iter().map(|&x| x as u32).collect())
                                .collect();
                            FpMatrix::from_rows(p, &rows)?
                        }
                        _ => unreachable!("validated"),
                    };
                    gains.insert(g.edge(), m);
                }
                Ok(AnyNetwork::Ldn(LdnNetwork::new(p, q, self.nodes, roles, gains)?))
            }
        }
    }

    pub fn from_ldn(net: &LdnNetwork) -> Result<Self> {
        let (source, bc, mc) = broadcast_parts(net.roles())?;
        Ok(NetworkDescription {
            kind: NetworkKind::Ldn,
            p: Some(net.p()),
            q: Some(net.q()),
            nodes: net.node_count(),
            source,
            bc_destinations: bc,
            mc_destinations: mc,
            gains: net
                .gains()
                .iter()
                .map(|(e, g)| {
                    GainSpec::FieldMatrix(FieldMatrixGain {
                        from: e.from.0,
                        to: e.to.0,
                        matrix: g
                            .to_rows()
                            .into_iter()
                            .map(|r| r.into_iter().map(u64::from).collect())
                            .collect(),
                    })
                })
                .collect(),
            antennas: None,
        })
    }

    pub fn from_gaussian(net: &GaussianNetwork) -> Result<Self> {
        let (source, bc, mc) = broadcast_parts(net.roles())?;
        let scalar = net.is_single_antenna();
        Ok(NetworkDescription {
            kind: NetworkKind::Gaussian,
            p: None,
            q: None,
            nodes: net.node_count(),
            source,
            bc_destinations: bc,
            mc_destinations: mc,
            gains: net
                .gains()
                .iter()
                .map(|(e, g)| {
                    if scalar {
                        GainSpec::Scalar(ScalarGain {
                            from: e.from.0,
                            to: e.to.0,
                            re: g[(0, 0)].re,
                            im: g[(0, 0)].im,
                        })
                    } else {
                        GainSpec::ComplexMatrix(ComplexMatrixGain {
                            from: e.from.0,
                            to: e.to.0,
                            matrix: (0..g.nrows())
                                .map(|r| (0..g.ncols()).map(|c| [g[(r, c)].re, g[(r, c)].im]).collect())
                                .collect(),
                        })
                    }
                })
                .collect(),
            antennas: (!scalar).then(|| net.antennas().to_vec()),
        })
    }
}

fn broadcast_parts(roles: &Roles) -> Result<(usize, Vec<usize>, Vec<usize>)> {
    let source = roles.source()?.0;
    Ok((
        source,
        roles.bc_destinations().iter().map(|d| d.0).collect(),
        roles.mc_destinations().iter().map(|d| d.0).collect(),
    ))
}

/// Reports every invariant violation in a description without building it.
pub fn validate(desc: &NetworkDescription) -> ValidationReport {
    let mut report = ValidationReport::default();
    let edges: Vec<Edge> = desc.gains.iter().map(GainSpec::edge).collect();
    check_structure(desc.nodes, &desc.roles(), edges.iter(), &mut report);
    let mut sorted = edges.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != edges.len() {
        report.push("duplicate gain", "an edge has more than one gain entry");
    }
    match desc.kind {
        NetworkKind::Gaussian => validate_gaussian(desc, &mut report),
        NetworkKind::Ldn => validate_ldn(desc, &mut report),
    }
    report
}

fn validate_gaussian(desc: &NetworkDescription, report: &mut ValidationReport) {
    if desc.p.is_some() || desc.q.is_some() {
        report.push("field", "p and q apply only to ldn networks");
    }
    let antennas = match &desc.antennas {
        Some(a) if a.len() != desc.nodes => {
            report.push("antenna count", format!("{} antenna entries for {} nodes", a.len(), desc.nodes));
            return;
        }
        Some(a) => a.clone(),
        None => vec![1; desc.nodes],
    };
    if antennas.contains(&0) {
        report.push("antenna count", "antenna counts must be positive");
    }
    for g in &desc.gains {
        let e = g.edge();
        if e.from.0 >= desc.nodes || e.to.0 >= desc.nodes {
            continue;
        }
        let expect = (antennas[e.to.0], antennas[e.from.0]);
        let (shape, finite) = match g {
            GainSpec::Scalar(s) => ((1, 1), s.re.is_finite() && s.im.is_finite()),
            GainSpec::ComplexMatrix(c) => {
                let cols = c.matrix.first().map_or(0, Vec::len);
                if c.matrix.iter().any(|r| r.len() != cols) {
                    report.push("gain shape", format!("gain {}->{} has ragged rows", e.from, e.to));
                }
                (
                    (c.matrix.len(), cols),
                    c.matrix.iter().flatten().all(|z| z[0].is_finite() && z[1].is_finite()),
                )
            }
            _ => {
                report.push("gain kind", format!("gain {}->{} is not a complex gain", e.from, e.to));
                continue;
            }
        };
        if shape != expect {
            report.push(
                "gain shape",
                format!(
                    "gain {}->{} is {}x{}, expected {}x{}",
                    e.from, e.to, shape.0, shape.1, expect.0, expect.1
                ),
            );
        }
        if !finite {
            report.push("gain value", format!("gain {}->{} is not finite", e.from, e.to));
        }
    }
}

fn validate_ldn(desc: &NetworkDescription, report: &mut ValidationReport) {
    if desc.antennas.is_some() {
        report.push("antenna count", "antennas apply only to gaussian networks");
    }
    let (Some(p), Some(q)) = (desc.p, desc.q) else {
        report.push("field", "ldn networks need both p and q");
        return;
    };
    if !(p < MAX_PRIME && is_prime(p)) {
        report.push("field", format!("p = {p} is not a prime below 65536"));
    }
    if q == 0 {
        report.push("field", "q must be positive");
    }
    for g in &desc.gains {
        let e = g.edge();
        match g {
            GainSpec::Shift(s) => {
                if s.shift > q {
                    report.push("shift range", format!("shift {} on {}->{} exceeds q = {q}", s.shift, e.from, e.to));
                }
            }
            GainSpec::FieldMatrix(f) => {
                if f.matrix.len() != q || f.matrix.iter().any(|r| r.len() != q) {
                    report.push("gain shape", format!("gain {}->{} is not {q}x{q}", e.from, e.to));
                }
                if f.matrix.iter().flatten().any(|&x| x >= u64::from(p)) {
                    report.push(
                        "entry out of field",
                        format!("gain {}->{} has an entry outside [0, {p})", e.from, e.to),
                    );
                }
            }
            _ => report.push("gain kind", format!("gain {}->{} is not a field gain", e.from, e.to)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_is_valid() {
        let desc = NetworkDescription::parse(
            r#"{"kind":"gaussian","nodes":3,"source":0,"bc_destinations":[2],
                "gains":[{"from":0,"to":1,"re":1.0,"im":0.0},{"from":1,"to":2,"re":1.0,"im":0.0}]}"#,
        )
        .unwrap();
        assert!(validate(&desc).is_valid());
        assert!(matches!(desc.build().unwrap(), AnyNetwork::Gaussian(_)));
    }

    #[test]
    fn source_as_destination_is_reported() {
        let desc = NetworkDescription::parse(
            r#"{"kind":"gaussian","nodes":2,"source":0,"bc_destinations":[0],"gains":[]}"#,
        )
        .unwrap();
        assert!(validate(&desc).has("source is destination"));
    }

    #[test]
    fn entry_out_of_field_is_reported() {
        let desc = NetworkDescription::parse(
            r#"{"kind":"ldn","p":2,"q":2,"nodes":2,"source":0,"bc_destinations":[1],
                "gains":[{"from":0,"to":1,"matrix":[[1,3],[0,1]]}]}"#,
        )
        .unwrap();
        let report = validate(&desc);
        assert!(report.has("entry out of field"));
        assert!(matches!(desc.build(), Err(Error::InvalidNetwork(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = NetworkDescription::parse(
            r#"{"kind":"ldn","p":2,"q":1,"nodes":2,"source":0,"bc_destinations":[1],"gains":[],"extra":1}"#,
        );
        assert!(matches!(err, Err(Error::Parse(_))));
        let err = NetworkDescription::parse(
            r#"{"kind":"ldn","p":2,"q":1,"nodes":2,"source":0,"bc_destinations":[1],
                "gains":[{"from":0,"to":1,"shift":1,"bogus":2}]}"#,
        );
        assert!(matches!(err, Err(Error::Parse(_))));
    }

    #[test]
    fn round_trip_through_json() {
        let desc = NetworkDescription::parse(
            r#"{"kind":"ldn","p":3,"q":2,"nodes":3,"source":0,"bc_destinations":[2],"mc_destinations":[1],
                "gains":[{"from":0,"to":1,"shift":1},{"from":0,"to":2,"matrix":[[2,1],[0,1]]}]}"#,
        )
        .unwrap();
        let AnyNetwork::Ldn(net) = desc.build().unwrap() else { panic!() };
        let again = NetworkDescription::parse(&NetworkDescription::from_ldn(&net).unwrap().to_json()).unwrap();
        assert_eq!(again.build().unwrap(), AnyNetwork::Ldn(net));
    }

    #[test]
    fn mimo_gains_need_matching_shapes() {
        let desc = NetworkDescription::parse(
            r#"{"kind":"gaussian","nodes":2,"source":0,"bc_destinations":[1],"antennas":[2,1],
                "gains":[{"from":0,"to":1,"matrix":[[[1,0],[0,1]]]}]}"#,
        )
        .unwrap();
        assert!(validate(&desc).is_valid());
        let bad = NetworkDescription { antennas: Some(vec![1, 1]), ..desc };
        assert!(validate(&bad).has("gain shape"));
    }
}
