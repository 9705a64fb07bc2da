//! Node placement, operator ownership and communication-range structure.
//!
//! Node 0 is always the macro base station at the origin. Small cells are
//! numbered `1..=M` and owned round-robin by the operators.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// RNG stream reserved for node placement.
const PLACEMENT_STREAM: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const MBS: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0
    }

    pub fn is_mbs(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MnoId(pub usize);

impl fmt::Display for MnoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Geometry and ownership of one network snapshot. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Vec<Point>,
    owners: Vec<Option<MnoId>>,
    num_mnos: usize,
    d_max: f64,
    range: f64,
    neighbors: Vec<Vec<NodeId>>,
}

/// Samples a topology: `num_sbs` small cells i.i.d. area-uniform on the disk of
/// radius `d_max`, SBS `i` owned by MNO `(i - 1) mod num_mnos`.
pub fn generate_topology(
    seed: u64,
    num_sbs: usize,
    num_mnos: usize,
    d_max: f64,
    range: f64,
) -> Result<Topology> {
    validate_counts(num_sbs, num_mnos, d_max, range)?;
    let mut rng = stream_rng(seed, PLACEMENT_STREAM);
    let mut positions = Vec::with_capacity(num_sbs + 1);
    positions.push(Point::ORIGIN);
    for _ in 0..num_sbs {
        let u: f64 = rng.random();
        let theta: f64 = rng.random::<f64>() * 2.0 * PI;
        let r = d_max * u.sqrt();
        positions.push(Point::new(r * theta.cos(), r * theta.sin()));
    }
    let owners = round_robin_owners(num_sbs, num_mnos);
    Topology::new(positions, owners, num_mnos, d_max, range)
}

fn validate_counts(num_sbs: usize, num_mnos: usize, d_max: f64, range: f64) -> Result<()> {
    if num_sbs == 0 {
        return Err(Error::Config("at least one SBS is required".into()));
    }
    if num_mnos == 0 {
        return Err(Error::Config("at least one MNO is required".into()));
    }
    if !(d_max > 0.0 && d_max.is_finite()) {
        return Err(Error::Config(format!("deployment radius must be positive, got {d_max}")));
    }
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::Config(format!("communication range must be positive, got {range}")));
    }
    Ok(())
}

fn round_robin_owners(num_sbs: usize, num_mnos: usize) -> Vec<Option<MnoId>> {
    std::iter::once(None)
        .chain((1..=num_sbs).map(|i| Some(MnoId((i - 1) % num_mnos))))
        .collect()
}

impl Topology {
    /// Builds a topology from explicit coordinates. `positions[0]` must be the
    /// MBS at the origin and `owners[0]` must be `None`.
    pub fn new(
        positions: Vec<Point>,
        owners: Vec<Option<MnoId>>,
        num_mnos: usize,
        d_max: f64,
        range: f64,
    ) -> Result<Self> {
        validate_counts(positions.len().saturating_sub(1), num_mnos, d_max, range)?;
        if positions.len() != owners.len() {
            return Err(Error::Config(format!(
                "{} positions but {} owner entries",
                positions.len(),
                owners.len()
            )));
        }
        if positions[0] != Point::ORIGIN || owners[0].is_some() {
            return Err(Error::Config("node 0 must be the shared MBS at (0, 0)".into()));
        }
        for (i, (p, o)) in positions.iter().zip(&owners).enumerate().skip(1) {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::Config(format!("SBS {i} has a non-finite position")));
            }
            if p.norm() > d_max * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "SBS {i} lies {:.3} m from the origin, outside d_max = {d_max}",
                    p.norm()
                )));
            }
            match o {
                Some(MnoId(n)) if *n < num_mnos => {}
                Some(MnoId(n)) => {
                    return Err(Error::Config(format!("SBS {i} owned by MNO {n} >= N = {num_mnos}")))
                }
                None => return Err(Error::Config(format!("SBS {i} has no owner"))),
            }
        }
        let neighbors = (0..positions.len())
            .map(|i| {
                (0..positions.len())
                    .filter(|&j| j != i && positions[i].distance(&positions[j]) <= range)
                    .map(NodeId)
                    .collect()
            })
            .collect();
        Ok(Topology {
            positions,
            owners,
            num_mnos,
            d_max,
            range,
            neighbors,
        })
    }

    /// Number of small cells (excludes the MBS).
    pub fn num_sbs(&self) -> usize {
        self.positions.len() - 1
    }

    /// Number of nodes including the MBS.
    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn num_mnos(&self) -> usize {
        self.num_mnos
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.positions.len()).map(NodeId)
    }

    pub fn sbs(&self) -> impl Iterator<Item = NodeId> + '_ {
        (1..self.positions.len()).map(NodeId)
    }

    pub fn contains(&self, m: NodeId) -> bool {
        m.0 < self.positions.len()
    }

    fn check(&self, m: NodeId) -> Result<()> {
        if self.contains(m) {
            Ok(())
        } else {
            Err(Error::UnknownNode(m))
        }
    }

    pub fn position(&self, m: NodeId) -> Result<Point> {
        self.check(m)?;
        Ok(self.positions[m.0])
    }

    /// Owner of an SBS; `None` for the shared MBS.
    pub fn owner(&self, m: NodeId) -> Result<Option<MnoId>> {
        self.check(m)?;
        Ok(self.owners[m.0])
    }

    /// SBSs owned by `n`, in ascending id order.
    pub fn members(&self, n: MnoId) -> Vec<NodeId> {
        self.sbs().filter(|&m| self.owners[m.0] == Some(n)).collect()
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        self.positions[a.0].distance(&self.positions[b.0])
    }

    /// Nodes other than `m` within communication range of `m`, ascending.
    pub fn comm_set(&self, m: NodeId) -> Result<&[NodeId]> {
        self.check(m)?;
        Ok(&self.neighbors[m.0])
    }

    pub(crate) fn neighbors(&self, m: NodeId) -> &[NodeId] {
        &self.neighbors[m.0]
    }

    pub fn in_range(&self, a: NodeId, b: NodeId) -> bool {
        a != b && self.distance(a, b) <= self.range
    }

    /// True when both nodes belong to the same operator. The MBS is shared by
    /// every operator, so any pair involving it counts as same-operator.
    pub fn same_mno(&self, a: NodeId, b: NodeId) -> Result<bool> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.same_mno_unchecked(a, b))
    }

    pub(crate) fn same_mno_unchecked(&self, a: NodeId, b: NodeId) -> bool {
        match (self.owners[a.0], self.owners[b.0]) {
            (Some(x), Some(y)) => x == y,
            _ => true,
        }
    }

    /// The cross-operator indicator: 1 when the pair belongs to different MNOs.
    pub fn cross_mno(&self, a: NodeId, b: NodeId) -> bool {
        !self.same_mno_unchecked(a, b)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&TopologyDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: TopologyDoc = serde_json::from_str(s)?;
        doc.try_into()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRecord {
    id: NodeId,
    x: f64,
    y: f64,
    owner: Option<MnoId>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TopologyDoc {
    num_mnos: usize,
    d_max: f64,
    range: f64,
    nodes: Vec<NodeRecord>,
}

impl From<&Topology> for TopologyDoc {
    fn from(t: &Topology) -> Self {
        TopologyDoc {
            num_mnos: t.num_mnos,
            d_max: t.d_max,
            range: t.range,
            nodes: t
                .nodes()
                .map(|m| NodeRecord {
                    id: m,
                    x: t.positions[m.0].x,
                    y: t.positions[m.0].y,
                    owner: t.owners[m.0],
                })
                .collect(),
        }
    }
}

impl TryFrom<TopologyDoc> for Topology {
    type Error = Error;

    fn try_from(mut doc: TopologyDoc) -> Result<Self> {
        doc.nodes.sort_by_key(|n| n.id);
        for (i, n) in doc.nodes.iter().enumerate() {
            if n.id.0 != i {
                return Err(Error::Config(format!("node ids must be 0..n without gaps, found {}", n.id)));
            }
        }
        let positions = doc.nodes.iter().map(|n| Point::new(n.x, n.y)).collect();
        let owners = doc.nodes.iter().map(|n| n.owner).collect();
        Topology::new(positions, owners, doc.num_mnos, doc.d_max, doc.range)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo() -> Topology {
        generate_topology(7, 10, 2, 400.0, 200.0).unwrap()
    }

    #[test]
    fn rejects_empty_network() {
        assert!(matches!(generate_topology(1, 0, 2, 400.0, 200.0), Err(Error::Config(_))));
        assert!(generate_topology(1, 3, 0, 400.0, 200.0).is_err());
        assert!(generate_topology(1, 3, 1, 0.0, 200.0).is_err());
        assert!(generate_topology(1, 3, 1, 400.0, -1.0).is_err());
    }

    #[test]
    fn round_robin_split() {
        let t = topo();
        assert_eq!(t.members(MnoId(0)).len(), 5);
        assert_eq!(t.members(MnoId(1)).len(), 5);
        assert_eq!(t.owner(NodeId(1)).unwrap(), Some(MnoId(0)));
        assert_eq!(t.owner(NodeId(2)).unwrap(), Some(MnoId(1)));
        // remainder goes to the lowest-index operators
        let t = generate_topology(3, 7, 3, 400.0, 200.0).unwrap();
        let sizes: Vec<_> = (0..3).map(|n| t.members(MnoId(n)).len()).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
    }

    #[test]
    fn deterministic_by_seed() {
        assert_eq!(topo(), topo());
        assert_ne!(topo(), generate_topology(8, 10, 2, 400.0, 200.0).unwrap());
    }

    #[test]
    fn positions_inside_disk() {
        let t = generate_topology(11, 500, 3, 400.0, 200.0).unwrap();
        assert_eq!(t.position(NodeId::MBS).unwrap(), Point::ORIGIN);
        assert!(t.sbs().all(|m| t.position(m).unwrap().norm() <= 400.0));
    }

    #[test]
    fn comm_set_excludes_self_and_is_symmetric() {
        let t = generate_topology(5, 40, 4, 400.0, 200.0).unwrap();
        for a in t.nodes() {
            let set = t.comm_set(a).unwrap();
            assert!(!set.contains(&a));
            for &b in set {
                assert!(t.comm_set(b).unwrap().contains(&a));
            }
        }
        assert!(matches!(t.comm_set(NodeId(41)), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn isolated_node_has_empty_comm_set() {
        let t = Topology::new(
            vec![Point::ORIGIN, Point::new(350.0, 0.0)],
            vec![None, Some(MnoId(0))],
            1,
            400.0,
            200.0,
        )
        .unwrap();
        assert!(t.comm_set(NodeId(1)).unwrap().is_empty());
        assert!(t.comm_set(NodeId::MBS).unwrap().is_empty());
    }

    #[test]
    fn range_boundary_is_inclusive() {
        // 3-4-5 triangle: distance exactly 200 m
        let t = Topology::new(
            vec![Point::ORIGIN, Point::new(120.0, 160.0)],
            vec![None, Some(MnoId(0))],
            1,
            400.0,
            200.0,
        )
        .unwrap();
        assert_eq!(t.distance(NodeId(0), NodeId(1)), 200.0);
        assert_eq!(t.comm_set(NodeId(0)).unwrap(), &[NodeId(1)]);
        assert_eq!(t.comm_set(NodeId(1)).unwrap(), &[NodeId(0)]);
    }

    #[test]
    fn operator_indicator() {
        let t = topo();
        // 1 and 3 are both MNO 0; 2 is MNO 1
        assert!(t.same_mno(NodeId(1), NodeId(3)).unwrap());
        assert!(!t.cross_mno(NodeId(1), NodeId(3)));
        assert!(!t.same_mno(NodeId(1), NodeId(2)).unwrap());
        assert!(t.cross_mno(NodeId(1), NodeId(2)));
        assert!(t.same_mno(NodeId::MBS, NodeId(2)).unwrap());
        assert!(!t.cross_mno(NodeId::MBS, NodeId(2)));
        assert!(t.same_mno(NodeId(1), NodeId(99)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = topo();
        let back = Topology::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn json_rejects_moved_mbs() {
        let json = r#"{"num_mnos":1,"d_max":10,"range":5,
            "nodes":[{"id":0,"x":1,"y":0,"owner":null},{"id":1,"x":0,"y":0,"owner":0}]}"#;
        assert!(Topology::from_json(json).is_err());
    }
}
