//! Hop-by-hop network formation: per stage, the D-BSs that still need
//! backhaul propose to the A-BSs in range, which keep up to their quota.

use serde::{Deserialize, Serialize};

use crate::allocation::depths;
use crate::error::{Error, Result};
use crate::matching::{deferred_acceptance, find_blocking_pairs, quota_hook, DaOutcome, Matching, PreferenceProfile};
use crate::topology::{NodeId, Topology};

/// Per-node sub-channel prices and cost weights.
///
/// `kappa` converts currency into rate: a weight of `kappa` bits/s per
/// currency unit makes a price `q` worth `kappa * q` bits/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingConfig {
    pub price: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl PricingConfig {
    pub fn uniform(num_nodes: usize, price: f64, kappa: f64) -> Self {
        PricingConfig {
            price: vec![price; num_nodes],
            kappa: vec![kappa; num_nodes],
        }
    }

    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if self.price.len() != num_nodes || self.kappa.len() != num_nodes {
            return Err(Error::Config(format!(
                "pricing covers {} / {} nodes, topology has {num_nodes}",
                self.price.len(),
                self.kappa.len()
            )));
        }
        if self.price.iter().chain(&self.kappa).any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::Config("prices and weights must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// What `child` weighs against rate for one unit of `parent`'s price,
    /// zero between same-operator nodes.
    pub fn link_cost(&self, topo: &Topology, child: NodeId, parent: NodeId) -> f64 {
        if topo.cross_mno(child, parent) {
            self.kappa[child.0] * self.price[parent.0]
        } else {
            0.0
        }
    }

    /// What `parent` gains, in rate terms, from serving `child`.
    pub fn revenue(&self, topo: &Topology, parent: NodeId, child: NodeId) -> f64 {
        if topo.cross_mno(child, parent) {
            self.kappa[parent.0] * self.price[parent.0]
        } else {
            0.0
        }
    }
}

/// D-BS utility of an A-BS: the achievable rate capped by the A-BS's own
/// backhaul rate, minus the weighted price. `None` when not positive.
pub fn utility_dbs(avg_rate_bps: f64, upstream_bps: f64, cost: f64) -> Option<f64> {
    let u = avg_rate_bps.min(upstream_bps) - cost;
    (u > 0.0).then_some(u)
}

/// A-BS utility of a D-BS: the achievable rate plus the weighted revenue.
pub fn utility_abs(avg_rate_bps: f64, revenue: f64) -> f64 {
    avg_rate_bps + revenue
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    /// 1-based hop index.
    pub index: usize,
    pub anchors: Vec<NodeId>,
    pub demanders: Vec<NodeId>,
}

impl Stage {
    pub fn first(topo: &Topology) -> Option<Stage> {
        let demanders = topo.neighbors(NodeId::MBS).to_vec();
        (!demanders.is_empty()).then(|| Stage {
            index: 1,
            anchors: vec![NodeId::MBS],
            demanders,
        })
    }
}

/// Next stage: this stage's matched D-BSs become the A-BSs, and every node in
/// their range that is neither the MBS nor already connected becomes a D-BS.
/// `connected[m]` marks nodes matched at this or an earlier stage.
pub fn build_next_stage(prev: &Stage, matched: &[NodeId], topo: &Topology, connected: &[bool]) -> Option<Stage> {
    let mut anchors = matched.to_vec();
    anchors.sort_unstable();
    anchors.dedup();
    let mut demanders: Vec<NodeId> = anchors
        .iter()
        .flat_map(|&a| topo.neighbors(a).iter().copied())
        .filter(|m| !m.is_mbs() && !connected[m.0])
        .collect();
    demanders.sort_unstable();
    demanders.dedup();
    (!demanders.is_empty()).then(|| Stage {
        index: prev.index + 1,
        anchors,
        demanders,
    })
}

/// The D-BS / A-BS market of one stage, with utilities already evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationGame {
    pub stage: Stage,
    /// `dbs_utility[d][a]`, `None` when A-BS `a` is out of range or unacceptable.
    pub dbs_utility: Vec<Vec<Option<f64>>>,
    /// `abs_utility[a][d]`, `None` when D-BS `d` is out of range or unacceptable.
    pub abs_utility: Vec<Vec<Option<f64>>>,
    pub quotas: Vec<usize>,
}

impl FormationGame {
    pub fn dbs_prefs(&self) -> PreferenceProfile {
        let (nd, na) = (self.stage.demanders.len(), self.stage.anchors.len());
        PreferenceProfile::from_utilities(nd, na, |d, a| self.dbs_utility[d][a])
    }

    pub fn abs_prefs(&self) -> PreferenceProfile {
        let (nd, na) = (self.stage.demanders.len(), self.stage.anchors.len());
        PreferenceProfile::from_utilities(na, nd, |a, d| self.abs_utility[a][d])
    }

    pub fn solve(&self) -> DaOutcome {
        deferred_acceptance(&self.dbs_prefs(), &self.abs_prefs(), &self.quotas)
    }

    pub fn blocking_pairs(&self, matching: &Matching) -> Vec<(usize, usize)> {
        find_blocking_pairs(matching, &self.dbs_prefs(), &self.abs_prefs(), quota_hook(&self.quotas))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub parent: NodeId,
    pub child: NodeId,
    pub stage: usize,
}

/// The backhaul forest and how it was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationResult {
    pub stages: Vec<Stage>,
    /// Parent of each node; `None` for the MBS and unconnected SBSs.
    pub parent: Vec<Option<NodeId>>,
    /// Stage at which each node was connected.
    pub stage_of: Vec<Option<usize>>,
    /// Link requests sent at each stage.
    pub messages: Vec<usize>,
}

#[derive(Serialize)]
struct FormationDoc<'a> {
    edges: Vec<Edge>,
    unmatched: Vec<NodeId>,
    messages: &'a [usize],
}

impl FormationResult {
    pub fn empty(num_nodes: usize) -> Self {
        FormationResult {
            stages: Vec::new(),
            parent: vec![None; num_nodes],
            stage_of: vec![None; num_nodes],
            messages: Vec::new(),
        }
    }

    /// A formation given only by its parent map; stages follow hop counts.
    pub fn from_parents(parent: Vec<Option<NodeId>>) -> Self {
        let stage_of = depths(&parent).into_iter().map(|d| d.filter(|&d| d > 0)).collect();
        FormationResult {
            stages: Vec::new(),
            parent,
            stage_of,
            messages: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn edges(&self) -> Vec<Edge> {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(c, p)| {
                p.map(|parent| Edge {
                    parent,
                    child: NodeId(c),
                    stage: self.stage_of[c].unwrap_or(0),
                })
            })
            .collect()
    }

    pub fn children(&self, m: NodeId) -> Vec<NodeId> {
        (0..self.num_nodes())
            .filter(|&c| self.parent[c] == Some(m))
            .map(NodeId)
            .collect()
    }

    pub fn unmatched(&self) -> Vec<NodeId> {
        (1..self.num_nodes())
            .filter(|&m| self.parent[m].is_none())
            .map(NodeId)
            .collect()
    }

    pub fn cross_mno_edges(&self, topo: &Topology) -> usize {
        self.edges().iter().filter(|e| topo.cross_mno(e.parent, e.child)).count()
    }

    /// Re-checks the structural constraints: the parent map is a forest rooted
    /// at the MBS, every link is in range, quotas hold, and every edge joins a
    /// node connected at stage `j - 1` to one connected at stage `j`.
    pub fn check(&self, topo: &Topology, quota: usize, mbs_quota: Option<usize>) -> std::result::Result<(), String> {
        let n = topo.num_nodes();
        if self.parent.len() != n || self.stage_of.len() != n {
            return Err("formation does not cover the topology".into());
        }
        if self.parent[0].is_some() {
            return Err("the MBS has a parent".into());
        }
        let depth = depths(&self.parent);
        let mut fanout = vec![0usize; n];
        for c in 1..n {
            let Some(p) = self.parent[c] else {
                if self.stage_of[c].is_some() {
                    return Err(format!("unconnected node {c} has a stage"));
                }
                continue;
            };
            if p.0 >= n || p.0 == c {
                return Err(format!("node {c} has invalid parent {p}"));
            }
            if depth[c].is_none() {
                return Err(format!("node {c} is on a cycle or detached from the MBS"));
            }
            if !topo.in_range(p, NodeId(c)) {
                return Err(format!("link {p} -> {c} is out of range"));
            }
            if self.parent[p.0] == Some(NodeId(c)) {
                return Err(format!("anti-parallel links between {p} and {c}"));
            }
            if self.stage_of[c] != depth[c] {
                return Err(format!("node {c} connected at stage {:?} but is {:?} hops out", self.stage_of[c], depth[c]));
            }
            fanout[p.0] += 1;
        }
        for (m, &f) in fanout.iter().enumerate() {
            let q = if m == 0 { mbs_quota.unwrap_or(usize::MAX) } else { quota };
            if f > q {
                return Err(format!("node {m} serves {f} children, quota {q}"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = FormationDoc {
            edges: self.edges(),
            unmatched: self.unmatched(),
            messages: &self.messages,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{MnoId, Point};

    fn line(xs: &[f64], owners: &[usize], range: f64) -> Topology {
        let positions = std::iter::once(Point::ORIGIN).chain(xs.iter().map(|&x| Point::new(x, 0.0))).collect();
        let owners: Vec<_> = std::iter::once(None).chain(owners.iter().map(|&o| Some(MnoId(o)))).collect();
        let n_mno = owners_count(&owners);
        Topology::new(positions, owners, n_mno, 1000.0, range).unwrap()
    }

    fn owners_count(o: &[Option<MnoId>]) -> usize {
        o.iter().flatten().map(|m| m.0 + 1).max().unwrap_or(1)
    }

    #[test]
    fn utility_against_the_mbs_is_the_plain_rate() {
        assert_eq!(utility_dbs(3e9, f64::INFINITY, 0.0), Some(3e9));
    }

    #[test]
    fn utility_is_capped_by_upstream_and_priced() {
        assert_eq!(utility_dbs(3e9, 1e9, 2e8), Some(8e8));
        assert_eq!(utility_dbs(3e9, 1e9, 1e9), None);
        assert_eq!(utility_dbs(3e9, 1e9, 2e9), None);
    }

    #[test]
    fn costs_only_cross_operators() {
        let t = line(&[10.0, 20.0, 30.0], &[0, 0, 1], 100.0);
        let p = PricingConfig::uniform(4, 2.0, 5.0);
        assert_eq!(p.link_cost(&t, NodeId(2), NodeId(1)), 0.0);
        assert_eq!(p.link_cost(&t, NodeId(3), NodeId(1)), 10.0);
        assert_eq!(p.link_cost(&t, NodeId(3), NodeId::MBS), 0.0);
        assert_eq!(p.revenue(&t, NodeId(1), NodeId(3)), 10.0);
        assert_eq!(utility_abs(1e9, 0.0), 1e9);
    }

    #[test]
    fn isolated_mbs_yields_no_stage() {
        let t = line(&[300.0], &[0], 100.0);
        assert!(Stage::first(&t).is_none());
    }

    #[test]
    fn chain_geometry_forces_one_node_per_stage() {
        let t = line(&[80.0, 160.0], &[0, 0], 100.0);
        let s1 = Stage::first(&t).unwrap();
        assert_eq!((s1.anchors.clone(), s1.demanders.clone()), (vec![NodeId(0)], vec![NodeId(1)]));
        let s2 = build_next_stage(&s1, &[NodeId(1)], &t, &[false, true, false]).unwrap();
        assert_eq!((s2.index, s2.anchors.clone(), s2.demanders), (2, vec![NodeId(1)], vec![NodeId(2)]));
    }

    #[test]
    fn rejected_node_reappears_in_the_next_stage() {
        // MBS (quota 1) reaches 1 and 2; only 1 gets in; 2 is in range of 1.
        let t = line(&[50.0, 90.0], &[0, 0], 100.0);
        let s1 = Stage::first(&t).unwrap();
        assert_eq!(s1.demanders, vec![NodeId(1), NodeId(2)]);
        let game = FormationGame {
            stage: s1.clone(),
            dbs_utility: vec![vec![Some(2.0)], vec![Some(1.0)]],
            abs_utility: vec![vec![Some(2.0), Some(1.0)]],
            quotas: vec![1],
        };
        let out = game.solve();
        assert_eq!(out.matching.assignment(), &[Some(0), None]);
        let s2 = build_next_stage(&s1, &[NodeId(1)], &t, &[false, true, false]).unwrap();
        assert_eq!(s2.demanders, vec![NodeId(2)]);
    }

    #[test]
    fn check_flags_broken_forests() {
        let t = line(&[50.0, 90.0, 120.0], &[0, 0, 0], 100.0);
        let ok = FormationResult::from_parents(vec![None, Some(NodeId(0)), Some(NodeId(1)), Some(NodeId(2))]);
        assert!(ok.check(&t, 5, None).is_ok());
        let cycle = FormationResult::from_parents(vec![None, Some(NodeId(0)), Some(NodeId(3)), Some(NodeId(2))]);
        assert!(cycle.check(&t, 5, None).is_err());
        let far = FormationResult::from_parents(vec![None, Some(NodeId(0)), Some(NodeId(0)), None]);
        assert!(far.check(&t, 5, None).is_ok());
        let over = FormationResult::from_parents(vec![None, Some(NodeId(0)), Some(NodeId(0)), None]);
        assert!(over.check(&t, 5, Some(1)).is_err());
        let out_of_range = FormationResult::from_parents(vec![None, Some(NodeId(0)), Some(NodeId(0)), Some(NodeId(0))]);
        assert!(out_of_range.check(&t, 5, None).is_err());
    }

    #[test]
    fn json_lists_edges_and_unmatched() {
        let f = FormationResult::from_parents(vec![None, Some(NodeId(0)), None]);
        let v: serde_json::Value = serde_json::from_str(&f.to_json().unwrap()).unwrap();
        assert_eq!(v["edges"][0]["parent"], 0);
        assert_eq!(v["edges"][0]["child"], 1);
        assert_eq!(v["edges"][0]["stage"], 1);
        assert_eq!(v["unmatched"][0], 2);
    }
}
