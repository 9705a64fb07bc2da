//! Comparison schemes: exhaustive optimum, non-cooperative and random.
//!
//! The exhaustive search covers every forest rooted at the MBS that respects
//! range and quotas, and for each forest every sub-channel assignment in which
//! each D-BS could have accepted its sub-channels one at a time under the
//! saturation test, with the same mean-interference rates and hop-by-hop
//! upstream rates the matching pipeline uses. Anything the pipeline or the
//! random scheme can output is therefore a candidate, so the optimum bounds
//! both from above.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{depths, end_to_end_rates, link_rates, AllocationResult, SubchannelGame, SubchannelPlan};
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::formation::{FormationResult, PricingConfig};
use crate::pipeline::{self, subchannel_game, NetworkConfig, RunOutput, Scheme};
use crate::topology::{NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhaustiveLimits {
    pub max_sbs: usize,
    pub max_subchannels: usize,
}

impl Default for ExhaustiveLimits {
    fn default() -> Self {
        ExhaustiveLimits {
            max_sbs: 8,
            max_subchannels: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSolution {
    pub formation: FormationResult,
    pub allocation: AllocationResult,
    pub sum_rate: f64,
    /// Forests whose allocations were searched (after bounding).
    pub forests_searched: usize,
    /// Complete assignments evaluated.
    pub leaves: u64,
}

pub fn non_cooperative(
    topo: &Topology,
    real: &ChannelRealization,
    net: &NetworkConfig,
    pricing: &PricingConfig,
) -> Result<RunOutput> {
    pipeline::run(topo, real, net, pricing, Scheme::NonCooperative)
}

pub fn random_baseline(
    topo: &Topology,
    real: &ChannelRealization,
    net: &NetworkConfig,
    pricing: &PricingConfig,
    seed: u64,
) -> Result<RunOutput> {
    pipeline::run(topo, real, net, pricing, Scheme::Random { seed })
}

fn check_limits(topo: &Topology, real: &ChannelRealization, limits: &ExhaustiveLimits) -> Result<()> {
    let (m, k) = (topo.num_sbs(), real.subchannels());
    if m <= limits.max_sbs && k <= limits.max_subchannels {
        return Ok(());
    }
    let forests: f64 = topo.sbs().map(|s| topo.neighbors(s).len() as f64 + 1.0).product();
    Err(Error::InstanceTooLarge {
        sbs: m,
        subchannels: k,
        max_sbs: limits.max_sbs,
        max_subchannels: limits.max_subchannels,
        estimate: forests * (m as f64 + 1.0).powi(k as i32),
    })
}

/// Best sum rate over all formations and allocations.
pub fn exhaustive_optimal(
    topo: &Topology,
    real: &ChannelRealization,
    net: &NetworkConfig,
    pricing: &PricingConfig,
    limits: &ExhaustiveLimits,
) -> Result<OptimalSolution> {
    check_limits(topo, real, limits)?;
    net.validate()?;
    pricing.validate(topo.num_nodes())?;
    let forests = enumerate_forests(topo, net);
    search(topo, real, net, pricing, forests)
}

/// Best sum rate over all allocations of a fixed formation.
pub fn optimal_allocation(
    topo: &Topology,
    real: &ChannelRealization,
    net: &NetworkConfig,
    pricing: &PricingConfig,
    formation: &FormationResult,
    limits: &ExhaustiveLimits,
) -> Result<OptimalSolution> {
    check_limits(topo, real, limits)?;
    net.validate()?;
    pricing.validate(topo.num_nodes())?;
    search(topo, real, net, pricing, vec![formation.parent.clone()])
}

fn search(
    topo: &Topology,
    real: &ChannelRealization,
    net: &NetworkConfig,
    pricing: &PricingConfig,
    forests: Vec<Vec<Option<NodeId>>>,
) -> Result<OptimalSolution> {
    let incumbent = AtomicU64::new(0f64.to_bits());
    let results: Vec<Option<(f64, SubchannelPlan, u64)>> = forests
        .par_iter()
        .map(|parent| ForestSearch::new(topo, real, pricing, parent, &incumbent).run())
        .collect();
    let searched = results.iter().filter(|r| r.is_some()).count();
    let leaves = results.iter().flatten().map(|r| r.2).sum();
    // ties go to the first forest in enumeration order
    let mut best: Option<(usize, f64, SubchannelPlan)> = None;
    for (i, r) in results.into_iter().enumerate() {
        if let Some((v, plan, _)) = r {
            if best.as_ref().is_none_or(|b| v > b.1) {
                best = Some((i, v, plan));
            }
        }
    }
    let (i, _, plan) = best.expect("the forest that set the incumbent reports it");
    let parent = forests[i].clone();
    let formation = FormationResult::from_parents(parent.clone());
    let allocation = AllocationResult::evaluate(real, &parent, plan, net.r_th_bps, Vec::new(), Vec::new());
    Ok(OptimalSolution {
        sum_rate: allocation.sum_rate(),
        formation,
        allocation,
        forests_searched: searched,
        leaves,
    })
}

/// Every parent map that forms a forest rooted at the MBS with links in range
/// and quotas respected. Unconnected SBSs are allowed.
pub fn enumerate_forests(topo: &Topology, net: &NetworkConfig) -> Vec<Vec<Option<NodeId>>> {
    let n = topo.num_nodes();
    let mut out = Vec::new();
    let mut parent = vec![None; n];
    let mut fanout = vec![0usize; n];
    fn rec(
        m: usize,
        topo: &Topology,
        net: &NetworkConfig,
        parent: &mut Vec<Option<NodeId>>,
        fanout: &mut Vec<usize>,
        out: &mut Vec<Vec<Option<NodeId>>>,
    ) {
        let n = parent.len();
        if m == n {
            let depth = depths(parent);
            if (1..n).all(|c| parent[c].is_none() || depth[c].is_some()) {
                out.push(parent.clone());
            }
            return;
        }
        rec(m + 1, topo, net, parent, fanout, out);
        for &p in topo.neighbors(NodeId(m)) {
            let quota = net.quota_of(p, usize::MAX);
            if fanout[p.0] >= quota || reaches(parent, p, NodeId(m)) {
                continue;
            }
            parent[m] = Some(p);
            fanout[p.0] += 1;
            rec(m + 1, topo, net, parent, fanout, out);
            fanout[p.0] -= 1;
            parent[m] = None;
        }
    }
    rec(1, topo, net, &mut parent, &mut fanout, &mut out);
    out
}

/// Whether following parents from `from` reaches `target`.
fn reaches(parent: &[Option<NodeId>], from: NodeId, target: NodeId) -> bool {
    let mut cur = Some(from);
    let mut steps = 0;
    while let Some(c) = cur {
        if c == target {
            return true;
        }
        steps += 1;
        if steps > parent.len() {
            return false;
        }
        cur = parent[c.0];
    }
    false
}

struct ForestSearch<'a> {
    topo: &'a Topology,
    real: &'a ChannelRealization,
    pricing: &'a PricingConfig,
    parent: &'a [Option<NodeId>],
    /// Per stage, the A-BSs with children and their children.
    stages: Vec<Vec<(NodeId, Vec<NodeId>)>>,
    /// Per stage, every node that transmits at that hop or earlier.
    transmitters: Vec<Vec<NodeId>>,
    decided: Vec<bool>,
    plan: SubchannelPlan,
    best: Option<(f64, SubchannelPlan)>,
    leaves: u64,
    incumbent: &'a AtomicU64,
}

impl<'a> ForestSearch<'a> {
    fn new(
        topo: &'a Topology,
        real: &'a ChannelRealization,
        pricing: &'a PricingConfig,
        parent: &'a [Option<NodeId>],
        incumbent: &'a AtomicU64,
    ) -> Self {
        let n = parent.len();
        let depth = depths(parent);
        let max_depth = depth.iter().flatten().copied().max().unwrap_or(0);
        let mut stages = vec![Vec::new(); max_depth];
        let mut transmitters = vec![Vec::new(); max_depth];
        for (j, tx) in transmitters.iter_mut().enumerate() {
            *tx = (0..n).filter(|&m| depth[m].is_some_and(|d| d <= j)).map(NodeId).collect();
        }
        for a in 0..n {
            let children: Vec<NodeId> = (0..n).filter(|&c| parent[c] == Some(NodeId(a))).map(NodeId).collect();
            if let (false, Some(d)) = (children.is_empty(), depth[a]) {
                stages[d].push((NodeId(a), children));
            }
        }
        ForestSearch {
            topo,
            real,
            pricing,
            parent,
            stages,
            transmitters,
            decided: vec![false; n],
            plan: SubchannelPlan::new(n, real.subchannels()),
            best: None,
            leaves: 0,
            incumbent,
        }
    }

    fn incumbent(&self) -> f64 {
        f64::from_bits(self.incumbent.load(Ordering::Relaxed))
    }

    fn run(mut self) -> Option<(f64, SubchannelPlan, u64)> {
        if self.upper_bound() < self.incumbent() {
            return None;
        }
        self.stage(0);
        let leaves = self.leaves;
        self.best.map(|(v, p)| (v, p, leaves))
    }

    fn stage(&mut self, j: usize) {
        if j == self.stages.len() {
            self.leaf();
            return;
        }
        let provisional = link_rates(self.real, self.parent, &self.plan);
        let upstream = end_to_end_rates(self.parent, &provisional);
        let games: Vec<SubchannelGame> = self.stages[j]
            .iter()
            .map(|(a, children)| {
                subchannel_game(self.topo, self.real, self.pricing, *a, children, &self.transmitters[j], upstream[a.0])
            })
            .collect();
        self.anchor(j, 0, &games);
    }

    fn anchor(&mut self, j: usize, i: usize, games: &[SubchannelGame]) {
        if i == games.len() {
            self.stage(j + 1);
            return;
        }
        let g = &games[i];
        let mut sum = vec![0.0; g.num_children()];
        let mut min = vec![f64::INFINITY; g.num_children()];
        self.decided[g.anchor.0] = true;
        self.assign(j, i, games, 0, &mut sum, &mut min);
        self.decided[g.anchor.0] = false;
        self.plan.clear(g.anchor);
    }

    /// Enumerates the owner of sub-channel `k` of `games[i]`, keeping every
    /// child's holdings buildable one acceptance at a time. Dropping the
    /// lowest rate can only grow as sub-channels are added, so a violation
    /// prunes the whole branch.
    fn assign(&mut self, j: usize, i: usize, games: &[SubchannelGame], k: usize, sum: &mut [f64], min: &mut [f64]) {
        let g = &games[i];
        if k == g.num_subchannels() {
            if self.upper_bound() >= self.incumbent() {
                self.anchor(j, i + 1, games);
            }
            return;
        }
        for c in 0..g.num_children() {
            let r = g.rates[c][k];
            let (s, lo) = (sum[c] + r, min[c].min(r));
            if s - lo >= g.bound {
                continue;
            }
            let saved = (sum[c], min[c]);
            sum[c] = s;
            min[c] = lo;
            self.plan.set(g.anchor, k, Some(g.children[c]));
            self.assign(j, i, games, k + 1, sum, min);
            sum[c] = saved.0;
            min[c] = saved.1;
        }
        self.plan.set(g.anchor, k, None);
        self.assign(j, i, games, k + 1, sum, min);
    }

    fn leaf(&mut self) {
        self.leaves += 1;
        let rates = link_rates(self.real, self.parent, &self.plan);
        let value: f64 = end_to_end_rates(self.parent, &rates).iter().skip(1).sum();
        if self.best.as_ref().is_none_or(|b| value > b.0) {
            self.best = Some((value, self.plan.clone()));
            let _ = self.incumbent.fetch_update(Ordering::Relaxed, Ordering::Relaxed, |cur| {
                (value > f64::from_bits(cur)).then_some(value.to_bits())
            });
        }
    }

    /// Sum-rate bound valid for every completion of the current partial plan.
    /// Later transmitters only add interference, so links of decided A-BSs
    /// cannot beat their current rate, and undecided links cannot beat the
    /// whole band under the current interference.
    fn upper_bound(&self) -> f64 {
        let n = self.parent.len();
        let k_total = self.plan.subchannels();
        let mut on_channel: Vec<Vec<NodeId>> = vec![Vec::new(); k_total];
        for tx in 0..n {
            for (k, list) in on_channel.iter_mut().enumerate() {
                if self.plan.transmits(NodeId(tx), k) {
                    list.push(NodeId(tx));
                }
            }
        }
        let link: Vec<f64> = (0..n)
            .map(|c| {
                let Some(p) = self.parent[c] else { return 0.0 };
                let c = NodeId(c);
                let state = self.real.state(p, c);
                let rate = |k: usize| self.real.subchannel_rate(p, c, k, state, &on_channel[k]);
                if self.decided[p.0] {
                    self.plan.link_subchannels(p, c).map(rate).sum()
                } else {
                    (0..k_total).map(rate).sum()
                }
            })
            .collect();
        end_to_end_rates(self.parent, &link).iter().skip(1).sum()
    }
}
