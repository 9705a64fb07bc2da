//! Sub-channel allocation inside one A-BS, plus realized link and
//! end-to-end rate evaluation for a complete assignment.
//!
//! The sub-channels of an A-BS propose to the D-BSs it serves. A D-BS keeps
//! accepting sub-channels, best rate first, until the rate it holds reaches
//! its share of the A-BS's own upstream rate. That share depends on what the
//! D-BS already holds, so the market has peer effects and plain deferred
//! acceptance can leave blocking pairs behind.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::matching::{
    find_blocking_pairs, propose_and_dispose, DaOutcome, GreedyUntilSaturated, KeepHeldThenFill, Matching,
    PreferenceProfile,
};
use crate::topology::NodeId;

/// Per-child share of an A-BS's upstream rate. The A-BS keeps one share for
/// its own traffic, hence `fanout + 1`.
pub fn saturation_bound(upstream_bps: f64, fanout: usize) -> f64 {
    upstream_bps / (fanout as f64 + 1.0)
}

/// True while a D-BS holding `held_rate_bps` still wants more sub-channels.
pub fn saturation_criterion(held_rate_bps: f64, upstream_bps: f64, fanout: usize) -> bool {
    held_rate_bps < saturation_bound(upstream_bps, fanout)
}

/// The sub-channel market of a single A-BS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubchannelGame {
    pub anchor: NodeId,
    pub children: Vec<NodeId>,
    /// `rates[c][k]`: rate of child `c` on sub-channel `k` (bits/s).
    pub rates: Vec<Vec<f64>>,
    /// Revenue the A-BS collects per sub-channel handed to child `c`.
    pub revenue: Vec<f64>,
    pub same_mno: Vec<bool>,
    /// Saturation bound shared by all children (infinite below the MBS).
    pub bound: f64,
}

/// Outcome of the two-phase allocation for one A-BS.
#[derive(Debug, Clone, PartialEq)]
pub struct SubchannelOutcome {
    /// Sub-channel (proposer) to child index (acceptor).
    pub matching: Matching,
    /// Requests sent while sub-channels propose.
    pub proposals: usize,
    /// Leftover sub-channels handed to same-operator children afterwards.
    pub fills: usize,
}

impl SubchannelGame {
    pub fn new(
        anchor: NodeId,
        children: Vec<NodeId>,
        rates: Vec<Vec<f64>>,
        revenue: Vec<f64>,
        same_mno: Vec<bool>,
        bound: f64,
    ) -> Result<Self> {
        let c = children.len();
        if rates.len() != c || revenue.len() != c || same_mno.len() != c {
            return Err(Error::Config("one rate row, revenue and ownership flag per child".into()));
        }
        let k = rates.first().map_or(0, Vec::len);
        if rates.iter().any(|r| r.len() != k) {
            return Err(Error::Config("every child needs a rate for every sub-channel".into()));
        }
        if rates.iter().flatten().chain(&revenue).any(|x| !(*x >= 0.0)) || bound.is_nan() {
            return Err(Error::Config("rates and revenues must be non-negative numbers".into()));
        }
        Ok(SubchannelGame {
            anchor,
            children,
            rates,
            revenue,
            same_mno,
            bound,
        })
    }

    pub fn num_children(&self) -> usize {
        self.children.len()
    }

    pub fn num_subchannels(&self) -> usize {
        self.rates.first().map_or(0, Vec::len)
    }

    pub fn held_rate(&self, child: usize, held: &[usize]) -> f64 {
        held.iter().map(|&k| self.rates[child][k]).sum()
    }

    /// Whether `child` holding `held` still accepts sub-channels.
    pub fn wants_more(&self, child: usize, held: &[usize]) -> bool {
        self.held_rate(child, held) < self.bound
    }

    /// Whether `child` could hold `held` plus `k` having accepted them best
    /// first, each while still unsaturated.
    pub fn can_take(&self, child: usize, held: &[usize], k: usize) -> bool {
        let worst = held.iter().map(|&h| self.rates[child][h]).fold(self.rates[child][k], f64::min);
        self.held_rate(child, held) + self.rates[child][k] - worst < self.bound
    }

    /// D-BS utility for an unheld sub-channel given its current holdings.
    pub fn psi_utility(&self, child: usize, k: usize, held: &[usize]) -> f64 {
        if self.wants_more(child, held) {
            self.rates[child][k]
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Sub-channel utility for a child: its rate plus the A-BS's revenue.
    pub fn phi_utility(&self, k: usize, child: usize) -> f64 {
        self.rates[child][k] + self.revenue[child]
    }

    pub fn subchannel_prefs(&self) -> PreferenceProfile {
        PreferenceProfile::from_utilities(self.num_subchannels(), self.num_children(), |k, c| {
            Some(self.phi_utility(k, c))
        })
    }

    /// Static D-BS orderings by rate; acceptability is decided by
    /// [`Self::wants_more`] at run time.
    pub fn dbs_prefs(&self) -> PreferenceProfile {
        PreferenceProfile::from_utilities(self.num_children(), self.num_subchannels(), |c, k| {
            Some(self.rates[c][k])
        })
    }

    /// Runs the allocation: sub-channels propose in order of preference and
    /// each D-BS re-selects, best first, from everything it holds or was just
    /// offered until it saturates. Rejected sub-channels move on. Sub-channels
    /// nobody kept are then offered, in index order, to the best same-operator
    /// child that still wants more.
    pub fn solve(&self) -> SubchannelOutcome {
        let prefs_k = self.subchannel_prefs();
        let prefs_d = self.dbs_prefs();
        let mut rule = GreedyUntilSaturated {
            wants_more: |c: usize, held: &[usize]| self.wants_more(c, held),
        };
        let DaOutcome {
            mut matching,
            proposals,
            ..
        } = propose_and_dispose(&prefs_k, &prefs_d, &mut rule);

        let mut fills = 0;
        for k in 0..self.num_subchannels() {
            if matching.partner(k).is_some() {
                continue;
            }
            let target = prefs_k
                .list(k)
                .iter()
                .copied()
                .find(|&c| self.same_mno[c] && self.wants_more(c, matching.held(c)));
            if let Some(c) = target {
                matching.assign(k, c);
                fills += 1;
            }
        }
        SubchannelOutcome {
            matching,
            proposals,
            fills,
        }
    }

    /// Textbook deferred acceptance on the same preferences: a D-BS judges new
    /// proposals against what it already holds and never gives a held
    /// sub-channel back.
    pub fn plain_da(&self) -> DaOutcome {
        let mut rule = KeepHeldThenFill {
            wants_more: |c: usize, held: &[usize]| self.wants_more(c, held),
        };
        propose_and_dispose(&self.subchannel_prefs(), &self.dbs_prefs(), &mut rule)
    }

    /// Blocking (sub-channel, child) pairs with the saturation test as the
    /// children's acceptability.
    pub fn blocking_pairs(&self, matching: &Matching) -> Vec<(usize, usize)> {
        find_blocking_pairs(matching, &self.subchannel_prefs(), &self.dbs_prefs(), |c, held| {
            self.wants_more(c, held)
        })
    }

    /// Whether every child's holdings could have been built one acceptance at
    /// a time: dropping its worst sub-channel leaves it unsaturated.
    pub fn individually_rational(&self, matching: &Matching) -> bool {
        (0..self.num_children()).all(|c| {
            let held = matching.held(c);
            let Some(worst) = held.iter().map(|&k| self.rates[c][k]).min_by(f64::total_cmp) else {
                return true;
            };
            self.held_rate(c, held) - worst < self.bound
        })
    }
}

/// Sub-channel assignment `x`: for each transmitting node and sub-channel, the
/// child served on it, if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubchannelPlan {
    subchannels: usize,
    assign: Vec<Vec<Option<NodeId>>>,
}

impl SubchannelPlan {
    pub fn new(num_nodes: usize, subchannels: usize) -> Self {
        SubchannelPlan {
            subchannels,
            assign: vec![vec![None; subchannels]; num_nodes],
        }
    }

    pub fn subchannels(&self) -> usize {
        self.subchannels
    }

    pub fn num_nodes(&self) -> usize {
        self.assign.len()
    }

    pub fn get(&self, tx: NodeId, k: usize) -> Option<NodeId> {
        self.assign[tx.0][k]
    }

    pub fn set(&mut self, tx: NodeId, k: usize, rx: Option<NodeId>) {
        self.assign[tx.0][k] = rx;
    }

    /// Clears every sub-channel of `tx`.
    pub fn clear(&mut self, tx: NodeId) {
        self.assign[tx.0].fill(None);
    }

    pub fn transmits(&self, tx: NodeId, k: usize) -> bool {
        self.assign[tx.0][k].is_some()
    }

    /// Sub-channels `tx` uses towards `rx`.
    pub fn link_subchannels(&self, tx: NodeId, rx: NodeId) -> impl Iterator<Item = usize> + '_ {
        self.assign[tx.0]
            .iter()
            .enumerate()
            .filter(move |(_, r)| **r == Some(rx))
            .map(|(k, _)| k)
    }

    pub fn count(&self, tx: NodeId, rx: NodeId) -> usize {
        self.link_subchannels(tx, rx).count()
    }

    /// All `(tx, k, rx)` assignments in node, then sub-channel order.
    pub fn entries(&self) -> impl Iterator<Item = (NodeId, usize, NodeId)> + '_ {
        self.assign.iter().enumerate().flat_map(|(tx, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(k, rx)| rx.map(|rx| (NodeId(tx), k, rx)))
        })
    }
}

/// Realized rate of the link into every node (0 for the MBS and for nodes
/// without a parent), with every node the plan has transmitting on a
/// sub-channel counted as co-channel interference there.
pub fn link_rates(real: &ChannelRealization, parent: &[Option<NodeId>], plan: &SubchannelPlan) -> Vec<f64> {
    let n = parent.len();
    let k_total = plan.subchannels();
    let mut on_channel: Vec<Vec<NodeId>> = vec![Vec::new(); k_total];
    for tx in 0..n {
        for (k, list) in on_channel.iter_mut().enumerate() {
            if plan.transmits(NodeId(tx), k) {
                list.push(NodeId(tx));
            }
        }
    }
    (0..n)
        .map(|rx| {
            let rx = NodeId(rx);
            let Some(tx) = parent[rx.0] else {
                return 0.0;
            };
            let state = real.state(tx, rx);
            plan.link_subchannels(tx, rx)
                .map(|k| real.subchannel_rate(tx, rx, k, state, &on_channel[k]))
                .sum()
        })
        .collect()
}

/// Hop count from the MBS (0 for the MBS, `None` when not connected).
pub fn depths(parent: &[Option<NodeId>]) -> Vec<Option<usize>> {
    let n = parent.len();
    let mut depth = vec![None; n];
    if n > 0 {
        depth[0] = Some(0);
    }
    for start in 1..n {
        let mut chain = Vec::new();
        let mut cur = NodeId(start);
        let base = loop {
            if let Some(d) = depth[cur.0] {
                break Some(d);
            }
            if chain.len() > n {
                break None;
            }
            chain.push(cur);
            match parent[cur.0] {
                Some(p) => cur = p,
                None => break None,
            }
        };
        if let Some(b) = base {
            for (i, m) in chain.iter().rev().enumerate() {
                depth[m.0] = Some(b + i + 1);
            }
        }
    }
    depth
}

/// Decode-and-forward rates: a node `n` hops from the MBS gets `1/n` of the
/// weakest link on its path. The MBS gets infinity, disconnected nodes zero.
pub fn end_to_end_rates(parent: &[Option<NodeId>], link_rate: &[f64]) -> Vec<f64> {
    let depth = depths(parent);
    let n = parent.len();
    let mut bottleneck = vec![f64::INFINITY; n];
    let mut order: Vec<usize> = (0..n).filter(|&m| depth[m].is_some()).collect();
    order.sort_by_key(|&m| depth[m]);
    for m in order {
        if let Some(p) = parent[m] {
            bottleneck[m] = bottleneck[p.0].min(link_rate[m]);
        }
    }
    (0..n)
        .map(|m| match depth[m] {
            Some(0) => f64::INFINITY,
            Some(d) => bottleneck[m] / d as f64,
            None => 0.0,
        })
        .collect()
}

/// A full sub-channel assignment and the rates it achieves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub plan: SubchannelPlan,
    /// Rate of the link into each node, indexed by node.
    pub link_rate: Vec<f64>,
    /// End-to-end rate per node; the MBS entry is infinite.
    pub end_to_end: Vec<f64>,
    /// Connected SBSs whose end-to-end rate is below the required minimum.
    pub rth_violations: Vec<NodeId>,
    /// Allocation requests per A-BS, for A-BSs that had children.
    pub messages: Vec<(NodeId, usize)>,
    /// Leftover sub-channels given out after the proposal phase, per A-BS.
    pub fills: Vec<(NodeId, usize)>,
}

impl AllocationResult {
    pub fn evaluate(
        real: &ChannelRealization,
        parent: &[Option<NodeId>],
        plan: SubchannelPlan,
        r_th_bps: f64,
        messages: Vec<(NodeId, usize)>,
        fills: Vec<(NodeId, usize)>,
    ) -> Self {
        let link_rate = link_rates(real, parent, &plan);
        let end_to_end = end_to_end_rates(parent, &link_rate);
        let rth_violations = (1..parent.len())
            .filter(|&m| parent[m].is_some() && end_to_end[m] < r_th_bps)
            .map(NodeId)
            .collect();
        AllocationResult {
            plan,
            link_rate,
            end_to_end,
            rth_violations,
            messages,
            fills,
        }
    }

    /// Sum of end-to-end SBS rates.
    pub fn sum_rate(&self) -> f64 {
        self.end_to_end.iter().skip(1).sum()
    }

    /// Rows `(a_bs, d_bs, sub_channel, rate_bps)` of the realized assignment,
    /// the rate being that of the single sub-channel.
    pub fn rows(&self, real: &ChannelRealization) -> Vec<(NodeId, NodeId, usize, f64)> {
        let k_total = self.plan.subchannels();
        let mut on_channel: Vec<Vec<NodeId>> = vec![Vec::new(); k_total];
        for (tx, k, _) in self.plan.entries() {
            on_channel[k].push(tx);
        }
        self.plan
            .entries()
            .map(|(tx, k, rx)| {
                let rate = real.subchannel_rate(tx, rx, k, real.state(tx, rx), &on_channel[k]);
                (tx, rx, k, rate)
            })
            .collect()
    }
}
