//! Per-run quantities and their aggregation over Monte-Carlo runs.

use serde::{Deserialize, Serialize};

use crate::allocation::SubchannelPlan;
use crate::error::{Error, Result};
use crate::formation::PricingConfig;
use crate::pipeline::RunOutput;
use crate::topology::{NodeId, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub sum_rate: f64,
    /// End-to-end rate of SBS `i + 1`.
    pub per_sbs_rates: Vec<f64>,
    /// What each operator pays the others.
    pub mno_cost: Vec<f64>,
    pub formation_messages: Vec<usize>,
    pub allocation_messages: Vec<(NodeId, usize)>,
    pub unmatched_count: usize,
    pub rth_violations: usize,
    pub cross_mno_links: usize,
}

impl RunMetrics {
    pub fn from_run(topo: &Topology, pricing: &PricingConfig, run: &RunOutput) -> Self {
        let per_sbs_rates: Vec<f64> = run.allocation.end_to_end.iter().skip(1).copied().collect();
        RunMetrics {
            sum_rate: per_sbs_rates.iter().sum(),
            per_sbs_rates,
            mno_cost: mno_cost(topo, &run.formation.parent, &run.allocation.plan, pricing),
            formation_messages: run.formation.messages.clone(),
            allocation_messages: run.allocation.messages.clone(),
            unmatched_count: run.formation.unmatched().len(),
            rth_violations: run.allocation.rth_violations.len(),
            cross_mno_links: run.formation.cross_mno_edges(topo),
        }
    }
}

/// Operator `n` pays, for every SBS of its own served by another operator's
/// SBS, the server's price times the sub-channels it receives.
pub fn mno_cost(topo: &Topology, parent: &[Option<NodeId>], plan: &SubchannelPlan, pricing: &PricingConfig) -> Vec<f64> {
    let mut cost = vec![0.0; topo.num_mnos()];
    for child in topo.sbs() {
        let Some(p) = parent[child.0] else { continue };
        if !topo.cross_mno(p, child) {
            continue;
        }
        let owner = topo.owner(child).ok().flatten().expect("SBSs have owners");
        cost[owner.0] += pricing.price[p.0] * plan.count(p, child) as f64;
    }
    cost
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (zero for a single run).
    pub std: f64,
    /// Empirical CDF at each grid point.
    pub cdf: Vec<(f64, f64)>,
}

impl Summary {
    pub fn std_error(&self) -> f64 {
        self.std / (self.count as f64).sqrt()
    }
}

/// Fraction of `values` at or below `x`.
pub fn ecdf(values: &[f64], x: f64) -> f64 {
    values.iter().filter(|&&v| v <= x).count() as f64 / values.len() as f64
}

pub fn aggregate(values: &[f64], grid: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(Summary {
        count: values.len(),
        mean,
        std,
        cdf: grid.iter().map(|&x| (x, ecdf(values, x))).collect(),
    })
}

/// Worst-case number of link requests for one formation stage with
/// `demanders` D-BSs and a common quota.
pub fn formation_message_bound(demanders: usize, quota: usize) -> f64 {
    let q = quota.min(demanders).max(1) as f64;
    let d = demanders as f64;
    0.5 * q * (d / q + 1.0) * (d / q + 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOverhead {
    pub stage: usize,
    pub demanders: usize,
    pub quota: usize,
    pub messages: usize,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorOverhead {
    pub stage: usize,
    pub anchor: NodeId,
    pub children: usize,
    pub messages: usize,
    /// Sub-channels times the A-BS's quota. A sub-channel asks each child at
    /// most once, so the count can reach but never pass it.
    pub bound: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub formation: Vec<StageOverhead>,
    pub allocation: Vec<AnchorOverhead>,
}

impl OverheadReport {
    pub fn passed(&self) -> bool {
        self.formation.iter().all(|s| s.messages as f64 <= s.bound)
            && self.allocation.iter().all(|a| a.messages <= a.bound)
    }

    /// A-BSs whose allocation used exactly the worst-case number of requests.
    pub fn allocation_at_bound(&self) -> usize {
        self.allocation.iter().filter(|a| a.messages == a.bound).count()
    }

    /// Smallest slack left under any bound (negative on failure).
    pub fn min_margin(&self) -> f64 {
        let f = self.formation.iter().map(|s| s.bound - s.messages as f64);
        let a = self.allocation.iter().map(|a| a.bound as f64 - a.messages as f64);
        f.chain(a).fold(f64::INFINITY, f64::min)
    }
}

/// Compares the recorded request counts of a run against the worst-case
/// bounds. Stages whose A-BSs have different quotas use the smallest one.
pub fn overhead_check(run: &RunOutput, subchannels: usize) -> OverheadReport {
    let mut formation = Vec::new();
    let mut allocation = Vec::new();
    for (stage, messages) in run.stages.iter().zip(&run.formation.messages) {
        let demanders = stage.game.stage.demanders.len();
        let quota = stage.game.quotas.iter().copied().min().unwrap_or(1);
        formation.push(StageOverhead {
            stage: stage.game.stage.index,
            demanders,
            quota,
            messages: *messages,
            bound: formation_message_bound(demanders, quota),
        });
        for rec in &stage.allocations {
            let ai = stage
                .game
                .stage
                .anchors
                .iter()
                .position(|&a| a == rec.game.anchor)
                .expect("allocation belongs to a stage anchor");
            allocation.push(AnchorOverhead {
                stage: stage.game.stage.index,
                anchor: rec.game.anchor,
                children: rec.game.num_children(),
                messages: rec.proposals,
                bound: subchannels * stage.game.quotas[ai],
            });
        }
    }
    OverheadReport { formation, allocation }
}
