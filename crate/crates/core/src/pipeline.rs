//! The staged pipeline: formation of hop `j`, then allocation of hop `j`,
//! then the provisional rates that hop `j + 1` builds on.
//!
//! Preferences are built from the realized link state and fading, with the
//! interference replaced by its mean over every node that transmits at this
//! hop or an earlier one. Reported rates are recomputed from the actual
//! assignment once the whole network is built.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{end_to_end_rates, link_rates, saturation_bound, AllocationResult, SubchannelGame, SubchannelPlan};
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::formation::{
    build_next_stage, utility_abs, utility_dbs, FormationGame, FormationResult, PricingConfig, Stage,
};
use crate::matching::Matching;
use crate::rng::stream_rng;
use crate::topology::{NodeId, Topology};

/// RNG stream reserved for the random baseline.
pub const RANDOM_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Maximum number of D-BSs per SBS acting as A-BS.
    pub quota: usize,
    /// Maximum number of D-BSs served by the MBS; unbounded when absent.
    pub mbs_quota: Option<usize>,
    /// Minimum end-to-end rate per SBS; shortfalls are reported only.
    pub r_th_bps: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            quota: 5,
            mbs_quota: None,
            r_th_bps: 1e6,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quota == 0 || self.mbs_quota == Some(0) {
            return Err(Error::Config("quotas must be at least 1".into()));
        }
        if !(self.r_th_bps >= 0.0) {
            return Err(Error::Config("rate threshold must be non-negative".into()));
        }
        Ok(())
    }

    pub fn quota_of(&self, anchor: NodeId, demanders: usize) -> usize {
        if anchor.is_mbs() {
            self.mbs_quota.unwrap_or(demanders.max(1))
        } else {
            self.quota
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Cooperative,
    /// Cross-operator links are unacceptable to both sides; the MBS serves all.
    NonCooperative,
    /// Uniformly random parents and sub-channels under the same constraints.
    Random { seed: u64 },
}

/// One A-BS's sub-channel market and how it was settled.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationRecord {
    pub game: SubchannelGame,
    pub matching: Matching,
    pub proposals: usize,
    pub fills: usize,
}

/// Everything decided at one hop.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub game: FormationGame,
    /// D-BS index to A-BS index within `game.stage`.
    pub matching: Matching,
    pub allocations: Vec<AllocationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub formation: FormationResult,
    pub allocation: AllocationResult,
    pub stages: Vec<StageRecord>,
}

impl RunOutput {
    pub fn sum_rate(&self) -> f64 {
        self.allocation.sum_rate()
    }
}

/// Mean interference at `rx` from every listed transmitter other than `tx`.
pub fn expected_interference_except(real: &ChannelRealization, rx: NodeId, tx: NodeId, transmitters: &[NodeId]) -> f64 {
    let others: Vec<NodeId> = transmitters.iter().copied().filter(|&m| m != tx && m != rx).collect();
    real.expected_interference(rx, &others)
}

/// Full-band state-averaged rate of `tx -> rx` under mean interference.
pub fn full_band_rate(real: &ChannelRealization, tx: NodeId, rx: NodeId, transmitters: &[NodeId]) -> f64 {
    let i = expected_interference_except(real, rx, tx, transmitters);
    real.average_rate(tx, rx, 0..real.subchannels(), i)
}

/// Builds the formation market of `stage`. `transmitters` are the A-BSs of
/// this and every earlier stage, ascending.
pub fn formation_game(
    topo: &Topology,
    real: &ChannelRealization,
    net: &NetworkConfig,
    pricing: &PricingConfig,
    stage: &Stage,
    transmitters: &[NodeId],
    upstream: &[f64],
    cooperative: bool,
) -> FormationGame {
    let (nd, na) = (stage.demanders.len(), stage.anchors.len());
    let mut dbs_utility = vec![vec![None; na]; nd];
    let mut abs_utility = vec![vec![None; nd]; na];
    for (di, &d) in stage.demanders.iter().enumerate() {
        for (ai, &a) in stage.anchors.iter().enumerate() {
            if !topo.in_range(a, d) || (!cooperative && topo.cross_mno(a, d)) {
                continue;
            }
            let rate = full_band_rate(real, a, d, transmitters);
            dbs_utility[di][ai] = utility_dbs(rate, upstream[a.0], pricing.link_cost(topo, d, a));
            abs_utility[ai][di] = Some(utility_abs(rate, pricing.revenue(topo, a, d)));
        }
    }
    let quotas = stage.anchors.iter().map(|&a| net.quota_of(a, nd)).collect();
    FormationGame {
        stage: stage.clone(),
        dbs_utility,
        abs_utility,
        quotas,
    }
}

/// Builds the sub-channel market of `anchor` serving `children` (ascending).
pub fn subchannel_game(
    topo: &Topology,
    real: &ChannelRealization,
    pricing: &PricingConfig,
    anchor: NodeId,
    children: &[NodeId],
    transmitters: &[NodeId],
    upstream: f64,
) -> SubchannelGame {
    let k_total = real.subchannels();
    let rates = children
        .iter()
        .map(|&c| {
            let i = expected_interference_except(real, c, anchor, transmitters);
            let state = real.state(anchor, c);
            (0..k_total).map(|k| real.rate_with_interference(anchor, c, k, state, i)).collect()
        })
        .collect();
    let revenue = children.iter().map(|&c| pricing.revenue(topo, anchor, c)).collect();
    let same_mno = children.iter().map(|&c| !topo.cross_mno(anchor, c)).collect();
    SubchannelGame::new(
        anchor,
        children.to_vec(),
        rates,
        revenue,
        same_mno,
        saturation_bound(upstream, children.len()),
    )
    .expect("rates are well formed")
}

/// Runs one scheme end to end on a realization.
pub fn run(
    topo: &Topology,
    real: &ChannelRealization,
    net: &NetworkConfig,
    pricing: &PricingConfig,
    scheme: Scheme,
) -> Result<RunOutput> {
    net.validate()?;
    let n = topo.num_nodes();
    pricing.validate(n)?;
    if real.num_nodes() != n {
        return Err(Error::Config("realization and topology disagree on the node count".into()));
    }
    let mut rng = match scheme {
        Scheme::Random { seed } => Some(stream_rng(seed, RANDOM_STREAM)),
        _ => None,
    };
    let cooperative = scheme != Scheme::NonCooperative;

    let mut formation = FormationResult::empty(n);
    let mut plan = SubchannelPlan::new(n, real.subchannels());
    let mut connected = vec![false; n];
    connected[0] = true;
    let mut transmitters: Vec<NodeId> = Vec::new();
    let mut upstream = vec![0.0; n];
    upstream[0] = f64::INFINITY;
    let mut messages = Vec::new();
    let mut fills = Vec::new();
    let mut records = Vec::new();

    let mut next = Stage::first(topo);
    while let Some(stage) = next.take() {
        if stage.index > topo.num_sbs() {
            break;
        }
        transmitters.extend(&stage.anchors);
        transmitters.sort_unstable();
        transmitters.dedup();

        let game = formation_game(topo, real, net, pricing, &stage, &transmitters, &upstream, cooperative);
        let (matching, requests) = match rng.as_mut() {
            Some(rng) => (random_formation(&game, &upstream, rng), 0),
            None => {
                let out = game.solve();
                (out.matching, out.proposals)
            }
        };
        formation.messages.push(requests);
        let mut matched = Vec::new();
        for (di, ai) in matching.pairs() {
            let (d, a) = (stage.demanders[di], stage.anchors[ai]);
            formation.parent[d.0] = Some(a);
            formation.stage_of[d.0] = Some(stage.index);
            connected[d.0] = true;
            matched.push(d);
        }

        let mut allocations = Vec::new();
        for (ai, &a) in stage.anchors.iter().enumerate() {
            let children: Vec<NodeId> = matching.held(ai).iter().map(|&di| stage.demanders[di]).collect();
            if children.is_empty() {
                continue;
            }
            let sub = subchannel_game(topo, real, pricing, a, &children, &transmitters, upstream[a.0]);
            let (mu, proposals, filled) = match rng.as_mut() {
                Some(rng) => (random_allocation(&sub, rng), 0, 0),
                None => {
                    let out = sub.solve();
                    (out.matching, out.proposals, out.fills)
                }
            };
            for (k, c) in mu.pairs() {
                plan.set(a, k, Some(children[c]));
            }
            messages.push((a, proposals));
            fills.push((a, filled));
            allocations.push(AllocationRecord {
                game: sub,
                matching: mu,
                proposals,
                fills: filled,
            });
        }
        records.push(StageRecord {
            game,
            matching,
            allocations,
        });
        formation.stages.push(stage.clone());

        let provisional = link_rates(real, &formation.parent, &plan);
        upstream = end_to_end_rates(&formation.parent, &provisional);
        next = build_next_stage(&stage, &matched, topo, &connected);
    }

    let allocation = AllocationResult::evaluate(real, &formation.parent, plan, net.r_th_bps, messages, fills);
    Ok(RunOutput {
        formation,
        allocation,
        stages: records,
    })
}

/// D-BSs in random order each take a uniformly random in-range A-BS that has
/// quota left and a working backhaul.
fn random_formation(game: &FormationGame, upstream: &[f64], rng: &mut ChaCha8Rng) -> Matching {
    let (nd, na) = (game.stage.demanders.len(), game.stage.anchors.len());
    let mut matching = Matching::empty(nd, na);
    let mut order: Vec<usize> = (0..nd).collect();
    order.shuffle(rng);
    for d in order {
        let options: Vec<usize> = (0..na)
            .filter(|&a| {
                game.abs_utility[a][d].is_some()
                    && matching.held(a).len() < game.quotas[a]
                    && upstream[game.stage.anchors[a].0] > 0.0
            })
            .collect();
        if let Some(&a) = options.choose(rng) {
            matching.assign(d, a);
        }
    }
    matching
}

/// Each sub-channel in turn goes to a uniformly random child that can still
/// take it, or stays idle when none can.
fn random_allocation(game: &SubchannelGame, rng: &mut ChaCha8Rng) -> Matching {
    let (k_total, nc) = (game.num_subchannels(), game.num_children());
    let mut matching = Matching::empty(k_total, nc);
    for k in 0..k_total {
        let options: Vec<usize> = (0..nc).filter(|&c| game.can_take(c, matching.held(c), k)).collect();
        if !options.is_empty() {
            let c = options[rng.random_range(0..options.len())];
            matching.assign(k, c);
        }
    }
    matching
}
