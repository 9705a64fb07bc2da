#![allow(dead_code)]

use mbn_core::allocation::SubchannelGame;
use mbn_core::formation::{FormationGame, Stage};
use mbn_core::matching::Matching;
use mbn_core::rng::stream_rng;
use mbn_core::{NetworkConfig, NodeId, RunOutput, Scenario, Topology};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn scenario(num_sbs: usize, num_mnos: usize, subchannels: usize, rho: f64) -> Scenario {
    let mut s = Scenario {
        num_sbs,
        num_mnos,
        ..Scenario::default()
    };
    s.radio.subchannels = subchannels;
    s.radio.rho = rho;
    s
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    // stream well clear of the ones the simulator reserves
    stream_rng(seed, 1000)
}

/// Total blocking pairs over every stage market and every sub-channel market.
pub fn blocking_pairs(run: &RunOutput) -> usize {
    run.stages
        .iter()
        .map(|s| {
            s.game.blocking_pairs(&s.matching).len()
                + s.allocations
                    .iter()
                    .map(|a| a.game.blocking_pairs(&a.matching).len())
                    .sum::<usize>()
        })
        .sum()
}

/// Checks the forest constraints plus the sub-channel plan: every assignment
/// rides a formation edge, and an unconnected SBS gets no rate.
pub fn structural_check(topo: &Topology, net: &NetworkConfig, run: &RunOutput) -> Result<(), String> {
    let f = &run.formation;
    f.check(topo, net.quota, net.mbs_quota)?;
    let plan = &run.allocation.plan;
    let mut seen = std::collections::HashSet::new();
    for (tx, k, rx) in plan.entries() {
        if f.parent[rx.0] != Some(tx) {
            return Err(format!("sub-channel {k} of {tx} goes to {rx}, which is not its child"));
        }
        if !seen.insert((tx, k)) {
            return Err(format!("sub-channel {k} of {tx} is used twice"));
        }
    }
    for m in f.unmatched() {
        if run.allocation.end_to_end[m.0] != 0.0 {
            return Err(format!("unconnected {m} has a rate"));
        }
    }
    let total: f64 = run.allocation.end_to_end.iter().skip(1).sum();
    if (total - run.sum_rate()).abs() > 1e-9 * total.max(1.0) {
        return Err("sum rate does not add up".into());
    }
    Ok(())
}

pub fn random_formation_game(rng: &mut ChaCha8Rng, anchors: usize, demanders: usize) -> FormationGame {
    let mut dbs_utility = vec![vec![None; anchors]; demanders];
    let mut abs_utility = vec![vec![None; demanders]; anchors];
    for d in 0..demanders {
        for a in 0..anchors {
            if rng.random_bool(0.85) {
                dbs_utility[d][a] = Some(rng.random_range(0.1..10.0));
            }
            // an out-of-range pair is unacceptable to both sides
            if dbs_utility[d][a].is_some() || rng.random_bool(0.3) {
                abs_utility[a][d] = Some(rng.random_range(0.1..10.0));
            }
        }
    }
    FormationGame {
        stage: Stage {
            index: 1,
            anchors: (0..anchors).map(NodeId).collect(),
            demanders: (anchors..anchors + demanders).map(NodeId).collect(),
        },
        dbs_utility,
        abs_utility,
        quotas: (0..anchors).map(|_| rng.random_range(1..=2)).collect(),
    }
}

pub fn random_subchannel_game(rng: &mut ChaCha8Rng, children: usize, subchannels: usize) -> SubchannelGame {
    let rates = (0..children)
        .map(|_| (0..subchannels).map(|_| rng.random_range(0.1e9..5e9)).collect())
        .collect();
    let same_mno: Vec<bool> = (0..children).map(|_| rng.random_bool(0.5)).collect();
    let revenue = same_mno
        .iter()
        .map(|&same| if same { 0.0 } else { rng.random_range(0.0..2e9) })
        .collect();
    let bound = if rng.random_bool(0.15) {
        f64::INFINITY
    } else {
        rng.random_range(0.5e9..12e9)
    };
    SubchannelGame::new(NodeId(0), (1..=children).map(NodeId).collect(), rates, revenue, same_mno, bound).unwrap()
}

/// Every assignment of `proposers` to at most one of `acceptors` each, kept
/// when `keep` accepts it.
pub fn all_matchings(proposers: usize, acceptors: usize, mut keep: impl FnMut(&Matching) -> bool) -> Vec<Matching> {
    let mut out = Vec::new();
    let mut digits = vec![0usize; proposers];
    loop {
        let assignment = digits.iter().map(|&x| x.checked_sub(1)).collect();
        let m = Matching::from_assignment(assignment, acceptors);
        if keep(&m) {
            out.push(m);
        }
        let mut i = 0;
        loop {
            if i == proposers {
                return out;
            }
            digits[i] += 1;
            if digits[i] <= acceptors {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Stable matchings of a formation market by brute force.
pub fn stable_formations(game: &FormationGame) -> Vec<Matching> {
    let (nd, na) = (game.stage.demanders.len(), game.stage.anchors.len());
    all_matchings(nd, na, |m| {
        m.pairs()
            .all(|(d, a)| game.dbs_utility[d][a].is_some() && game.abs_utility[a][d].is_some())
            && (0..na).all(|a| m.held(a).len() <= game.quotas[a])
            && game.blocking_pairs(m).is_empty()
    })
}

/// Stable sub-channel assignments by brute force: individually rational
/// under the saturation test and free of blocking pairs.
pub fn stable_allocations(game: &SubchannelGame) -> Vec<Matching> {
    all_matchings(game.num_subchannels(), game.num_children(), |m| {
        game.individually_rational(m) && game.blocking_pairs(m).is_empty()
    })
}

pub fn dbs_value(game: &FormationGame, d: usize, a: Option<usize>) -> f64 {
    a.and_then(|a| game.dbs_utility[d][a]).unwrap_or(0.0)
}

pub fn subchannel_value(game: &SubchannelGame, k: usize, c: Option<usize>) -> f64 {
    c.map_or(-1.0, |c| game.phi_utility(k, c))
}
