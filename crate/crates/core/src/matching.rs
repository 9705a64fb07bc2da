//! Two-sided one-to-many matching: preference profiles, a round-based
//! propose-and-dispose engine, blocking-pair detection and Pareto comparison.
//!
//! Agents on each side are dense indices. Proposers are matched to at most one
//! acceptor; acceptors hold a set of proposers whose admissible size is decided
//! by a [`ChoiceRule`] (a fixed quota, or a state-dependent saturation test).

use std::cmp::Ordering;

use crate::error::{Error, Result};

const UNACCEPTABLE: usize = usize::MAX;

/// Strict preference lists of one side over the other. Partners missing from
/// an agent's list are unacceptable to it.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceProfile {
    lists: Vec<Vec<usize>>,
    ranks: Vec<Vec<usize>>,
}

impl PreferenceProfile {
    pub fn new(lists: Vec<Vec<usize>>, num_partners: usize) -> Result<Self> {
        let mut ranks = vec![vec![UNACCEPTABLE; num_partners]; lists.len()];
        for (agent, list) in lists.iter().enumerate() {
            for (r, &b) in list.iter().enumerate() {
                if b >= num_partners {
                    return Err(Error::Config(format!("agent {agent} lists unknown partner {b}")));
                }
                if ranks[agent][b] != UNACCEPTABLE {
                    return Err(Error::Config(format!("agent {agent} lists partner {b} twice")));
                }
                ranks[agent][b] = r;
            }
        }
        Ok(PreferenceProfile { lists, ranks })
    }

    /// Orders partners by descending utility; ties go to the lower index.
    /// `None` marks a partner as unacceptable.
    pub fn from_utilities(
        num_agents: usize,
        num_partners: usize,
        mut utility: impl FnMut(usize, usize) -> Option<f64>,
    ) -> Self {
        let lists = (0..num_agents)
            .map(|a| {
                let mut scored: Vec<(usize, f64)> = (0..num_partners)
                    .filter_map(|b| utility(a, b).map(|u| (b, u)))
                    .collect();
                scored.sort_by(|x, y| descending(x.1, y.1).then(x.0.cmp(&y.0)));
                scored.into_iter().map(|(b, _)| b).collect()
            })
            .collect();
        Self::new(lists, num_partners).expect("generated lists are valid")
    }

    pub fn num_agents(&self) -> usize {
        self.lists.len()
    }

    pub fn list(&self, agent: usize) -> &[usize] {
        &self.lists[agent]
    }

    pub fn rank(&self, agent: usize, partner: usize) -> Option<usize> {
        match self.ranks[agent][partner] {
            UNACCEPTABLE => None,
            r => Some(r),
        }
    }

    pub fn acceptable(&self, agent: usize, partner: usize) -> bool {
        self.ranks[agent][partner] != UNACCEPTABLE
    }

    /// Whether `agent` strictly prefers `x` to `y`, where `None` is being
    /// unmatched (worse than any acceptable partner).
    pub fn prefers(&self, agent: usize, x: Option<usize>, y: Option<usize>) -> bool {
        match (x.and_then(|x| self.rank(agent, x)), y) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(rx), Some(y)) => match self.rank(agent, y) {
                Some(ry) => rx < ry,
                None => true,
            },
        }
    }
}

/// Descending order on utilities, with NaN last.
pub(crate) fn descending(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}

/// A one-to-many matching between proposers and acceptors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    assignment: Vec<Option<usize>>,
    held: Vec<Vec<usize>>,
}

impl Matching {
    pub fn empty(num_proposers: usize, num_acceptors: usize) -> Self {
        Matching {
            assignment: vec![None; num_proposers],
            held: vec![Vec::new(); num_acceptors],
        }
    }

    /// Builds a matching from a proposer-to-acceptor assignment.
    pub fn from_assignment(assignment: Vec<Option<usize>>, num_acceptors: usize) -> Self {
        let mut m = Matching::empty(assignment.len(), num_acceptors);
        for (p, a) in assignment.into_iter().enumerate() {
            if let Some(a) = a {
                m.assign(p, a);
            }
        }
        m
    }

    pub fn num_proposers(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_acceptors(&self) -> usize {
        self.held.len()
    }

    pub fn partner(&self, proposer: usize) -> Option<usize> {
        self.assignment[proposer]
    }

    /// Proposers held by `acceptor`, in ascending index order.
    pub fn held(&self, acceptor: usize) -> &[usize] {
        &self.held[acceptor]
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    pub fn assign(&mut self, proposer: usize, acceptor: usize) {
        self.unassign(proposer);
        self.assignment[proposer] = Some(acceptor);
        let h = &mut self.held[acceptor];
        let pos = h.binary_search(&proposer).unwrap_or_else(|e| e);
        h.insert(pos, proposer);
    }

    pub fn unassign(&mut self, proposer: usize) {
        if let Some(a) = self.assignment[proposer].take() {
            self.held[a].retain(|&p| p != proposer);
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(p, a)| a.map(|a| (p, a)))
    }

    pub fn matched_count(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_some()).count()
    }

    /// Assignment and held sets describe the same relation.
    pub fn is_consistent(&self) -> bool {
        let forward = self.pairs().all(|(p, a)| self.held.get(a).is_some_and(|h| h.contains(&p)));
        let backward = self
            .held
            .iter()
            .enumerate()
            .all(|(a, h)| h.iter().all(|&p| self.assignment.get(p) == Some(&Some(a))));
        forward && backward
    }
}

/// Decides which proposers an acceptor keeps after a proposal round.
pub trait ChoiceRule {
    /// `held` are the proposers the acceptor currently holds and `applicants`
    /// the new acceptable proposals; both are sorted by the acceptor's
    /// preference. Returns the proposers to keep; everyone else is rejected.
    fn choose(&mut self, acceptor: usize, held: &[usize], applicants: &[usize], prefs: &PreferenceProfile) -> Vec<usize>;
}

/// Classic fixed-capacity rule: keep the `quota` best of held and applicants.
#[derive(Debug, Clone)]
pub struct QuotaRule<'a> {
    pub quotas: &'a [usize],
}

impl ChoiceRule for QuotaRule<'_> {
    fn choose(&mut self, acceptor: usize, held: &[usize], applicants: &[usize], prefs: &PreferenceProfile) -> Vec<usize> {
        let mut pool = merge_by_rank(acceptor, held, applicants, prefs);
        pool.truncate(self.quotas[acceptor]);
        pool
    }
}

/// Re-selects from held and applicants together, accepting in preference
/// order while `wants_more(acceptor, accepted_so_far)` holds.
pub struct GreedyUntilSaturated<F> {
    pub wants_more: F,
}

impl<F: FnMut(usize, &[usize]) -> bool> ChoiceRule for GreedyUntilSaturated<F> {
    fn choose(&mut self, acceptor: usize, held: &[usize], applicants: &[usize], prefs: &PreferenceProfile) -> Vec<usize> {
        let mut kept = Vec::new();
        for p in merge_by_rank(acceptor, held, applicants, prefs) {
            if !(self.wants_more)(acceptor, &kept) {
                break;
            }
            kept.push(p);
        }
        kept
    }
}

/// Evaluates each new applicant against the current tentative holdings only:
/// held proposers are never displaced, applicants are accepted in preference
/// order while `wants_more` holds. This is what plain deferred acceptance
/// does when acceptor utilities depend on the acceptor's current match.
pub struct KeepHeldThenFill<F> {
    pub wants_more: F,
}

impl<F: FnMut(usize, &[usize]) -> bool> ChoiceRule for KeepHeldThenFill<F> {
    fn choose(&mut self, acceptor: usize, held: &[usize], applicants: &[usize], _prefs: &PreferenceProfile) -> Vec<usize> {
        let mut kept = held.to_vec();
        for &p in applicants {
            if !(self.wants_more)(acceptor, &kept) {
                break;
            }
            kept.push(p);
        }
        kept
    }
}

fn merge_by_rank(acceptor: usize, held: &[usize], applicants: &[usize], prefs: &PreferenceProfile) -> Vec<usize> {
    let mut pool: Vec<usize> = held.iter().chain(applicants).copied().collect();
    pool.sort_by_key(|&p| prefs.rank(acceptor, p).unwrap_or(UNACCEPTABLE));
    pool
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaOutcome {
    pub matching: Matching,
    /// Total proposals (request messages) sent.
    pub proposals: usize,
    pub rounds: usize,
}

/// Round-based propose-and-dispose: every free proposer applies to its next
/// acceptable acceptor, then each acceptor applies `rule` to its held set plus
/// the round's applicants. Applicants the acceptor finds unacceptable are
/// rejected outright. Ends when no free proposer has anyone left to ask.
pub fn propose_and_dispose(
    prefs_p: &PreferenceProfile,
    prefs_a: &PreferenceProfile,
    rule: &mut impl ChoiceRule,
) -> DaOutcome {
    let num_p = prefs_p.num_agents();
    let num_a = prefs_a.num_agents();
    let mut matching = Matching::empty(num_p, num_a);
    let mut next = vec![0usize; num_p];
    let mut free: Vec<usize> = (0..num_p).collect();
    let mut applicants: Vec<Vec<usize>> = vec![Vec::new(); num_a];
    let mut proposals = 0;
    let mut rounds = 0;

    loop {
        let mut any = false;
        for &p in &free {
            if let Some(&a) = prefs_p.list(p).get(next[p]) {
                next[p] += 1;
                proposals += 1;
                any = true;
                if prefs_a.acceptable(a, p) {
                    applicants[a].push(p);
                }
            }
        }
        if !any {
            break;
        }
        rounds += 1;
        let mut still_free: Vec<usize> = free.iter().copied().filter(|&p| matching.partner(p).is_none()).collect();
        for a in 0..num_a {
            if applicants[a].is_empty() {
                continue;
            }
            let mut apps = std::mem::take(&mut applicants[a]);
            apps.sort_by_key(|&p| prefs_a.rank(a, p).unwrap_or(UNACCEPTABLE));
            let mut held = matching.held(a).to_vec();
            held.sort_by_key(|&p| prefs_a.rank(a, p).unwrap_or(UNACCEPTABLE));
            let kept = rule.choose(a, &held, &apps, prefs_a);
            for &p in held.iter() {
                if !kept.contains(&p) {
                    matching.unassign(p);
                    still_free.push(p);
                }
            }
            for &p in &kept {
                matching.assign(p, a);
            }
        }
        still_free.retain(|&p| matching.partner(p).is_none());
        still_free.sort_unstable();
        still_free.dedup();
        free = still_free;
    }
    DaOutcome {
        matching,
        proposals,
        rounds,
    }
}

/// Proposer-optimal stable matching under fixed quotas (Gale-Shapley).
pub fn deferred_acceptance(prefs_p: &PreferenceProfile, prefs_a: &PreferenceProfile, quotas: &[usize]) -> DaOutcome {
    assert_eq!(quotas.len(), prefs_a.num_agents(), "one quota per acceptor");
    propose_and_dispose(prefs_p, prefs_a, &mut QuotaRule { quotas })
}

/// Acceptability hook for a fixed-quota market.
pub fn quota_hook(quotas: &[usize]) -> impl Fn(usize, &[usize]) -> bool + '_ {
    move |a, held| held.len() < quotas[a]
}

/// Every pair `(proposer, acceptor)` that blocks `matching`.
///
/// `p` must strictly prefer `a` to its current partner, `p` must be acceptable
/// to `a`, and either `a` would take one more proposer on top of what it holds
/// (`accepts_more(a, held)`), or `a` strictly prefers `p` to some held `h` and
/// would take one more once `h` is released (`accepts_more(a, held - h)`).
pub fn find_blocking_pairs(
    matching: &Matching,
    prefs_p: &PreferenceProfile,
    prefs_a: &PreferenceProfile,
    accepts_more: impl Fn(usize, &[usize]) -> bool,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for p in 0..prefs_p.num_agents() {
        let current = matching.partner(p);
        for &a in prefs_p.list(p) {
            if Some(a) == current {
                break;
            }
            if !prefs_a.acceptable(a, p) {
                continue;
            }
            let held = matching.held(a);
            let blocks = accepts_more(a, held)
                || held.iter().any(|&h| {
                    if !prefs_a.prefers(a, Some(p), Some(h)) {
                        return false;
                    }
                    let rest: Vec<usize> = held.iter().copied().filter(|&x| x != h).collect();
                    accepts_more(a, &rest)
                });
            if blocks {
                out.push((p, a));
            }
        }
    }
    out
}

/// True iff `b` leaves every proposer at least as well off as `a` and at
/// least one strictly better, under `utility(proposer, partner)`.
pub fn is_pareto_improvement(a: &Matching, b: &Matching, utility: impl Fn(usize, Option<usize>) -> f64) -> bool {
    assert_eq!(a.num_proposers(), b.num_proposers());
    let mut strict = false;
    for p in 0..a.num_proposers() {
        let (ua, ub) = (utility(p, a.partner(p)), utility(p, b.partner(p)));
        if ub < ua {
            return false;
        }
        if ub > ua {
            strict = true;
        }
    }
    strict
}
