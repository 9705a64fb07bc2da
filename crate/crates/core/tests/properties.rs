mod common;

use mbn_core::baselines::{exhaustive_optimal, optimal_allocation};
use mbn_core::formation::FormationResult;
use mbn_core::metrics::{overhead_check, RunMetrics};
use mbn_core::{run, Error, ExhaustiveLimits, Scheme};
use proptest::prelude::*;

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn allocation_is_stable_and_rational(seed in 0u64..1_000_000, children in 1usize..5, k in 1usize..9) {
        let game = random_subchannel_game(&mut rng(seed), children, k);
        let out = game.solve();
        prop_assert!(out.matching.is_consistent());
        prop_assert!(game.blocking_pairs(&out.matching).is_empty());
        prop_assert!(game.individually_rational(&out.matching));
        // no sub-channel asks the same child twice
        prop_assert!(out.proposals <= k * children);
    }

    #[test]
    fn formation_market_is_stable(seed in 0u64..1_000_000, anchors in 1usize..6, demanders in 1usize..10) {
        let game = random_formation_game(&mut rng(seed), anchors, demanders);
        let out = game.solve();
        prop_assert!(game.blocking_pairs(&out.matching).is_empty());
        for (a, &q) in game.quotas.iter().enumerate() {
            prop_assert!(out.matching.held(a).len() <= q);
        }
        for (d, a) in out.matching.pairs() {
            prop_assert!(game.dbs_utility[d][a].is_some() && game.abs_utility[a][d].is_some());
        }
    }

    #[test]
    fn runs_are_well_formed(seed in 0u64..10_000, m in 1usize..25, n in 1usize..4, k in 1usize..12, rho in 0.0f64..=1.0) {
        let sc = scenario(m, n, k, rho);
        let inst = sc.instance(seed).unwrap();
        for scheme in [Scheme::Cooperative, Scheme::NonCooperative, Scheme::Random { seed }] {
            let out = run(&inst.topology, &inst.channel, &sc.network, &inst.pricing, scheme).unwrap();
            prop_assert_eq!(structural_check(&inst.topology, &sc.network, &out), Ok(()));
            if scheme == Scheme::NonCooperative {
                prop_assert_eq!(out.formation.cross_mno_edges(&inst.topology), 0);
            }
            if scheme != (Scheme::Random { seed }) {
                prop_assert_eq!(blocking_pairs(&out), 0);
                prop_assert!(overhead_check(&out, k).passed());
            }
            let metrics = RunMetrics::from_run(&inst.topology, &inst.pricing, &out);
            prop_assert!(metrics.mno_cost.iter().all(|&c| c >= 0.0));
            prop_assert!((metrics.per_sbs_rates.iter().sum::<f64>() - metrics.sum_rate).abs() <= 1e-6 * metrics.sum_rate.max(1.0));
        }
    }
}

#[test]
fn same_seed_same_run() {
    let sc = scenario(20, 3, 10, 0.5);
    let inst = sc.instance(42).unwrap();
    for scheme in [Scheme::Cooperative, Scheme::Random { seed: 42 }] {
        let a = run(&inst.topology, &inst.channel, &sc.network, &inst.pricing, scheme).unwrap();
        let b = run(&inst.topology, &inst.channel, &sc.network, &inst.pricing, scheme).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn noncooperative_costs_nothing() {
    let sc = scenario(15, 3, 50, 0.5);
    for seed in 0..20 {
        let inst = sc.instance(seed).unwrap();
        let out = run(&inst.topology, &inst.channel, &sc.network, &inst.pricing, Scheme::NonCooperative).unwrap();
        let m = RunMetrics::from_run(&inst.topology, &inst.pricing, &out);
        assert!(m.mno_cost.iter().all(|&c| c == 0.0), "seed {seed}: {:?}", m.mno_cost);
    }
}

#[test]
fn optimum_bounds_every_scheme() {
    let sc = scenario(5, 2, 3, 0.5);
    let limits = ExhaustiveLimits::default();
    for seed in 0..25 {
        let inst = sc.instance(seed).unwrap();
        let best = exhaustive_optimal(&inst.topology, &inst.channel, &sc.network, &inst.pricing, &limits).unwrap();
        assert_eq!(structural_check(&inst.topology, &sc.network, &run_of(&best)), Ok(()));
        for scheme in [Scheme::Cooperative, Scheme::NonCooperative, Scheme::Random { seed }] {
            let out = run(&inst.topology, &inst.channel, &sc.network, &inst.pricing, scheme).unwrap();
            assert!(out.sum_rate() <= best.sum_rate * (1.0 + 1e-9), "seed {seed} {scheme:?}");
            // the scheme's own forest, searched alone, contains its allocation
            let fixed = optimal_allocation(&inst.topology, &inst.channel, &sc.network, &inst.pricing, &out.formation, &limits)
                .unwrap();
            assert!(out.sum_rate() <= fixed.sum_rate * (1.0 + 1e-9), "seed {seed} {scheme:?}");
            assert!(fixed.sum_rate <= best.sum_rate * (1.0 + 1e-9));
        }
    }
}

fn run_of(best: &mbn_core::OptimalSolution) -> mbn_core::RunOutput {
    mbn_core::RunOutput {
        formation: best.formation.clone(),
        allocation: best.allocation.clone(),
        stages: Vec::new(),
    }
}

#[test]
fn oversized_exhaustive_search_is_refused() {
    let sc = scenario(12, 2, 5, 0.5);
    let inst = sc.instance(1).unwrap();
    let err = exhaustive_optimal(&inst.topology, &inst.channel, &sc.network, &inst.pricing, &ExhaustiveLimits::default())
        .unwrap_err();
    assert!(matches!(err, Error::InstanceTooLarge { sbs: 12, .. }), "{err}");
}

#[test]
fn stage_numbers_match_hop_counts() {
    let sc = scenario(30, 3, 20, 0.5);
    for seed in 0..10 {
        let inst = sc.instance(seed).unwrap();
        let out = run(&inst.topology, &inst.channel, &sc.network, &inst.pricing, Scheme::Cooperative).unwrap();
        let rebuilt = FormationResult::from_parents(out.formation.parent.clone());
        assert_eq!(rebuilt.stage_of, out.formation.stage_of);
    }
}
