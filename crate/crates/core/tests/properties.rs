//! Randomized invariants over the model, graph, and ranking layers.

use std::collections::BTreeSet;

use lineuplab_core::eval::spearman_slices;
use lineuplab_core::ingest::qualify_players;
use lineuplab_core::model::{build_line_graph, jaccard, AggregatedRecord};
use lineuplab_core::rank::{average_ranks_desc, competition_ranks_desc, rank_interval_50};
use lineuplab_core::{GeneralizedLineup, PlayerId, StintRecord};
use nalgebra::DVector;
use proptest::prelude::*;

const POOL: [&str; 6] = ["A", "B", "C", "D", "E", "F"];

fn arb_lineup() -> impl Strategy<Value = GeneralizedLineup> {
    proptest::sample::subsequence(POOL.to_vec(), 1..=3).prop_map(|ids| {
        GeneralizedLineup::canonicalize(ids.into_iter().map(PlayerId::new).collect()).unwrap()
    })
}

fn arb_records() -> impl Strategy<Value = Vec<AggregatedRecord>> {
    proptest::collection::vec((arb_lineup(), -10i64..=10, 1u32..=600), 2..8).prop_map(|items| {
        let mut seen = BTreeSet::new();
        items
            .into_iter()
            .filter(|(l, _, _)| seen.insert(l.clone()))
            .map(|(lineup, pm, secs)| AggregatedRecord {
                lineup,
                pm,
                seconds: secs as f64,
                games: 1,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn jaccard_matches_set_definition_and_is_symmetric(a in arb_lineup(), b in arb_lineup()) {
        let sa: BTreeSet<_> = a.members().iter().collect();
        let sb: BTreeSet<_> = b.members().iter().collect();
        let expect = sa.intersection(&sb).count() as f64 / sa.union(&sb).count() as f64;
        let w = jaccard(&a, &b);
        prop_assert!((w - expect).abs() < 1e-15);
        prop_assert!((w - jaccard(&b, &a)).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!((jaccard(&a, &a) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn laplacian_quadratic_form_is_weighted_difference_sum(
        records in arb_records(),
        raw_beta in proptest::collection::vec(-5.0f64..5.0, 8),
    ) {
        let lg = build_line_graph(&records);
        let n = lg.n();
        let beta = DVector::from_fn(n, |i, _| raw_beta[i % raw_beta.len()]);
        let quad = (beta.transpose() * &lg.laplacian * &beta)[(0, 0)];
        let mut expect = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                expect += lg.adjacency[(i, j)] * (beta[i] - beta[j]).powi(2);
            }
        }
        prop_assert!((quad - expect).abs() < 1e-9, "quad {quad} vs {expect}");
    }

    #[test]
    fn eigenvalues_are_nonnegative_and_sorted(records in arb_records()) {
        let lg = build_line_graph(&records);
        let mut prev = -1.0;
        for &xi in lg.eigenvalues.iter() {
            prop_assert!(xi >= 0.0);
            prop_assert!(xi >= prev - 1e-10);
            prev = xi;
        }
    }

    #[test]
    fn qualification_is_monotone_in_threshold(
        secs in proptest::collection::vec(1.0f64..2000.0, 3..6),
        lo in 0.0f64..500.0,
        delta in 0.0f64..500.0,
    ) {
        let stints: Vec<StintRecord> = secs
            .iter()
            .enumerate()
            .map(|(i, &s)| StintRecord {
                season: "2024".into(),
                game_id: "G1".into(),
                date: "2024-01-01".into(),
                team: "T".into(),
                opponent: "O".into(),
                is_home: true,
                lineup: GeneralizedLineup::canonicalize(vec![PlayerId::new(POOL[i % POOL.len()])])
                    .unwrap(),
                opp_lineup: GeneralizedLineup::canonicalize(vec![PlayerId::new("Z")]).unwrap(),
                seconds: s,
                points_for: 0,
                points_against: 0,
            })
            .collect();
        let loose = qualify_players(&stints, lo);
        let strict = qualify_players(&stints, lo + delta);
        prop_assert!(strict.is_subset(&loose));
    }

    #[test]
    fn competition_ranks_are_a_tie_respecting_permutation(
        scores in proptest::collection::vec(-100.0f64..100.0, 1..12),
    ) {
        let ranks = competition_ranks_desc(&scores);
        prop_assert_eq!(ranks.len(), scores.len());
        prop_assert!(ranks.iter().all(|&r| r >= 1 && r <= scores.len()));
        prop_assert!(ranks.contains(&1));
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if scores[i] > scores[j] + 1e-9 {
                    prop_assert!(ranks[i] < ranks[j]);
                }
            }
        }
    }

    #[test]
    fn average_ranks_sum_is_invariant(
        scores in proptest::collection::vec(-100.0f64..100.0, 1..12),
    ) {
        let ranks = average_ranks_desc(&scores);
        let n = scores.len() as f64;
        let total: f64 = ranks.iter().sum();
        prop_assert!((total - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn spearman_bounds_and_affine_invariance(
        pairs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..15),
        scale in 0.1f64..10.0,
        shift in -100.0f64..100.0,
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let rho = spearman_slices(&x, &y).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
        let tx: Vec<f64> = x.iter().map(|v| v * scale + shift).collect();
        prop_assert!((spearman_slices(&tx, &y).unwrap() - rho).abs() < 1e-12);
    }

    #[test]
    fn rank_interval_brackets_the_replicates(
        ranks in proptest::collection::vec(1usize..30, 1..40),
    ) {
        let (lo, hi) = rank_interval_50(&ranks);
        let min = *ranks.iter().min().unwrap();
        let max = *ranks.iter().max().unwrap();
        prop_assert!(lo <= hi);
        prop_assert!(lo >= min && hi <= max);
    }

    #[test]
    fn subsets_enumerate_every_subset_up_to_max(lineup in arb_lineup()) {
        let n = lineup.size();
        for max in 1..=n {
            let subs = lineup.subsets(max);
            let expect: usize = (1..=max).map(|i| binom(n, i)).sum();
            prop_assert_eq!(subs.len(), expect);
            let unique: BTreeSet<_> = subs.iter().collect();
            prop_assert_eq!(unique.len(), subs.len());
            for s in &subs {
                prop_assert!(s.is_subset_of(&lineup));
                prop_assert!(s.size() <= max);
            }
        }
    }
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (1..=k).fold(1, |acc, i| acc * (n - i + 1) / i)
}
