mod common;

use common::{best_dag_path, contains_phrase, phrase, planted_dag, random_dag, rng};
use dagfsa::cbs::{beam_decode, cbs_dag_decode, cbs_dag_search, effective_beam_size, greedy_decode, kmp_advance};
use dagfsa::constraints::ConstraintPhrase;
use dagfsa::token::TokenId;
use proptest::prelude::*;
use rand::RngExt;

/// A planted lattice plus 1-3 phrases cut from the planted string.
fn planted_fixture(seed: u64) -> (dagfsa::dag::Dag, Vec<TokenId>, Vec<ConstraintPhrase>) {
    let mut r = rng(seed);
    let len = r.random_range(5..10);
    let planted: Vec<TokenId> = (0..len).map(|_| TokenId(r.random_range(2..14))).collect();
    let distractors: Vec<TokenId> = (2..14).map(TokenId).collect();
    let dag = planted_dag(seed, &planted, &distractors, r.random_range(0.2..0.6));
    let n = r.random_range(1..=3);
    let phrases = (0..n)
        .map(|_| {
            let l = r.random_range(1..=3);
            let at = r.random_range(0..=len - l);
            ConstraintPhrase::from_tokens(planted[at..at + l].to_vec()).unwrap()
        })
        .collect();
    (dag, planted, phrases)
}

#[test]
fn effective_beam_examples() {
    let two = [phrase(&[1, 2]), phrase(&[3, 4, 5])];
    assert_eq!(effective_beam_size(4, &two), 6);
    assert_eq!(effective_beam_size(9, &two), 9);
    assert_eq!(effective_beam_size(3, &[]), 3);
}

#[test]
fn sticky_matching() {
    let p = phrase(&[1, 1, 2]);
    let mut s = 0;
    for t in [1, 1, 1, 2, 7, 7] {
        s = kmp_advance(s, TokenId(t), &p);
    }
    assert_eq!(s, 3);
}

#[test]
fn beam_one_is_greedy() {
    for seed in 0..100 {
        let dag = random_dag(seed, 10, 3, 2, 12);
        let g = greedy_decode(&dag);
        let c = cbs_dag_decode(&dag, &[], 1);
        assert_eq!(c.tokens, g.tokens, "seed {seed}");
        assert!((c.score - g.score).abs() < 1e-12);
        assert_eq!(beam_decode(&dag, 1).tokens, g.tokens, "seed {seed}");
    }
}

#[test]
fn wide_beam_is_exact() {
    // every vertex keeps its best arrival and every arc is tried
    for seed in 0..100 {
        let dag = random_dag(seed, 8, 3, 2, 12);
        let (tokens, cost) = best_dag_path(&dag);
        let b = beam_decode(&dag, 3);
        assert!((b.cost() - cost).abs() < 1e-9, "seed {seed}: {} vs {cost}", b.cost());
        assert_eq!(b.tokens.len(), tokens.len());
    }
}

#[test]
fn satisfied_flag_means_present() {
    let mut satisfied = 0;
    for seed in 0..100 {
        let (dag, _, phrases) = planted_fixture(seed);
        let out = cbs_dag_decode(&dag, &phrases, 3);
        assert_eq!(out.satisfied.len(), phrases.len());
        for (p, &flag) in phrases.iter().zip(&out.satisfied) {
            assert_eq!(flag, contains_phrase(&out.tokens, p.tokens()), "seed {seed}");
        }
        if out.all_satisfied() {
            satisfied += 1;
        }
    }
    // every fixture is feasible, so the search should nearly always succeed
    assert!(satisfied >= 90, "{satisfied}/100 satisfied");
}

proptest! {
    #[test]
    fn bookkeeping_is_consistent(seed in 0u64..100_000, beam in 1usize..6) {
        let (dag, _, phrases) = planted_fixture(seed);
        let (items, counts) = cbs_dag_search(&dag, &phrases, beam);
        let limit = effective_beam_size(beam, &phrases);
        for &c in &counts {
            prop_assert!(c <= limit);
        }
        prop_assert!(!items.is_empty());
        for w in items.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
        }
        for item in &items {
            let states: Vec<usize> = phrases.iter().map(|p| p.matcher().run(&item.tokens)).collect();
            prop_assert_eq!(&item.match_states, &states);
            prop_assert_eq!(item.met_tokens, states.iter().sum::<usize>());
            prop_assert_eq!(item.vertex, dag.final_vertex());
        }
    }

    #[test]
    fn unconstrained_search_never_loses_to_greedy(seed in 0u64..100_000, beam in 1usize..5) {
        let dag = random_dag(seed, 10, 3, 2, 12);
        let out = cbs_dag_decode(&dag, &[], beam);
        prop_assert!(out.score >= greedy_decode(&dag).score - 1e-12);
    }
}
