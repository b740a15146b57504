//! Determinization and minimization of unweighted acceptors.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::{epsilon_closure, Arc, ArcLabel, StateId, TropicalWeight, Wfsa};
use crate::token::TokenId;

/// Subset construction followed by partition-refinement minimization.
/// Weights are ignored; the result is unweighted, epsilon-free,
/// deterministic, trim, and minimal. Minimal here means no two states accept
/// the same right language, with sigma arcs read as otherwise transitions.
/// States are numbered in breadth-first order from the start.
pub fn determinize_min(a: &Wfsa) -> Wfsa {
    let dfa = subset_construction(&a.trim());
    minimize(&dfa.trim())
}

fn closure_set(a: &Wfsa, seeds: impl IntoIterator<Item = StateId>) -> Vec<StateId> {
    let seeds: HashMap<StateId, f64> = seeds.into_iter().map(|s| (s, 0.0)).collect();
    let mut set: Vec<StateId> = epsilon_closure(a, &seeds).into_keys().collect();
    set.sort_unstable();
    set
}

fn subset_construction(a: &Wfsa) -> Wfsa {
    let mut ids: HashMap<Vec<StateId>, StateId> = HashMap::new();
    let mut subsets: Vec<Vec<StateId>> = Vec::new();
    let start = closure_set(a, [a.start()]);
    ids.insert(start.clone(), 0);
    subsets.push(start);
    let mut out = Wfsa::with_states(1, 0);
    let mut queue = VecDeque::from([0]);
    while let Some(d) = queue.pop_front() {
        let subset = subsets[d].clone();
        if subset.iter().any(|&s| a.is_final(s)) {
            out.set_final(d, TropicalWeight::ONE);
        }
        let mut by_token: BTreeMap<TokenId, BTreeSet<StateId>> = BTreeMap::new();
        let explicit: BTreeSet<TokenId> = subset
            .iter()
            .flat_map(|&s| a.arcs(s).iter().filter_map(|x| x.label.token()))
            .collect();
        for &t in &explicit {
            let targets = by_token.entry(t).or_default();
            for &s in &subset {
                targets.extend(a.matching_arcs(s, t).map(|x| x.next));
            }
        }
        let sigma: BTreeSet<StateId> = subset
            .iter()
            .flat_map(|&s| a.arcs(s).iter())
            .filter(|x| x.label == ArcLabel::Sigma)
            .map(|x| x.next)
            .collect();
        let mut moves: Vec<(ArcLabel, BTreeSet<StateId>)> = Vec::new();
        if !sigma.is_empty() {
            moves.push((ArcLabel::Sigma, sigma));
        }
        moves.extend(by_token.into_iter().map(|(t, s)| (ArcLabel::Token(t), s)));
        for (label, targets) in moves {
            let next_set = closure_set(a, targets);
            let next = match ids.get(&next_set) {
                Some(&id) => id,
                None => {
                    let id = out.add_state();
                    ids.insert(next_set.clone(), id);
                    subsets.push(next_set);
                    queue.push_back(id);
                    id
                }
            };
            out.add_arc(d, Arc::new(label, 0.0, next));
        }
    }
    out
}

/// Signature of a state under a partition: finality, the block reached by
/// sigma, and the token moves that differ from the sigma move.
type Signature = (bool, Option<usize>, Vec<(TokenId, usize)>);

fn signature(dfa: &Wfsa, s: StateId, block: &[usize]) -> Signature {
    let sigma = dfa
        .arcs(s)
        .iter()
        .find(|x| x.label == ArcLabel::Sigma)
        .map(|x| block[x.next]);
    let mut moves: Vec<(TokenId, usize)> = dfa
        .arcs(s)
        .iter()
        .filter_map(|x| x.label.token().map(|t| (t, block[x.next])))
        .filter(|&(_, b)| Some(b) != sigma)
        .collect();
    moves.sort_unstable();
    (dfa.is_final(s), sigma, moves)
}

/// Moore-style refinement to the coarsest stable partition.
fn minimize(dfa: &Wfsa) -> Wfsa {
    let n = dfa.num_states();
    let mut block: Vec<usize> = (0..n).map(|s| usize::from(dfa.is_final(s))).collect();
    let mut count = block.iter().copied().collect::<BTreeSet<_>>().len();
    loop {
        let mut ids: HashMap<(usize, Signature), usize> = HashMap::new();
        let next: Vec<usize> = (0..n)
            .map(|s| {
                let key = (block[s], signature(dfa, s, &block));
                let fresh = ids.len();
                *ids.entry(key).or_insert(fresh)
            })
            .collect();
        let next_count = ids.len();
        block = next;
        if next_count == count {
            break;
        }
        count = next_count;
    }
    // number blocks breadth-first from the start block
    let mut order = vec![usize::MAX; count];
    let mut rep = vec![usize::MAX; count];
    for s in 0..n {
        if rep[block[s]] == usize::MAX {
            rep[block[s]] = s;
        }
    }
    let mut queue = VecDeque::from([block[dfa.start()]]);
    order[block[dfa.start()]] = 0;
    let mut next_id = 1;
    let mut visit = Vec::new();
    while let Some(b) = queue.pop_front() {
        visit.push(b);
        let mut arcs: Vec<&Arc> = dfa.arcs(rep[b]).iter().collect();
        arcs.sort_by_key(|x| x.label);
        for x in arcs {
            let nb = block[x.next];
            if order[nb] == usize::MAX {
                order[nb] = next_id;
                next_id += 1;
                queue.push_back(nb);
            }
        }
    }
    let mut out = Wfsa::with_states(next_id, 0);
    for b in visit {
        let s = rep[b];
        let (is_final, sigma, moves) = signature(dfa, s, &block);
        if is_final {
            out.set_final(order[b], TropicalWeight::ONE);
        }
        if let Some(sb) = sigma {
            out.add_arc(order[b], Arc::new(ArcLabel::Sigma, 0.0, order[sb]));
        }
        for (t, tb) in moves {
            out.add_arc(order[b], Arc::new(ArcLabel::Token(t), 0.0, order[tb]));
        }
    }
    out
}
