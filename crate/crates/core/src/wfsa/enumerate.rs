use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{epsilon_closure, StateId, Wfsa};
use crate::token::TokenId;

/// Every accepted string of at most `max_len` tokens with its cheapest
/// cost, ordered by length then lexicographically. Exponential; meant as a
/// reference for tests. Sigma arcs are expanded over the tokens that appear
/// explicitly somewhere in `w`.
pub fn enumerate_strings(w: &Wfsa, max_len: usize) -> Vec<(Vec<TokenId>, f64)> {
    let alphabet: BTreeSet<TokenId> = (0..w.num_states())
        .flat_map(|s| w.arcs(s).iter().filter_map(|a| a.label.token()))
        .collect();
    let alphabet: Vec<TokenId> = alphabet.into_iter().collect();
    enumerate_strings_over(w, max_len, &alphabet)
}

/// Like [`enumerate_strings`], but over an explicit alphabet.
pub fn enumerate_strings_over(
    w: &Wfsa,
    max_len: usize,
    alphabet: &[TokenId],
) -> Vec<(Vec<TokenId>, f64)> {
    let mut results = Vec::new();
    let mut frontier: BTreeMap<Vec<TokenId>, HashMap<StateId, f64>> = BTreeMap::new();
    frontier.insert(
        Vec::new(),
        epsilon_closure(w, &HashMap::from([(w.start(), 0.0)])),
    );
    for len in 0..=max_len {
        let mut next_frontier = BTreeMap::new();
        for (prefix, config) in &frontier {
            let best = config
                .iter()
                .filter(|(&s, _)| w.is_final(s))
                .map(|(&s, &c)| c + w.final_weight(s).value())
                .min_by(f64::total_cmp);
            if let Some(cost) = best {
                results.push((prefix.clone(), cost));
            }
            if len == max_len {
                continue;
            }
            for &t in alphabet {
                let mut moved: HashMap<StateId, f64> = HashMap::new();
                for (&s, &c) in config {
                    for a in w.matching_arcs(s, t) {
                        let cost = c + a.weight.value();
                        let e = moved.entry(a.next).or_insert(f64::INFINITY);
                        if cost < *e {
                            *e = cost;
                        }
                    }
                }
                if moved.is_empty() {
                    continue;
                }
                let mut extended = prefix.clone();
                extended.push(t);
                next_frontier.insert(extended, epsilon_closure(w, &moved));
            }
        }
        frontier = next_frontier;
    }
    results
}
