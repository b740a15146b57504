use std::collections::{BTreeSet, HashMap};

use super::{epsilon_closure, Arc, ArcLabel, StateId, TropicalWeight, Wfsa};
use crate::token::TokenId;

/// Removes epsilon arcs. Each state receives the non-epsilon arcs of every
/// state in its epsilon closure, with the cheapest epsilon path cost added,
/// and inherits finality the same way. The (string, min cost) map is
/// unchanged.
///
/// Sigma arcs pulled across an epsilon keep their meaning: if the target
/// state now has an explicit token that the originating state did not, the
/// sigma arc is duplicated as an explicit arc for that token.
pub fn rm_epsilon(w: &Wfsa) -> Wfsa {
    if !w.has_epsilons() {
        return w.clone();
    }
    let n = w.num_states();
    let mut out = Wfsa::with_states(n, w.start());
    for q in 0..n {
        let closure = epsilon_closure(w, &HashMap::from([(q, 0.0)]));
        let mut members: Vec<(StateId, f64)> = closure.into_iter().collect();
        members.sort_by_key(|&(s, _)| s);
        // q first so its own arcs keep their position
        if let Some(pos) = members.iter().position(|&(s, _)| s == q) {
            let own = members.remove(pos);
            members.insert(0, own);
        }
        let explicit: BTreeSet<TokenId> = members
            .iter()
            .flat_map(|&(p, _)| w.arcs(p).iter().filter_map(|a| a.label.token()))
            .collect();
        let mut final_weight = TropicalWeight::ZERO;
        let mut arcs: Vec<Arc> = Vec::new();
        for &(p, d) in &members {
            let dist = TropicalWeight::new(d);
            final_weight = final_weight.plus(dist.times(w.final_weight(p)));
            let own: BTreeSet<TokenId> =
                w.arcs(p).iter().filter_map(|a| a.label.token()).collect();
            for a in w.arcs(p) {
                match a.label {
                    ArcLabel::Epsilon => {}
                    ArcLabel::Token(_) => arcs.push(Arc {
                        weight: dist.times(a.weight),
                        ..*a
                    }),
                    ArcLabel::Sigma => {
                        arcs.push(Arc {
                            weight: dist.times(a.weight),
                            ..*a
                        });
                        for &t in explicit.difference(&own) {
                            arcs.push(Arc {
                                label: ArcLabel::Token(t),
                                weight: dist.times(a.weight),
                                next: a.next,
                            });
                        }
                    }
                }
            }
        }
        out.set_final(q, final_weight);
        *out.arcs_mut(q) = dedup_parallel(arcs);
    }
    out.trim()
}

/// Merges arcs with the same label and target, keeping the cheapest.
fn dedup_parallel(arcs: Vec<Arc>) -> Vec<Arc> {
    let mut seen: HashMap<(ArcLabel, StateId), usize> = HashMap::new();
    let mut out: Vec<Arc> = Vec::with_capacity(arcs.len());
    for a in arcs {
        match seen.get(&(a.label, a.next)) {
            Some(&i) => out[i].weight = out[i].weight.plus(a.weight),
            None => {
                seen.insert((a.label, a.next), out.len());
                out.push(a);
            }
        }
    }
    out
}
