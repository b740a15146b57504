use std::collections::{HashMap, VecDeque};

use super::{Arc, ArcLabel, StateId, Wfsa};
use crate::token::TokenId;

/// Per-state lookup of token arcs, sigma arcs and epsilon arcs.
struct ArcIndex {
    tokens: Vec<HashMap<TokenId, Vec<usize>>>,
    sigma: Vec<Vec<usize>>,
    epsilon: Vec<Vec<usize>>,
}

impl ArcIndex {
    fn new(w: &Wfsa) -> Self {
        let n = w.num_states();
        let mut idx = ArcIndex {
            tokens: vec![HashMap::new(); n],
            sigma: vec![Vec::new(); n],
            epsilon: vec![Vec::new(); n],
        };
        for s in 0..n {
            for (i, a) in w.arcs(s).iter().enumerate() {
                match a.label {
                    ArcLabel::Token(t) => idx.tokens[s].entry(t).or_default().push(i),
                    ArcLabel::Sigma => idx.sigma[s].push(i),
                    ArcLabel::Epsilon => idx.epsilon[s].push(i),
                }
            }
        }
        idx
    }

    /// Arc indices of `s` consuming `t` under the otherwise reading of sigma.
    fn resolve(&self, s: StateId, t: TokenId) -> &[usize] {
        self.tokens[s].get(&t).map_or(&self.sigma[s], Vec::as_slice)
    }
}

/// Product of `w` and `a`: accepts `L(w) ∩ L(a)` and each accepted string
/// costs the sum of its costs in both operands (so an unweighted `a`
/// preserves the costs of `w`).
///
/// Built on the fly from the start pair, so only reachable product states
/// are created; the result is trimmed. Epsilons of `a` are removed up front,
/// so an acyclic `w` always yields an acyclic product even when `a` has
/// epsilon cycles. The filter below then only ever sees epsilons of `w`.
pub fn intersect(w: &Wfsa, a: &Wfsa) -> Wfsa {
    let owned;
    let a = if a.has_epsilons() {
        owned = super::rm_epsilon(a);
        &owned
    } else {
        a
    };
    let wi = ArcIndex::new(w);
    let ai = ArcIndex::new(a);
    let mut ids: HashMap<(StateId, StateId, u8), StateId> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut out = Wfsa::with_states(1, 0);
    let start = (w.start(), a.start(), 0u8);
    ids.insert(start, 0);
    queue.push_back(start);

    let mut intern = |key: (StateId, StateId, u8),
                      out: &mut Wfsa,
                      queue: &mut VecDeque<(StateId, StateId, u8)>|
     -> StateId {
        *ids.entry(key).or_insert_with(|| {
            queue.push_back(key);
            out.add_state()
        })
    };

    while let Some(key @ (q1, q2, filter)) = queue.pop_front() {
        let src = intern(key, &mut out, &mut queue);
        out.set_final(src, w.final_weight(q1).times(a.final_weight(q2)));
        let mut new_arcs: Vec<(ArcLabel, f64, (StateId, StateId, u8))> = Vec::new();
        for arc1 in w.arcs(q1) {
            match arc1.label {
                ArcLabel::Epsilon => {
                    if filter == 0 {
                        new_arcs.push((ArcLabel::Epsilon, arc1.weight.value(), (arc1.next, q2, 0)));
                    }
                }
                ArcLabel::Token(t) => {
                    for &j in ai.resolve(q2, t) {
                        let arc2 = &a.arcs(q2)[j];
                        new_arcs.push((
                            ArcLabel::Token(t),
                            arc1.weight.times(arc2.weight).value(),
                            (arc1.next, arc2.next, 0),
                        ));
                    }
                }
                ArcLabel::Sigma => {
                    // tokens explicit in `a` but not in `w` meet w's sigma
                    let mut explicit: Vec<_> = ai.tokens[q2]
                        .iter()
                        .filter(|(t, _)| !wi.tokens[q1].contains_key(t))
                        .collect();
                    explicit.sort_by_key(|(t, _)| **t);
                    for (&t, arcs2) in explicit {
                        for &j in arcs2 {
                            let arc2 = &a.arcs(q2)[j];
                            new_arcs.push((
                                ArcLabel::Token(t),
                                arc1.weight.times(arc2.weight).value(),
                                (arc1.next, arc2.next, 0),
                            ));
                        }
                    }
                    for &j in &ai.sigma[q2] {
                        let arc2 = &a.arcs(q2)[j];
                        new_arcs.push((
                            ArcLabel::Sigma,
                            arc1.weight.times(arc2.weight).value(),
                            (arc1.next, arc2.next, 0),
                        ));
                    }
                }
            }
        }
        for &j in &ai.epsilon[q2] {
            let arc2 = &a.arcs(q2)[j];
            new_arcs.push((ArcLabel::Epsilon, arc2.weight.value(), (q1, arc2.next, 1)));
        }
        for (label, cost, dst) in new_arcs {
            let next = intern(dst, &mut out, &mut queue);
            out.add_arc(src, Arc::new(label, cost, next));
        }
    }
    out.trim()
}
