use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Arc, StateId, Wfsa, WfsaError};

/// States in an order where every arc goes forward. Among ready states the
/// smallest id comes first, so the order is deterministic.
pub fn topological_order(w: &Wfsa) -> Result<Vec<StateId>, WfsaError> {
    let n = w.num_states();
    let mut indegree = vec![0usize; n];
    for s in 0..n {
        for a in w.arcs(s) {
            indegree[a.next] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<StateId>> = (0..n)
        .filter(|&s| indegree[s] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(s)) = ready.pop() {
        order.push(s);
        for a in w.arcs(s) {
            indegree[a.next] -= 1;
            if indegree[a.next] == 0 {
                ready.push(Reverse(a.next));
            }
        }
    }
    if order.len() != n {
        return Err(WfsaError::Cycle);
    }
    Ok(order)
}

/// Renumbers states so that every arc goes from a lower to a higher id.
pub fn topological_sort(w: &Wfsa) -> Result<Wfsa, WfsaError> {
    let order = topological_order(w)?;
    let mut rank = vec![0; w.num_states()];
    for (i, &s) in order.iter().enumerate() {
        rank[s] = i;
    }
    let mut out = Wfsa::with_states(w.num_states(), rank[w.start()]);
    for &s in &order {
        for a in w.arcs(s) {
            out.add_arc(
                rank[s],
                Arc {
                    next: rank[a.next],
                    ..*a
                },
            );
        }
        out.set_final(rank[s], w.final_weight(s));
    }
    Ok(out)
}
