use super::{topological_order, ArcLabel, StateId, Wfsa, WfsaError};
use crate::token::TokenId;

/// An accepted string with its path cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub tokens: Vec<TokenId>,
    pub cost: f64,
}

/// Cheapest accepting path of an acyclic automaton, found with one
/// relaxation pass in topological order (linear in the number of arcs).
/// Returns `Ok(None)` when the language is empty. Ties keep the first path
/// found in state and arc order.
pub fn shortest_path(w: &Wfsa) -> Result<Option<Path>, WfsaError> {
    let order = topological_order(w)?;
    let n = w.num_states();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<(StateId, usize)>> = vec![None; n];
    dist[w.start()] = 0.0;
    for &s in &order {
        if dist[s] == f64::INFINITY {
            continue;
        }
        for (i, a) in w.arcs(s).iter().enumerate() {
            let cost = dist[s] + a.weight.value();
            if cost < dist[a.next] {
                dist[a.next] = cost;
                parent[a.next] = Some((s, i));
            }
        }
    }
    let mut best: Option<(StateId, f64)> = None;
    for &s in &order {
        if !w.is_final(s) || dist[s] == f64::INFINITY {
            continue;
        }
        let total = dist[s] + w.final_weight(s).value();
        if best.is_none_or(|(_, c)| total < c) {
            best = Some((s, total));
        }
    }
    let Some((end, cost)) = best else {
        return Ok(None);
    };
    let mut tokens = Vec::new();
    let mut s = end;
    while let Some((p, i)) = parent[s] {
        match w.arcs(p)[i].label {
            ArcLabel::Token(t) => tokens.push(t),
            ArcLabel::Epsilon => {}
            ArcLabel::Sigma => return Err(WfsaError::WildcardOnPath(p)),
        }
        s = p;
    }
    tokens.reverse();
    Ok(Some(Path { tokens, cost }))
}
