//! Decoding directly on the lattice: greedy, plain beam search, and
//! constrained beam search with banks.
//!
//! A token is emitted at the vertex it is drawn from, before moving on, so
//! a path `0 → v1 → … → final` spells one token per non-final vertex. This
//! is the same reading the acceptor conversion uses, and keeps the scores
//! here equal to negated acyclic-automaton path costs.
//!
//! Beams live on vertices. Vertices are swept in index order, which is a
//! topological order, so by the time a vertex is expanded every item that
//! can reach it has arrived.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::constraints::ConstraintPhrase;
use crate::dag::Dag;
use crate::kmp::KmpMatcher;
use crate::token::TokenId;

/// Output of a lattice decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DagDecode {
    pub tokens: Vec<TokenId>,
    /// Sum of emission and transition log-probabilities along the path.
    pub score: f64,
    /// One flag per constraint, in input order.
    pub satisfied: Vec<bool>,
}

impl DagDecode {
    pub fn cost(&self) -> f64 {
        -self.score
    }

    pub fn all_satisfied(&self) -> bool {
        self.satisfied.iter().all(|&s| s)
    }
}

/// A partial hypothesis waiting at `vertex` (which has not emitted yet).
#[derive(Debug, Clone, PartialEq)]
pub struct BeamItem {
    pub vertex: usize,
    pub score: f64,
    pub tokens: Vec<TokenId>,
    pub match_states: Vec<usize>,
    pub met_tokens: usize,
}

/// Sticky KMP transition for `phrase`.
pub fn kmp_advance(state: usize, token: TokenId, phrase: &ConstraintPhrase) -> usize {
    phrase.matcher().advance(state, token)
}

pub fn total_constraint_tokens(constraints: &[ConstraintPhrase]) -> usize {
    constraints.iter().map(ConstraintPhrase::len).sum()
}

/// `max(K, T + 1)` where `T` counts all constraint tokens: one slot for
/// every bank, so no bank can be crowded out.
pub fn effective_beam_size(base_beam: usize, constraints: &[ConstraintPhrase]) -> usize {
    base_beam.max(total_constraint_tokens(constraints) + 1)
}

/// Progress over all phrases: a completed phrase counts in full, an
/// incomplete one counts its current KMP state.
fn met_count(states: &[usize]) -> usize {
    states.iter().sum()
}

/// Follows the argmax token, then the argmax successor, from vertex 0.
pub fn greedy_decode(dag: &Dag) -> DagDecode {
    let mut u = dag.start_vertex();
    let mut tokens = Vec::new();
    let mut score = 0.0;
    while u != dag.final_vertex() {
        let (t, lp_e) = dag.emissions(u)[0];
        let (v, lp_t) = dag.transitions(u)[0];
        tokens.push(t);
        score += lp_e + lp_t;
        u = v;
    }
    DagDecode {
        tokens,
        score,
        satisfied: Vec::new(),
    }
}

// Higher score first, then fewer unmet tokens, then lexicographic tokens.
fn rank(a: &BeamItem, b: &BeamItem) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(b.met_tokens.cmp(&a.met_tokens))
        .then(a.tokens.cmp(&b.tokens))
}

fn expand(
    dag: &Dag,
    item: &BeamItem,
    candidates: &[(TokenId, f64)],
    width: usize,
    matchers: &[KmpMatcher],
    mut sink: impl FnMut(BeamItem),
) {
    let u = item.vertex;
    for &(t, lp_e) in candidates {
        let match_states: Vec<usize> = matchers
            .iter()
            .zip(&item.match_states)
            .map(|(m, &s)| m.advance(s, t))
            .collect();
        let met_tokens = met_count(&match_states);
        let mut tokens = item.tokens.clone();
        tokens.push(t);
        for &(v, lp_t) in dag.transitions(u).iter().take(width) {
            sink(BeamItem {
                vertex: v,
                score: item.score + (lp_e + lp_t),
                tokens: tokens.clone(),
                match_states: match_states.clone(),
                met_tokens,
            });
        }
    }
}

fn initial_item(dag: &Dag, n_constraints: usize) -> BeamItem {
    BeamItem {
        vertex: dag.start_vertex(),
        score: 0.0,
        tokens: Vec::new(),
        match_states: vec![0; n_constraints],
        met_tokens: 0,
    }
}

/// Plain beam search: each vertex keeps its `beam` best arriving items;
/// items expand with the top-`beam` tokens and top-`beam` successors.
pub fn beam_decode(dag: &Dag, beam: usize) -> DagDecode {
    let beam = beam.max(1);
    let n = dag.num_vertices();
    let mut beams: Vec<Vec<BeamItem>> = vec![Vec::new(); n];
    beams[dag.start_vertex()].push(initial_item(dag, 0));
    for u in 0..dag.final_vertex() {
        let mut items = std::mem::take(&mut beams[u]);
        items.sort_by(rank);
        items.truncate(beam);
        let candidates: Vec<(TokenId, f64)> = dag.emissions(u).iter().take(beam).copied().collect();
        for item in &items {
            expand(dag, item, &candidates, beam, &[], |next| beams[next.vertex].push(next));
        }
    }
    let best = beams[dag.final_vertex()]
        .iter()
        .min_by(|a, b| rank(a, b))
        .expect("every non-final vertex has a successor, so the final vertex is reached");
    DagDecode {
        tokens: best.tokens.clone(),
        score: best.score,
        satisfied: Vec::new(),
    }
}

/// Items of one vertex grouped by unmet constraint tokens, best per bank.
#[derive(Debug, Clone, Default)]
pub struct BankAllocation {
    pub banks: BTreeMap<usize, BeamItem>,
}

impl BankAllocation {
    fn offer(&mut self, unmet: usize, item: BeamItem) {
        match self.banks.get(&unmet) {
            Some(held) if rank(held, &item) != Ordering::Greater => {}
            _ => {
                self.banks.insert(unmet, item);
            }
        }
    }

    /// Retained items, best first, at most `limit` of them.
    fn retain(self, limit: usize) -> Vec<BeamItem> {
        let mut items: Vec<BeamItem> = self.banks.into_values().collect();
        items.sort_by(rank);
        items.truncate(limit);
        items
    }
}

/// Candidate tokens at `u`: the top-`k` emissions plus, for each
/// constraint, its next token if partially matched or its first token
/// otherwise. Tokens the vertex cannot emit are left out.
fn cbs_candidates(
    dag: &Dag,
    u: usize,
    k: usize,
    items: &[BeamItem],
    constraints: &[ConstraintPhrase],
) -> Vec<(TokenId, f64)> {
    let mut out: Vec<(TokenId, f64)> = dag.emissions(u).iter().take(k).copied().collect();
    let mut push = |t: TokenId| {
        if out.iter().any(|&(x, _)| x == t) {
            return;
        }
        if let Some(lp) = dag.emission_logprob(u, t) {
            out.push((t, lp));
        }
    };
    for (c, phrase) in constraints.iter().enumerate() {
        push(phrase.tokens()[0]);
        for item in items {
            let s = item.match_states[c];
            if s > 0 && s < phrase.len() {
                push(phrase.tokens()[s]);
            }
        }
    }
    out
}

/// Constrained beam search over the lattice.
///
/// Every item expands along the top-`base_beam` successors with the
/// candidate tokens of its vertex. Arrivals at a vertex are grouped into
/// banks by unmet constraint tokens and only the best item of each bank is
/// kept, up to the effective beam size. The answer is the best item at the
/// final vertex that completed every phrase, or the best item overall with
/// unmet flags when none did.
pub fn cbs_dag_decode(dag: &Dag, constraints: &[ConstraintPhrase], base_beam: usize) -> DagDecode {
    let (items, _) = cbs_dag_search(dag, constraints, base_beam);
    let total = total_constraint_tokens(constraints);
    let best = items
        .iter()
        .find(|i| i.met_tokens == total)
        .or_else(|| items.first())
        .expect("every non-final vertex has a successor, so the final vertex is reached");
    DagDecode {
        tokens: best.tokens.clone(),
        score: best.score,
        satisfied: constraints
            .iter()
            .zip(&best.match_states)
            .map(|(p, &s)| s >= p.len())
            .collect(),
    }
}

/// The search behind [`cbs_dag_decode`]: returns the retained items at the
/// final vertex (best first) and the retained count of every vertex.
pub fn cbs_dag_search(
    dag: &Dag,
    constraints: &[ConstraintPhrase],
    base_beam: usize,
) -> (Vec<BeamItem>, Vec<usize>) {
    let k = base_beam.max(1);
    let limit = effective_beam_size(k, constraints);
    let total = total_constraint_tokens(constraints);
    let matchers: Vec<KmpMatcher> = constraints.iter().map(ConstraintPhrase::matcher).collect();
    let n = dag.num_vertices();
    let mut pending: Vec<BankAllocation> = vec![BankAllocation::default(); n];
    let mut retained_counts = vec![0; n];
    pending[dag.start_vertex()].offer(total, initial_item(dag, constraints.len()));
    for u in 0..dag.final_vertex() {
        let items = std::mem::take(&mut pending[u]).retain(limit);
        retained_counts[u] = items.len();
        let candidates = cbs_candidates(dag, u, k, &items, constraints);
        for item in &items {
            expand(dag, item, &candidates, k, &matchers, |next| {
                let unmet = total - next.met_tokens;
                pending[next.vertex].offer(unmet, next);
            });
        }
    }
    let last = dag.final_vertex();
    let finals = std::mem::take(&mut pending[last]).retain(limit);
    retained_counts[last] = finals.len();
    (finals, retained_counts)
}
