//! Weighted finite-state acceptors over the tropical semiring.
//!
//! Weights are costs (negative log-probabilities): `plus` is `min`,
//! `times` is `+`, `ONE` is `0` and `ZERO` is `+inf`.
//!
//! Arc labels are tokens, epsilon, or [`ArcLabel::Sigma`]. A sigma arc
//! leaving state `q` matches every token that has no explicit token arc
//! leaving `q` (an "otherwise" transition). For states that carry only
//! sigma arcs this is the usual any-symbol wildcard. All operations in this
//! module, and the enumeration oracle, share that reading.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::token::TokenId;

mod algebra;
mod convert;
mod determinize;
mod dump;
mod enumerate;
mod epsilon;
mod intersect;
mod shortest;
mod topo;

pub use algebra::{closure, concat, union, union_many};
pub use convert::{dag_to_wfsa, pruned_dag_to_wfsa};
pub use determinize::determinize_min;
pub use dump::{parse_dump, DumpError};
pub use enumerate::{enumerate_strings, enumerate_strings_over};
pub use epsilon::rm_epsilon;
pub use intersect::intersect;
pub use shortest::{shortest_path, Path};
pub use topo::{topological_order, topological_sort};

pub type StateId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum WfsaError {
    #[error("cycle detected")]
    Cycle,
    #[error("automaton has epsilon arcs (state {0})")]
    HasEpsilon(StateId),
    #[error("best path crosses a wildcard arc at state {0}")]
    WildcardOnPath(StateId),
}

/// A cost in the tropical semiring.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TropicalWeight(f64);

impl TropicalWeight {
    pub const ZERO: TropicalWeight = TropicalWeight(f64::INFINITY);
    pub const ONE: TropicalWeight = TropicalWeight(0.0);

    pub fn new(cost: f64) -> Self {
        TropicalWeight(cost)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::INFINITY
    }

    pub fn plus(self, other: Self) -> Self {
        TropicalWeight(self.0.min(other.0))
    }

    pub fn times(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        TropicalWeight(self.0 + other.0)
    }
}

impl Default for TropicalWeight {
    fn default() -> Self {
        Self::ONE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArcLabel {
    Epsilon,
    Sigma,
    Token(TokenId),
}

impl ArcLabel {
    pub fn token(self) -> Option<TokenId> {
        match self {
            ArcLabel::Token(t) => Some(t),
            _ => None,
        }
    }
}

impl fmt::Display for ArcLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArcLabel::Epsilon => write!(f, "eps"),
            ArcLabel::Sigma => write!(f, "sigma"),
            ArcLabel::Token(t) => write!(f, "tok:{t}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub label: ArcLabel,
    pub weight: TropicalWeight,
    pub next: StateId,
}

impl Arc {
    pub fn new(label: ArcLabel, cost: f64, next: StateId) -> Self {
        Arc {
            label,
            weight: TropicalWeight::new(cost),
            next,
        }
    }
}

/// A weighted acceptor. States are `0..num_states()`; a state is final when
/// its final weight is not `ZERO`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wfsa {
    arcs: Vec<Vec<Arc>>,
    finals: Vec<TropicalWeight>,
    start: StateId,
}

impl Default for Wfsa {
    fn default() -> Self {
        Self::empty()
    }
}

impl Wfsa {
    /// An automaton with `num_states` states, no arcs and no finals.
    pub fn with_states(num_states: usize, start: StateId) -> Self {
        assert!(start < num_states, "start state out of range");
        Wfsa {
            arcs: vec![Vec::new(); num_states],
            finals: vec![TropicalWeight::ZERO; num_states],
            start,
        }
    }

    /// The automaton accepting nothing.
    pub fn empty() -> Self {
        Self::with_states(1, 0)
    }

    /// Accepts exactly `tokens`, at cost zero.
    pub fn from_string(tokens: &[TokenId]) -> Self {
        let mut w = Self::with_states(tokens.len() + 1, 0);
        for (i, &t) in tokens.iter().enumerate() {
            w.add_arc(i, Arc::new(ArcLabel::Token(t), 0.0, i + 1));
        }
        w.set_final(tokens.len(), TropicalWeight::ONE);
        w
    }

    /// Accepts every token string (one state with a sigma loop).
    pub fn universal() -> Self {
        let mut w = Self::with_states(1, 0);
        w.add_arc(0, Arc::new(ArcLabel::Sigma, 0.0, 0));
        w.set_final(0, TropicalWeight::ONE);
        w
    }

    pub fn add_state(&mut self) -> StateId {
        self.arcs.push(Vec::new());
        self.finals.push(TropicalWeight::ZERO);
        self.arcs.len() - 1
    }

    pub fn add_arc(&mut self, src: StateId, arc: Arc) {
        assert!(arc.next < self.arcs.len(), "arc target out of range");
        self.arcs[src].push(arc);
    }

    pub fn set_final(&mut self, state: StateId, weight: TropicalWeight) {
        self.finals[state] = weight;
    }

    pub fn set_start(&mut self, state: StateId) {
        assert!(state < self.arcs.len(), "start state out of range");
        self.start = state;
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn num_states(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.iter().map(Vec::len).sum()
    }

    pub fn arcs(&self, state: StateId) -> &[Arc] {
        &self.arcs[state]
    }

    pub(crate) fn arcs_mut(&mut self, state: StateId) -> &mut Vec<Arc> {
        &mut self.arcs[state]
    }

    pub fn final_weight(&self, state: StateId) -> TropicalWeight {
        self.finals[state]
    }

    pub fn is_final(&self, state: StateId) -> bool {
        !self.finals[state].is_zero()
    }

    pub fn finals(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.num_states()).filter(|&s| self.is_final(s))
    }

    pub fn has_epsilons(&self) -> bool {
        self.arcs
            .iter()
            .flatten()
            .any(|a| a.label == ArcLabel::Epsilon)
    }

    pub fn has_sigma(&self) -> bool {
        self.arcs.iter().flatten().any(|a| a.label == ArcLabel::Sigma)
    }

    /// True when every weight, arc and final, is `ONE`.
    pub fn is_unweighted(&self) -> bool {
        self.arcs.iter().flatten().all(|a| a.weight == TropicalWeight::ONE)
            && self
                .finals
                .iter()
                .all(|f| f.is_zero() || *f == TropicalWeight::ONE)
    }

    /// True when no state has two arcs sharing a non-epsilon label and there
    /// are no epsilon arcs.
    pub fn is_deterministic(&self) -> bool {
        self.arcs.iter().all(|arcs| {
            let mut labels: Vec<ArcLabel> = arcs.iter().map(|a| a.label).collect();
            labels.sort();
            let n = labels.len();
            labels.dedup();
            labels.len() == n && !labels.contains(&ArcLabel::Epsilon)
        })
    }

    pub fn is_acyclic(&self) -> bool {
        topological_order(self).is_ok()
    }

    pub fn has_accepting_path(&self) -> bool {
        let mut seen = vec![false; self.num_states()];
        let mut stack = vec![self.start];
        seen[self.start] = true;
        while let Some(s) = stack.pop() {
            if self.is_final(s) {
                return true;
            }
            for a in &self.arcs[s] {
                if !seen[a.next] {
                    seen[a.next] = true;
                    stack.push(a.next);
                }
            }
        }
        false
    }

    /// Arcs of `state` that consume `token`: explicit token arcs if any,
    /// otherwise the sigma arcs.
    pub fn matching_arcs(&self, state: StateId, token: TokenId) -> impl Iterator<Item = &Arc> {
        let arcs = &self.arcs[state];
        let explicit = arcs.iter().any(|a| a.label == ArcLabel::Token(token));
        arcs.iter().filter(move |a| {
            if explicit {
                a.label == ArcLabel::Token(token)
            } else {
                a.label == ArcLabel::Sigma
            }
        })
    }

    /// Cheapest cost of accepting `tokens`, or `None` when rejected.
    pub fn string_cost(&self, tokens: &[TokenId]) -> Option<f64> {
        let mut current = epsilon_closure(self, &HashMap::from([(self.start, 0.0)]));
        for &t in tokens {
            let mut next: HashMap<StateId, f64> = HashMap::new();
            for (&s, &c) in &current {
                for a in self.matching_arcs(s, t) {
                    let cost = c + a.weight.value();
                    let e = next.entry(a.next).or_insert(f64::INFINITY);
                    if cost < *e {
                        *e = cost;
                    }
                }
            }
            if next.is_empty() {
                return None;
            }
            current = epsilon_closure(self, &next);
        }
        current
            .iter()
            .filter(|(&s, _)| self.is_final(s))
            .map(|(&s, &c)| c + self.final_weight(s).value())
            .min_by(f64::total_cmp)
    }

    pub fn accepts(&self, tokens: &[TokenId]) -> bool {
        self.string_cost(tokens).is_some()
    }

    /// Removes states that are unreachable from the start or cannot reach a
    /// final state. Surviving states keep their relative order. An automaton
    /// with no accepting path becomes [`Wfsa::empty`].
    pub fn trim(&self) -> Wfsa {
        let n = self.num_states();
        let mut forward = vec![false; n];
        let mut queue = VecDeque::from([self.start]);
        forward[self.start] = true;
        let mut reverse: Vec<Vec<StateId>> = vec![Vec::new(); n];
        while let Some(s) = queue.pop_front() {
            for a in &self.arcs[s] {
                reverse[a.next].push(s);
                if !forward[a.next] {
                    forward[a.next] = true;
                    queue.push_back(a.next);
                }
            }
        }
        let mut backward = vec![false; n];
        let mut queue: VecDeque<StateId> = self.finals().filter(|&s| forward[s]).collect();
        for &s in &queue {
            backward[s] = true;
        }
        while let Some(s) = queue.pop_front() {
            for &p in &reverse[s] {
                if !backward[p] {
                    backward[p] = true;
                    queue.push_back(p);
                }
            }
        }
        if !backward[self.start] {
            return Wfsa::empty();
        }
        let mut remap = vec![usize::MAX; n];
        let mut count = 0;
        for s in 0..n {
            if forward[s] && backward[s] {
                remap[s] = count;
                count += 1;
            }
        }
        let mut out = Wfsa::with_states(count, remap[self.start]);
        for s in 0..n {
            if remap[s] == usize::MAX {
                continue;
            }
            out.finals[remap[s]] = self.finals[s];
            out.arcs[remap[s]] = self.arcs[s]
                .iter()
                .filter(|a| remap[a.next] != usize::MAX)
                .map(|a| Arc {
                    next: remap[a.next],
                    ..*a
                })
                .collect();
        }
        out
    }

    /// Renders the textual dump format (see [`parse_dump`]).
    pub fn to_dump(&self) -> String {
        dump::render(self)
    }
}

/// Epsilon closure of a weighted state set: every state reachable through
/// epsilon arcs, with the cheapest accumulated cost.
pub(crate) fn epsilon_closure(w: &Wfsa, seeds: &HashMap<StateId, f64>) -> HashMap<StateId, f64> {
    let mut dist = seeds.clone();
    let mut queue: VecDeque<StateId> = seeds.keys().copied().collect();
    while let Some(s) = queue.pop_front() {
        let base = dist[&s];
        for a in &w.arcs[s] {
            if a.label != ArcLabel::Epsilon {
                continue;
            }
            let cost = base + a.weight.value();
            let e = dist.entry(a.next).or_insert(f64::INFINITY);
            if cost < *e {
                *e = cost;
                queue.push_back(a.next);
            }
        }
    }
    dist
}
