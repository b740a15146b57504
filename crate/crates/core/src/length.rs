//! Target-length prediction and length-constrained decoding.
//!
//! `dfs_viterbi` computes `δ(u, l)`, the cheapest cost of reaching a final
//! state from `u` with exactly `l` more arcs, by memoized depth-first search
//! from the start state. Each state explores only the cheapest out-arcs whose
//! renormalized probability mass first exceeds `p`. Candidates of every
//! length compete on `LP(l) × δ(start, l)`.

use std::cmp::Ordering;

use thiserror::Error;

use crate::token::TokenId;
use crate::wfsa::{topological_order, ArcLabel, StateId, Wfsa, WfsaError};

/// Slack applied before rounding predictions up, so a fit that lands a hair
/// above an integer does not add a whole token.
const CEIL_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum LengthError {
    #[error("need at least 2 (input, output) pairs, got {0}")]
    TooFewPairs(usize),
    #[error("degenerate regression: all input lengths are equal")]
    DegenerateRegression,
    #[error("non-finite value in regression data")]
    NonFinite,
    #[error("invalid length config: {0}")]
    Config(String),
    #[error("predictor file: {0}")]
    PredictorFile(String),
    #[error(transparent)]
    Wfsa(#[from] WfsaError),
}

/// `L_tgt = ⌈slope · x + intercept⌉`, clamped to at least 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthPredictor {
    pub slope: f64,
    pub intercept: f64,
}

impl LengthPredictor {
    /// Ordinary least squares fit of `y = slope · x + intercept`.
    pub fn fit(pairs: &[(f64, f64)]) -> Result<Self, LengthError> {
        if pairs.len() < 2 {
            return Err(LengthError::TooFewPairs(pairs.len()));
        }
        if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(LengthError::NonFinite);
        }
        let n = pairs.len() as f64;
        let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for &(x, y) in pairs {
            sxx += (x - mean_x) * (x - mean_x);
            sxy += (x - mean_x) * (y - mean_y);
        }
        if sxx == 0.0 || pairs.iter().all(|p| p.0 == pairs[0].0) {
            return Err(LengthError::DegenerateRegression);
        }
        let slope = sxy / sxx;
        Ok(LengthPredictor {
            slope,
            intercept: mean_y - slope * mean_x,
        })
    }

    pub fn predict(&self, input_len: usize) -> usize {
        let raw = self.slope * input_len as f64 + self.intercept;
        let up = (raw - CEIL_SLACK).ceil();
        if up.is_nan() || up < 1.0 {
            1
        } else {
            up as usize
        }
    }

    /// Two lines: slope, then intercept.
    pub fn to_text(&self) -> String {
        format!("{}\n{}\n", self.slope, self.intercept)
    }

    pub fn parse(text: &str) -> Result<Self, LengthError> {
        let bad = |m: String| LengthError::PredictorFile(m);
        let values: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let [slope, intercept] = values[..] else {
            return Err(bad(format!("expected 2 lines, got {}", values.len())));
        };
        let num = |s: &str| -> Result<f64, LengthError> {
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(bad(format!("bad number {s:?}"))),
            }
        };
        Ok(LengthPredictor {
            slope: num(slope)?,
            intercept: num(intercept)?,
        })
    }
}

/// `exp(A · (L_tgt / l − 1))` below the target, 1 from the target on.
pub fn length_penalty(l: usize, target: usize, strictness: f64) -> f64 {
    if l < target {
        (strictness * (target as f64 / l as f64 - 1.0)).exp()
    } else {
        1.0
    }
}

/// `min(L_tgt + 5, ⌊1.5 · L_tgt⌋)`.
pub fn default_upper_bound(target: usize) -> usize {
    (target + 5).min(target * 3 / 2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcConfig {
    pub target_length: usize,
    pub strictness: f64,
    pub edge_prune_p: f64,
    pub upper_bound: usize,
}

impl LcConfig {
    pub fn new(target_length: usize, strictness: f64, edge_prune_p: f64) -> Result<Self, LengthError> {
        LcConfig {
            target_length,
            strictness,
            edge_prune_p,
            upper_bound: default_upper_bound(target_length),
        }
        .validated()
    }

    pub fn with_upper_bound(self, upper_bound: usize) -> Result<Self, LengthError> {
        LcConfig { upper_bound, ..self }.validated()
    }

    fn validated(self) -> Result<Self, LengthError> {
        let bad = |m: String| Err(LengthError::Config(m));
        if self.target_length == 0 {
            return bad("target length must be positive".into());
        }
        if !(self.strictness >= 0.0 && self.strictness.is_finite()) {
            return bad(format!("strictness must be >= 0, got {}", self.strictness));
        }
        if !(self.edge_prune_p > 0.0 && self.edge_prune_p <= 1.0) {
            return bad(format!("edge prune threshold must be in (0, 1], got {}", self.edge_prune_p));
        }
        if self.upper_bound == 0 {
            return bad("upper bound must be positive".into());
        }
        Ok(self)
    }
}

/// Winning candidate of a length-constrained decode.
#[derive(Debug, Clone, PartialEq)]
pub struct LcPath {
    pub tokens: Vec<TokenId>,
    pub length: usize,
    pub raw_cost: f64,
    pub penalty: f64,
    pub adjusted_cost: f64,
}

/// Lengths of the shortest and longest accepting paths in the automaton
/// (before arc pruning), reported when no candidate fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Infeasible {
    pub upper_bound: usize,
    pub shortest_accepting: Option<usize>,
    pub longest_accepting: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LcOutcome {
    Found(LcPath),
    Infeasible(Infeasible),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiReport {
    pub outcome: LcOutcome,
    /// `δ(start, l)` for `l = 0..=upper_bound`; infinite when no path of
    /// that length survives pruning.
    pub delta_start: Vec<f64>,
    /// Number of `(state, l)` entries the search filled in.
    pub memo_entries: usize,
}

impl ViterbiReport {
    pub fn best(&self) -> Option<&LcPath> {
        match &self.outcome {
            LcOutcome::Found(p) => Some(p),
            LcOutcome::Infeasible(_) => None,
        }
    }
}

/// Indices of the cheapest out-arcs whose renormalized probability mass
/// first exceeds `p` (all arcs when `p >= 1`). Equal costs keep arc order.
pub fn pruned_arcs(w: &Wfsa, state: StateId, p: f64) -> Vec<usize> {
    let arcs = w.arcs(state);
    let mut order: Vec<usize> = (0..arcs.len()).collect();
    order.sort_by(|&a, &b| {
        arcs[a]
            .weight
            .value()
            .total_cmp(&arcs[b].weight.value())
            .then(arcs[a].label.cmp(&arcs[b].label))
            .then(arcs[a].next.cmp(&arcs[b].next))
    });
    if p >= 1.0 || order.is_empty() {
        return order;
    }
    let min = arcs[order[0]].weight.value();
    let mass: Vec<f64> = order
        .iter()
        .map(|&i| (min - arcs[i].weight.value()).exp())
        .collect();
    let total: f64 = mass.iter().sum();
    let mut cumulative = 0.0;
    for (k, m) in mass.iter().enumerate() {
        cumulative += m / total;
        if cumulative > p {
            order.truncate(k + 1);
            break;
        }
    }
    order
}

fn check_input(w: &Wfsa) -> Result<(), LengthError> {
    for s in 0..w.num_states() {
        for a in w.arcs(s) {
            match a.label {
                ArcLabel::Epsilon => return Err(WfsaError::HasEpsilon(s).into()),
                ArcLabel::Sigma => return Err(WfsaError::WildcardOnPath(s).into()),
                ArcLabel::Token(_) => {}
            }
        }
    }
    topological_order(w)?;
    Ok(())
}

struct Table {
    width: usize,
    delta: Vec<f64>,
    // arc index into `w.arcs(state)`, or NONE
    choice: Vec<u32>,
    done: Vec<bool>,
    filled: usize,
}

const NONE: u32 = u32::MAX;

impl Table {
    fn idx(&self, s: StateId, l: usize) -> usize {
        s * self.width + l
    }
}

/// Fills `δ(s, l)` for everything reachable from `(root, l_root)`, using an
/// explicit stack so deep automata cannot overflow the call stack.
fn solve(w: &Wfsa, pruned: &mut [Option<Vec<usize>>], p: f64, t: &mut Table, root: StateId, l_root: usize) {
    struct Frame {
        state: StateId,
        l: usize,
        cursor: usize,
        best: f64,
        choice: u32,
    }
    if t.done[t.idx(root, l_root)] {
        return;
    }
    let mut stack = vec![Frame {
        state: root,
        l: l_root,
        cursor: 0,
        best: f64::INFINITY,
        choice: NONE,
    }];
    while let Some(frame) = stack.last_mut() {
        let (s, l) = (frame.state, frame.l);
        if l == 0 {
            let i = t.idx(s, 0);
            t.delta[i] = w.final_weight(s).value();
            t.done[i] = true;
            t.filled += 1;
            stack.pop();
            continue;
        }
        let arcs = pruned[s].get_or_insert_with(|| pruned_arcs(w, s, p));
        let mut pending = None;
        while frame.cursor < arcs.len() {
            let ai = arcs[frame.cursor];
            let a = &w.arcs(s)[ai];
            let ci = t.idx(a.next, l - 1);
            if !t.done[ci] {
                pending = Some(a.next);
                break;
            }
            let cost = a.weight.value() + t.delta[ci];
            let better = cost < frame.best
                || (cost == frame.best
                    && frame.choice != NONE
                    && tie_prefers(w, s, ai, frame.choice as usize));
            if better {
                frame.best = cost;
                frame.choice = ai as u32;
            }
            frame.cursor += 1;
        }
        if let Some(next) = pending {
            stack.push(Frame {
                state: next,
                l: l - 1,
                cursor: 0,
                best: f64::INFINITY,
                choice: NONE,
            });
            continue;
        }
        let i = t.idx(s, l);
        t.delta[i] = frame.best;
        t.choice[i] = if frame.best.is_finite() { frame.choice } else { NONE };
        t.done[i] = true;
        t.filled += 1;
        stack.pop();
    }
}

// Among equal-cost arcs prefer the smaller label, then the smaller successor.
fn tie_prefers(w: &Wfsa, s: StateId, candidate: usize, incumbent: usize) -> bool {
    let (a, b) = (&w.arcs(s)[candidate], &w.arcs(s)[incumbent]);
    (a.label, a.next) < (b.label, b.next)
}

fn backtrack(w: &Wfsa, t: &Table, mut s: StateId, l: usize) -> Vec<TokenId> {
    let mut tokens = Vec::with_capacity(l);
    for rem in (1..=l).rev() {
        let a = &w.arcs(s)[t.choice[t.idx(s, rem)] as usize];
        if let ArcLabel::Token(tok) = a.label {
            tokens.push(tok);
        }
        s = a.next;
    }
    tokens
}

/// Shortest and longest accepting path lengths, by longest/shortest path
/// over the topological order.
fn accepting_length_range(w: &Wfsa) -> Result<(Option<usize>, Option<usize>), LengthError> {
    let order = topological_order(w)?;
    let n = w.num_states();
    let mut lo = vec![usize::MAX; n];
    let mut hi: Vec<Option<usize>> = vec![None; n];
    for &s in order.iter().rev() {
        if w.is_final(s) {
            lo[s] = 0;
            hi[s] = Some(0);
        }
        for a in w.arcs(s) {
            if lo[a.next] != usize::MAX {
                lo[s] = lo[s].min(lo[a.next] + 1);
            }
            if let Some(h) = hi[a.next] {
                hi[s] = Some(hi[s].map_or(h + 1, |x| x.max(h + 1)));
            }
        }
    }
    let st = w.start();
    Ok(((lo[st] != usize::MAX).then_some(lo[st]), hi[st]))
}

/// Length-constrained decode of an epsilon-free acyclic automaton.
///
/// Among `l = 1..=upper_bound` the winner minimizes `LP(l) × δ(start, l)`;
/// ties go to the larger `l`, then to the lexicographically smaller token
/// sequence.
pub fn dfs_viterbi(w: &Wfsa, cfg: &LcConfig) -> Result<ViterbiReport, LengthError> {
    check_input(w)?;
    let upper = cfg.upper_bound;
    let width = upper + 1;
    let cells = w
        .num_states()
        .checked_mul(width)
        .ok_or_else(|| LengthError::Config("length table too large".into()))?;
    let mut t = Table {
        width,
        delta: vec![f64::INFINITY; cells],
        choice: vec![NONE; cells],
        done: vec![false; cells],
        filled: 0,
    };
    let mut pruned: Vec<Option<Vec<usize>>> = vec![None; w.num_states()];
    let start = w.start();
    let mut delta_start = vec![f64::INFINITY; width];
    for (l, d) in delta_start.iter_mut().enumerate() {
        solve(w, &mut pruned, cfg.edge_prune_p, &mut t, start, l);
        *d = t.delta[t.idx(start, l)];
    }

    let mut best: Option<LcPath> = None;
    for l in 1..=upper {
        let raw = delta_start[l];
        if !raw.is_finite() {
            continue;
        }
        let penalty = length_penalty(l, cfg.target_length, cfg.strictness);
        let cand = LcPath {
            tokens: backtrack(w, &t, start, l),
            length: l,
            raw_cost: raw,
            penalty,
            adjusted_cost: penalty * raw,
        };
        let wins = match &best {
            None => true,
            Some(b) => match cand.adjusted_cost.total_cmp(&b.adjusted_cost) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => {
                    cand.length > b.length || (cand.length == b.length && cand.tokens < b.tokens)
                }
            },
        };
        if wins {
            best = Some(cand);
        }
    }
    let outcome = match best {
        Some(p) => LcOutcome::Found(p),
        None => {
            let (shortest_accepting, longest_accepting) = accepting_length_range(w)?;
            LcOutcome::Infeasible(Infeasible {
                upper_bound: upper,
                shortest_accepting,
                longest_accepting,
            })
        }
    };
    Ok(ViterbiReport {
        outcome,
        delta_start,
        memo_entries: t.filled,
    })
}
