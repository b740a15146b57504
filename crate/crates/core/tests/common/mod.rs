//! Reference implementations used as oracles by the integration tests.
//!
//! Everything here is written directly against the raw data (lattice lists,
//! arc lists) and shares no search code with the library: exhaustive path
//! walks, naive subset simulation, closed-form regression, table-filling
//! minimality checks.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use dagfsa::constraints::ConstraintPhrase;
use dagfsa::dag::Dag;
use dagfsa::token::{TokenId, TokenTable};
use dagfsa::wfsa::{Arc, ArcLabel, TropicalWeight, Wfsa};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SOW: &str = "\u{2581}";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ids(v: &[u32]) -> Vec<TokenId> {
    v.iter().map(|&i| TokenId(i)).collect()
}

pub fn phrase(v: &[u32]) -> ConstraintPhrase {
    ConstraintPhrase::from_tokens(ids(v)).unwrap()
}

pub fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn normalized(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn distinct(rng: &mut ChaCha8Rng, pool: usize, k: usize) -> Vec<usize> {
    let mut picked = BTreeSet::new();
    while picked.len() < k {
        picked.insert(rng.random_range(0..pool));
    }
    picked.into_iter().collect()
}

/// Random lattice with `2..=max_vertices` vertices and 1 to `max_degree`
/// emissions and successors per vertex, drawn over tokens `first_token..`
/// `first_token + vocab`.
pub fn random_dag(seed: u64, max_vertices: usize, max_degree: usize, first_token: u32, vocab: usize) -> Dag {
    let mut r = rng(seed);
    let n = r.random_range(2..=max_vertices);
    let mut emissions = Vec::new();
    let mut transitions = Vec::new();
    for u in 0..n {
        let k = r.random_range(1..=max_degree.min(vocab));
        let toks = distinct(&mut r, vocab, k);
        let ps = normalized(&mut r, k);
        emissions.push(
            toks.iter()
                .zip(ps)
                .map(|(&t, p)| (TokenId(first_token + t as u32), p.ln()))
                .collect(),
        );
        if u == n - 1 {
            transitions.push(vec![]);
            continue;
        }
        let k = r.random_range(1..=max_degree.min(n - 1 - u));
        let targets = distinct(&mut r, n - 1 - u, k);
        let ps = normalized(&mut r, k);
        transitions.push(targets.iter().zip(ps).map(|(&o, p)| (u + 1 + o, p.ln())).collect());
    }
    Dag::new(emissions, transitions).unwrap()
}

/// Every full path of the lattice: a token chosen at each non-final vertex
/// on the way from vertex 0 to the final vertex. Cost per step is
/// `-(log P + log E)`.
pub fn all_dag_paths(dag: &Dag) -> Vec<(Vec<TokenId>, f64)> {
    fn walk(dag: &Dag, u: usize, prefix: &mut Vec<TokenId>, cost: f64, out: &mut Vec<(Vec<TokenId>, f64)>) {
        if u == dag.final_vertex() {
            out.push((prefix.clone(), cost));
            return;
        }
        for &(t, lp_e) in dag.emissions(u) {
            for &(v, lp_t) in dag.transitions(u) {
                prefix.push(t);
                walk(dag, v, prefix, cost + (0.0 - (lp_e + lp_t)), out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(dag, 0, &mut Vec::new(), 0.0, &mut out);
    out
}

/// Cheapest full lattice path; ties go to the lexicographically smaller
/// token sequence.
pub fn best_dag_path(dag: &Dag) -> (Vec<TokenId>, f64) {
    all_dag_paths(dag)
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .unwrap()
}

/// Random acyclic automaton with up to `max_states` states. Arcs go from
/// lower to higher state numbers before a random renumbering, so the result
/// is acyclic but generally not topologically numbered.
pub fn random_acyclic_wfsa(seed: u64, max_states: usize, alphabet: u32, with_epsilons: bool) -> Wfsa {
    let mut r = rng(seed);
    let n = r.random_range(2..=max_states);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = r.random_range(0..=i);
        perm.swap(i, j);
    }
    let mut w = Wfsa::with_states(n, perm[0]);
    for i in 0..n {
        for j in i + 1..n {
            let arcs = r.random_range(0..3usize);
            for _ in 0..arcs {
                let label = if with_epsilons && r.random_range(0..4) == 0 {
                    ArcLabel::Epsilon
                } else {
                    ArcLabel::Token(TokenId(r.random_range(0..alphabet)))
                };
                let cost = (r.random_range(0..3000u32) as f64) / 1000.0;
                w.add_arc(perm[i], Arc::new(label, cost, perm[j]));
            }
        }
    }
    w.set_final(perm[n - 1], TropicalWeight::ONE);
    for i in 1..n - 1 {
        if r.random_range(0..4) == 0 {
            w.set_final(perm[i], TropicalWeight::ONE);
        }
    }
    w
}

/// One accepting path: the tokens it spells, its arc count and its cost
/// (final weight included).
#[derive(Debug, Clone)]
pub struct RawPath {
    pub tokens: Vec<TokenId>,
    pub arcs: usize,
    pub cost: f64,
}

/// All accepting paths of an acyclic automaton, by exhaustive DFS.
pub fn all_paths(w: &Wfsa) -> Vec<RawPath> {
    fn walk(w: &Wfsa, s: usize, toks: &mut Vec<TokenId>, arcs: usize, cost: f64, out: &mut Vec<RawPath>) {
        if w.is_final(s) {
            out.push(RawPath {
                tokens: toks.clone(),
                arcs,
                cost: cost + w.final_weight(s).value(),
            });
        }
        for a in w.arcs(s) {
            match a.label {
                ArcLabel::Token(t) => {
                    toks.push(t);
                    walk(w, a.next, toks, arcs + 1, cost + a.weight.value(), out);
                    toks.pop();
                }
                ArcLabel::Epsilon => walk(w, a.next, toks, arcs + 1, cost + a.weight.value(), out),
                ArcLabel::Sigma => panic!("path oracle does not expand wildcards"),
            }
        }
    }
    let mut out = Vec::new();
    walk(w, w.start(), &mut Vec::new(), 0, 0.0, &mut out);
    out
}

/// String to cheapest cost over all accepting paths of an acyclic automaton.
pub fn language_costs(w: &Wfsa) -> BTreeMap<Vec<TokenId>, f64> {
    let mut out: BTreeMap<Vec<TokenId>, f64> = BTreeMap::new();
    for p in all_paths(w) {
        let e = out.entry(p.tokens).or_insert(f64::INFINITY);
        if p.cost < *e {
            *e = p.cost;
        }
    }
    out
}

/// `min cost` over accepting paths with exactly `l` arcs, `l = 0..=max`.
pub fn length_bucketed_minima(w: &Wfsa, max: usize) -> Vec<f64> {
    let mut best = vec![f64::INFINITY; max + 1];
    for p in all_paths(w) {
        if p.arcs <= max && p.cost < best[p.arcs] {
            best[p.arcs] = p.cost;
        }
    }
    best
}

pub fn maps_match(a: &BTreeMap<Vec<TokenId>, f64>, b: &BTreeMap<Vec<TokenId>, f64>, tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|((ka, va), (kb, vb))| ka == kb && (va - vb).abs() <= tol)
}

/// Random unweighted automaton with cycles and epsilon arcs.
pub fn random_nfa(seed: u64, states: usize, alphabet: u32) -> Wfsa {
    let mut r = rng(seed);
    let mut w = Wfsa::with_states(states, 0);
    for s in 0..states {
        let arcs = r.random_range(1..=4usize);
        for _ in 0..arcs {
            let label = if r.random_range(0..5) == 0 {
                ArcLabel::Epsilon
            } else {
                ArcLabel::Token(TokenId(r.random_range(0..alphabet)))
            };
            w.add_arc(s, Arc::new(label, 0.0, r.random_range(0..states)));
        }
    }
    let mut any = false;
    for s in 0..states {
        if r.random_range(0..3) == 0 {
            w.set_final(s, TropicalWeight::ONE);
            any = true;
        }
    }
    if !any {
        w.set_final(states - 1, TropicalWeight::ONE);
    }
    w
}

fn eps_close(w: &Wfsa, set: &mut BTreeSet<usize>) {
    let mut stack: Vec<usize> = set.iter().copied().collect();
    while let Some(s) = stack.pop() {
        for a in w.arcs(s) {
            if a.label == ArcLabel::Epsilon && set.insert(a.next) {
                stack.push(a.next);
            }
        }
    }
}

/// Membership by naive subset simulation. A wildcard arc fires only when
/// its state has no explicit arc for the token.
pub fn nfa_accepts(w: &Wfsa, tokens: &[TokenId]) -> bool {
    let mut cur = BTreeSet::from([w.start()]);
    eps_close(w, &mut cur);
    for &t in tokens {
        let mut next = BTreeSet::new();
        for &s in &cur {
            let explicit: Vec<usize> = w
                .arcs(s)
                .iter()
                .filter(|a| a.label == ArcLabel::Token(t))
                .map(|a| a.next)
                .collect();
            if explicit.is_empty() {
                next.extend(w.arcs(s).iter().filter(|a| a.label == ArcLabel::Sigma).map(|a| a.next));
            } else {
                next.extend(explicit);
            }
        }
        eps_close(w, &mut next);
        cur = next;
        if cur.is_empty() {
            return false;
        }
    }
    cur.iter().any(|&s| w.is_final(s))
}

/// Every string over `alphabet` of length at most `max_len`.
pub fn all_strings(alphabet: &[TokenId], max_len: usize) -> Vec<Vec<TokenId>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &layer {
            for &t in alphabet {
                let mut e: Vec<TokenId> = s.clone();
                e.push(t);
                next.push(e);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

pub fn contains_phrase(haystack: &[TokenId], needle: &[TokenId]) -> bool {
    needle.is_empty() || haystack.windows(needle.len()).any(|w| w == needle)
}

/// Number of Myhill-Nerode classes among the states of a deterministic,
/// token-only automaton, completed with a dead state, by table filling.
pub fn equivalence_classes(w: &Wfsa, alphabet: &[TokenId]) -> usize {
    let n = w.num_states() + 1;
    let dead = n - 1;
    let delta = |s: usize, t: TokenId| -> usize {
        if s == dead {
            return dead;
        }
        w.arcs(s)
            .iter()
            .find(|a| a.label == ArcLabel::Token(t))
            .map_or(dead, |a| a.next)
    };
    let fin = |s: usize| s != dead && w.is_final(s);
    let mut distinct = vec![vec![false; n]; n];
    for p in 0..n {
        for q in 0..n {
            distinct[p][q] = fin(p) != fin(q);
        }
    }
    loop {
        let mut changed = false;
        for p in 0..n {
            for q in 0..n {
                if !distinct[p][q] && alphabet.iter().any(|&t| distinct[delta(p, t)][delta(q, t)]) {
                    distinct[p][q] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut reps: Vec<usize> = Vec::new();
    for p in 0..n {
        if !reps.iter().any(|&r| !distinct[p][r]) {
            reps.push(p);
        }
    }
    reps.len()
}

/// Ordinary least squares through the 2x2 normal equations.
pub fn ols_normal_equations(pairs: &[(f64, f64)]) -> (f64, f64) {
    let n = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|p| p.0).sum();
    let sy: f64 = pairs.iter().map(|p| p.1).sum();
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    let det = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    (slope, intercept)
}

/// Corpus brevity penalty as in standard BLEU scripts: closest reference
/// length per sentence (shorter wins ties), summed.
pub fn reference_bp(hyp_lens: &[usize], ref_lens: &[Vec<usize>]) -> f64 {
    let mut c = 0usize;
    let mut r = 0usize;
    for (h, refs) in hyp_lens.iter().zip(ref_lens) {
        c += h;
        let mut best = refs[0];
        for &x in refs {
            let d = (x as i64 - *h as i64).abs();
            let bd = (best as i64 - *h as i64).abs();
            if d < bd || (d == bd && x < best) {
                best = x;
            }
        }
        r += best;
    }
    if c >= r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    }
}

/// Independent unigram count: strip non-alphanumeric edges, drop words
/// with digits, sort by count then word, cut at the cumulative share.
pub fn count_lexicon(corpus: &[&str], cutoff: f64) -> Vec<String> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut total = 0u64;
    for line in corpus {
        for raw in line.split(' ') {
            let chars: Vec<char> = raw.chars().collect();
            let mut a = 0;
            let mut b = chars.len();
            while a < b && !chars[a].is_alphanumeric() {
                a += 1;
            }
            while b > a && !chars[b - 1].is_alphanumeric() {
                b -= 1;
            }
            let w: String = chars[a..b].iter().collect();
            if w.is_empty() || w.chars().any(|c| c.is_numeric()) {
                continue;
            }
            *counts.entry(w).or_default() += 1;
            total += 1;
        }
    }
    let mut v: Vec<(String, u64)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut out = Vec::new();
    let mut acc = 0u64;
    for (w, c) in v {
        out.push(w);
        acc += c;
        if acc as f64 >= cutoff * total as f64 {
            break;
        }
    }
    out
}

/// Word-level token table: `<s>`, `</s>`, punctuation, digits `0`-`9`, the
/// bare mark, then `▁word` for each word.
pub fn word_table(words: &[&str]) -> TokenTable {
    let mut surfaces: Vec<String> = vec!["<s>".into(), "</s>".into(), ".".into(), ",".into(), ":".into()];
    for d in 0..10 {
        surfaces.push(d.to_string());
        surfaces.push(format!("{SOW}{d}"));
    }
    surfaces.push(SOW.into());
    for w in words {
        surfaces.push(format!("{SOW}{w}"));
    }
    TokenTable::new(surfaces, SOW, TokenId(0), TokenId(1)).unwrap()
}

pub fn word_id(table: &TokenTable, word: &str) -> TokenId {
    table.id(&format!("{SOW}{word}")).unwrap()
}

/// Lattice with a planted path: vertex `i` of the chain emits `planted[i]`
/// (with probability `planted_p`) next to random distractors, and every
/// vertex also has random forward shortcuts. The planted chain
/// `0 → 1 → … → n` is always kept by top-3 pruning.
pub fn planted_dag(seed: u64, planted: &[TokenId], distractors: &[TokenId], planted_p: f64) -> Dag {
    let mut r = rng(seed);
    let n = planted.len() + 1;
    let mut emissions = Vec::new();
    let mut transitions = Vec::new();
    for (u, &tok) in planted.iter().enumerate() {
        let mut ems = vec![(tok, planted_p)];
        let mut rest = 1.0 - planted_p;
        let others: Vec<TokenId> = distractors.iter().copied().filter(|&d| d != tok).collect();
        let k = 2.min(others.len());
        for (i, idx) in distinct(&mut r, others.len(), k).into_iter().enumerate() {
            let p = if i + 1 == k { rest } else { rest * r.random_range(0.3..0.7) };
            rest -= p;
            ems.push((others[idx], p));
        }
        emissions.push(ems.into_iter().map(|(t, p)| (t, p.ln())).collect());
        let mut succ = vec![(u + 1, r.random_range(0.3..0.6))];
        if u + 2 < n {
            let extra = r.random_range(u + 2..n);
            succ.push((extra, 0.0));
        }
        let total: f64 = if succ.len() == 2 {
            succ[1].1 = 1.0 - succ[0].1;
            1.0
        } else {
            succ[0].1 = 1.0;
            1.0
        };
        debug_assert!((succ.iter().map(|s| s.1).sum::<f64>() - total).abs() < 1e-12);
        transitions.push(succ.into_iter().map(|(v, p)| (v, f64::ln(p))).collect());
    }
    emissions.push(vec![(TokenId(1), 0.0)]);
    transitions.push(vec![]);
    Dag::new(emissions, transitions).unwrap()
}

/// An evaluation corpus with known errors, and the counts planted into it.
pub struct PlantedCorpus {
    pub records: Vec<dagfsa::metrics::EvalRecord>,
    pub vocabulary: Vec<String>,
    pub slots: usize,
    pub missing_slots: usize,
    pub records_with_values: usize,
    pub records_missing: usize,
    pub oov_records: usize,
    pub output_lengths: Vec<usize>,
    pub reference_lengths: Vec<Vec<usize>>,
}

const EVAL_WORDS: &[&str] = &["the", "hotel", "is", "in", "cheap", "area", "north", "room", "a", "Its", "free", "wifi"];
const EVAL_VALUES: &[&str] = &["555-1234", "Hong Kong", "12:30", "Lan Hong House", "Cityroomz", "CB2 1TQ"];
const EVAL_NEOLOGISMS: &[&str] = &["Cambrige", "hotell", "nortth"];

/// `n` records. Each record draws up to three values and drops some of
/// them from its output; `oov` records get one invented word. Every count
/// is tallied while the corpus is built.
pub fn planted_eval_corpus(seed: u64, n: usize, oov: usize) -> PlantedCorpus {
    use dagfsa::metrics::EvalRecord;
    let mut r = rng(seed);
    let oov_at: BTreeSet<usize> = distinct(&mut r, n, oov.min(n)).into_iter().collect();
    let mut c = PlantedCorpus {
        records: Vec::new(),
        vocabulary: EVAL_WORDS.iter().map(|w| w.to_string()).collect(),
        slots: 0,
        missing_slots: 0,
        records_with_values: 0,
        records_missing: 0,
        oov_records: oov_at.len(),
        output_lengths: Vec::new(),
        reference_lengths: Vec::new(),
    };
    for i in 0..n {
        let mut words: Vec<String> = (0..r.random_range(3..9))
            .map(|_| EVAL_WORDS[r.random_range(0..EVAL_WORDS.len())].to_string())
            .collect();
        if r.random_range(0..3) == 0 {
            words.push(r.random_range(1..500u32).to_string());
        }
        let k = r.random_range(0..4usize);
        let values: Vec<String> = distinct(&mut r, EVAL_VALUES.len(), k)
            .into_iter()
            .map(|j| EVAL_VALUES[j].to_string())
            .collect();
        let mut missing = 0;
        for v in &values {
            if r.random_range(0..4) == 0 {
                missing += 1;
            } else {
                let at = r.random_range(0..=words.len());
                words.insert(at, v.clone());
            }
        }
        if oov_at.contains(&i) {
            let at = r.random_range(0..=words.len());
            words.insert(at, format!("{},", EVAL_NEOLOGISMS[r.random_range(0..EVAL_NEOLOGISMS.len())]));
        }
        if let Some(last) = words.last_mut() {
            last.push('.');
        }
        let output = words.join(" ");
        let refs: Vec<String> = (0..r.random_range(1..4))
            .map(|_| vec!["ref"; r.random_range(3..22)].join(" "))
            .collect();
        c.slots += values.len();
        c.missing_slots += missing;
        c.records_with_values += usize::from(!values.is_empty());
        c.records_missing += usize::from(missing > 0);
        c.output_lengths.push(output.split(' ').count());
        c.reference_lengths.push(refs.iter().map(|s| s.split(' ').count()).collect());
        c.records.push(EvalRecord {
            output,
            required_values: values,
            references: refs,
        });
    }
    c
}
