//! Directed acyclic token lattices.
//!
//! A [`Dag`] has vertices `0..L`. Vertex `0` is the start and vertex `L-1`
//! the unique final vertex. Each vertex carries a sparse emission
//! distribution over tokens and a sparse distribution over forward
//! successors, both stored as natural-log probabilities.

use std::collections::{BTreeSet, HashSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::ConstraintPhrase;
use crate::token::{TokenId, TokenTable};

/// Current version of the JSON lattice format.
pub const DAG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum DagError {
    #[error("malformed DAG document: {0}")]
    Json(String),
    #[error("unsupported DAG format version {0}")]
    Version(u32),
    #[error("DAG must have at least one vertex")]
    Empty,
    #[error("num_vertices is {declared} but {found} vertices are listed")]
    VertexCount { declared: usize, found: usize },
    #[error("vertex {from}: backward edge to {to}")]
    BackwardEdge { from: usize, to: usize },
    #[error("vertex {vertex}: self edge")]
    SelfEdge { vertex: usize },
    #[error("vertex {vertex}: transition to missing vertex {target}")]
    DanglingTarget { vertex: usize, target: usize },
    #[error("vertex {vertex}: log-probability {value} is positive or not finite")]
    BadLogProb { vertex: usize, value: f64 },
    #[error("vertex {vertex}: token {token} listed twice")]
    DuplicateEmission { vertex: usize, token: TokenId },
    #[error("vertex {vertex}: successor {target} listed twice")]
    DuplicateTransition { vertex: usize, target: usize },
    #[error("vertex {vertex}: final vertex has outgoing transitions")]
    FinalHasTransitions { vertex: usize },
    #[error("vertex {vertex}: no outgoing transitions (only the last vertex may be terminal)")]
    ExtraTerminal { vertex: usize },
    #[error("vertex {vertex}: no emissions")]
    NoEmissions { vertex: usize },
    #[error("vertex {vertex}: token {token} is outside the token table")]
    UnknownToken { vertex: usize, token: TokenId },
    #[error("vertex {vertex}: {what} probabilities sum to {sum}")]
    NotNormalized {
        vertex: usize,
        what: &'static str,
        sum: f64,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// A token lattice. Immutable once built; construct through [`Dag::new`]
/// or [`load_dag`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    emissions: Vec<Vec<(TokenId, f64)>>,
    transitions: Vec<Vec<(usize, f64)>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DagDoc {
    #[serde(default = "default_version")]
    version: u32,
    num_vertices: usize,
    vertices: Vec<VertexDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexDoc {
    #[serde(default)]
    emissions: Vec<(u32, f64)>,
    #[serde(default)]
    transitions: Vec<(usize, f64)>,
}

fn default_version() -> u32 {
    DAG_FORMAT_VERSION
}

fn by_desc_logprob<K: Ord + Copy>(a: &(K, f64), b: &(K, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

impl Dag {
    /// Validates the lattice and sorts every list by descending
    /// log-probability (ties by smaller id).
    pub fn new(
        mut emissions: Vec<Vec<(TokenId, f64)>>,
        mut transitions: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self, DagError> {
        let len = emissions.len();
        if len == 0 {
            return Err(DagError::Empty);
        }
        if transitions.len() != len {
            return Err(DagError::VertexCount {
                declared: len,
                found: transitions.len(),
            });
        }
        let last = len - 1;
        for u in 0..len {
            let mut seen = HashSet::new();
            for &(t, lp) in &emissions[u] {
                check_logprob(u, lp)?;
                if !seen.insert(t) {
                    return Err(DagError::DuplicateEmission { vertex: u, token: t });
                }
            }
            let mut seen = HashSet::new();
            for &(v, lp) in &transitions[u] {
                if v == u {
                    return Err(DagError::SelfEdge { vertex: u });
                }
                if v < u {
                    return Err(DagError::BackwardEdge { from: u, to: v });
                }
                if v >= len {
                    return Err(DagError::DanglingTarget { vertex: u, target: v });
                }
                check_logprob(u, lp)?;
                if !seen.insert(v) {
                    return Err(DagError::DuplicateTransition { vertex: u, target: v });
                }
            }
            if u == last {
                if !transitions[u].is_empty() {
                    return Err(DagError::FinalHasTransitions { vertex: u });
                }
            } else {
                if transitions[u].is_empty() {
                    return Err(DagError::ExtraTerminal { vertex: u });
                }
                if emissions[u].is_empty() {
                    return Err(DagError::NoEmissions { vertex: u });
                }
            }
            emissions[u].sort_by(by_desc_logprob);
            transitions[u].sort_by(by_desc_logprob);
        }
        Ok(Dag {
            emissions,
            transitions,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.emissions.len()
    }

    pub fn start_vertex(&self) -> usize {
        0
    }

    pub fn final_vertex(&self) -> usize {
        self.emissions.len() - 1
    }

    /// Emissions of `u`, sorted by descending log-probability.
    pub fn emissions(&self, u: usize) -> &[(TokenId, f64)] {
        &self.emissions[u]
    }

    /// Successors of `u`, sorted by descending log-probability.
    pub fn transitions(&self, u: usize) -> &[(usize, f64)] {
        &self.transitions[u]
    }

    pub fn emission_logprob(&self, u: usize, token: TokenId) -> Option<f64> {
        self.emissions[u]
            .iter()
            .find(|(t, _)| *t == token)
            .map(|&(_, lp)| lp)
    }

    /// Predecessor lists, each ascending.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.num_vertices()];
        for u in 0..self.num_vertices() {
            for &(v, _) in &self.transitions[u] {
                preds[v].push(u);
            }
        }
        preds
    }

    /// Checks that emission and transition distributions sum to one within
    /// `tol` in probability space. Only meaningful for unpruned lattices.
    pub fn check_normalized(&self, tol: f64) -> Result<(), DagError> {
        for u in 0..self.num_vertices() {
            if !self.emissions[u].is_empty() {
                let sum: f64 = self.emissions[u].iter().map(|(_, lp)| lp.exp()).sum();
                if (sum - 1.0).abs() > tol {
                    return Err(DagError::NotNormalized {
                        vertex: u,
                        what: "emission",
                        sum,
                    });
                }
            }
            if u != self.final_vertex() {
                let sum: f64 = self.transitions[u].iter().map(|(_, lp)| lp.exp()).sum();
                if (sum - 1.0).abs() > tol {
                    return Err(DagError::NotNormalized {
                        vertex: u,
                        what: "transition",
                        sum,
                    });
                }
            }
        }
        Ok(())
    }

    /// Checks every emitted token against a token table.
    pub fn check_vocab(&self, table: &TokenTable) -> Result<(), DagError> {
        for (u, ems) in self.emissions.iter().enumerate() {
            if let Some(&(t, _)) = ems.iter().find(|(t, _)| t.index() >= table.len()) {
                return Err(DagError::UnknownToken { vertex: u, token: t });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let doc = DagDoc {
            version: DAG_FORMAT_VERSION,
            num_vertices: self.num_vertices(),
            vertices: (0..self.num_vertices())
                .map(|u| VertexDoc {
                    emissions: self.emissions[u].iter().map(|&(t, lp)| (t.0, lp)).collect(),
                    transitions: self.transitions[u].clone(),
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("DAG serialization cannot fail")
    }
}

fn check_logprob(vertex: usize, value: f64) -> Result<(), DagError> {
    if value > 0.0 || !value.is_finite() {
        return Err(DagError::BadLogProb { vertex, value });
    }
    Ok(())
}

/// Parses the JSON lattice format.
pub fn load_dag(source: &[u8]) -> Result<Dag, DagError> {
    let doc: DagDoc = serde_json::from_slice(source).map_err(|e| DagError::Json(e.to_string()))?;
    if doc.version != DAG_FORMAT_VERSION {
        return Err(DagError::Version(doc.version));
    }
    if doc.num_vertices != doc.vertices.len() {
        return Err(DagError::VertexCount {
            declared: doc.num_vertices,
            found: doc.vertices.len(),
        });
    }
    let (emissions, transitions) = doc
        .vertices
        .into_iter()
        .map(|v| {
            (
                v.emissions
                    .into_iter()
                    .map(|(t, lp)| (TokenId(t), lp))
                    .collect(),
                v.transitions,
            )
        })
        .unzip();
    Dag::new(emissions, transitions)
}

/// Likelihood pruning parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneConfig {
    pub k_e: usize,
    pub k_t: usize,
    pub constraints: Vec<ConstraintPhrase>,
}

impl PruneConfig {
    pub fn new(k_e: usize, k_t: usize) -> Result<Self, DagError> {
        if k_e == 0 || k_t == 0 {
            return Err(DagError::Config(format!(
                "pruning degrees must be positive (k_e={k_e}, k_t={k_t})"
            )));
        }
        Ok(PruneConfig {
            k_e,
            k_t,
            constraints: Vec::new(),
        })
    }

    pub fn with_constraints(mut self, constraints: Vec<ConstraintPhrase>) -> Self {
        self.constraints = constraints;
        self
    }
}

/// Tokens that must be kept at `u` so that constraint phrases can continue
/// from a token kept at one of its pruned predecessors: for every phrase
/// token `t_j` other than the last, if some predecessor keeps `t_j`, then
/// `t_{j+1}` is returned.
pub fn force_emit(
    u: usize,
    constraints: &[ConstraintPhrase],
    kept_emissions: &[BTreeSet<TokenId>],
    pruned_predecessors: &[Vec<usize>],
) -> BTreeSet<TokenId> {
    let mut forced = BTreeSet::new();
    for phrase in constraints {
        for pair in phrase.tokens().windows(2) {
            if pruned_predecessors[u]
                .iter()
                .any(|&v| kept_emissions[v].contains(&pair[0]))
            {
                forced.insert(pair[1]);
            }
        }
    }
    forced
}

/// Keeps the `k_e` most likely tokens and `k_t` most likely successors at
/// every vertex, plus force-emitted constraint continuations. Forced tokens
/// the vertex cannot emit at all (absent from its emission list) are
/// skipped. Log-probabilities are kept as-is.
pub fn prune_dag(dag: &Dag, cfg: &PruneConfig) -> Dag {
    let n = dag.num_vertices();
    let transitions: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|u| dag.transitions[u].iter().take(cfg.k_t).copied().collect())
        .collect();
    let mut preds = vec![Vec::new(); n];
    for (u, succ) in transitions.iter().enumerate() {
        for &(v, _) in succ {
            preds[v].push(u);
        }
    }
    let mut kept: Vec<BTreeSet<TokenId>> = vec![BTreeSet::new(); n];
    let mut emissions = Vec::with_capacity(n);
    for u in 0..n {
        let mut ems: Vec<(TokenId, f64)> = dag.emissions[u].iter().take(cfg.k_e).copied().collect();
        if !cfg.constraints.is_empty() {
            for t in force_emit(u, &cfg.constraints, &kept, &preds) {
                if ems.iter().any(|&(k, _)| k == t) {
                    continue;
                }
                if let Some(lp) = dag.emission_logprob(u, t) {
                    ems.push((t, lp));
                }
            }
            ems.sort_by(by_desc_logprob);
        }
        kept[u] = ems.iter().map(|&(t, _)| t).collect();
        emissions.push(ems);
    }
    Dag {
        emissions,
        transitions,
    }
}

/// Parameters of the random lattice generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDagConfig {
    pub num_vertices: usize,
    pub vocab_size: usize,
    pub emission_degree: usize,
    pub transition_degree: usize,
    /// Symmetric Dirichlet concentration; small values give peaked
    /// distributions.
    pub concentration: f64,
}

/// Concentration at which degree-3, 16-vertex lattices have on average
/// about 1.68 transitions above probability 0.2 per non-final vertex, the
/// sparsity observed in trained lattices. Found by sampling 1000 lattices
/// per candidate value.
pub const SPARSE_CONCENTRATION: f64 = 0.64;

impl SyntheticDagConfig {
    pub fn sparse(num_vertices: usize, vocab_size: usize) -> Self {
        SyntheticDagConfig {
            num_vertices,
            vocab_size,
            emission_degree: 3.min(vocab_size),
            transition_degree: 3.min(num_vertices.saturating_sub(1)).max(1),
            concentration: SPARSE_CONCENTRATION,
        }
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, gamma: &Gamma<f64>, n: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..n)
        .map(|_| gamma.sample(rng).max(f64::MIN_POSITIVE))
        .collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

/// Draws a random lattice. Deterministic in `seed`. Each vertex gets
/// `min(transition_degree, L-1-u)` successors chosen among the nearest
/// `2 * transition_degree` forward vertices.
pub fn generate_synthetic_dag(seed: u64, cfg: &SyntheticDagConfig) -> Result<Dag, DagError> {
    let n = cfg.num_vertices;
    if n < 2 {
        return Err(DagError::Config("need at least 2 vertices".into()));
    }
    if cfg.transition_degree == 0 || cfg.transition_degree > n - 1 {
        return Err(DagError::Config(format!(
            "transition degree {} exceeds the {} forward edges available from vertex 0",
            cfg.transition_degree,
            n - 1
        )));
    }
    if cfg.emission_degree == 0 || cfg.emission_degree > cfg.vocab_size {
        return Err(DagError::Config(format!(
            "emission degree {} is not within 1..={}",
            cfg.emission_degree, cfg.vocab_size
        )));
    }
    let gamma = Gamma::new(cfg.concentration, 1.0)
        .map_err(|e| DagError::Config(format!("concentration: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut emissions = Vec::with_capacity(n);
    let mut transitions = Vec::with_capacity(n);
    for u in 0..n {
        let tokens = sample(&mut rng, cfg.vocab_size, cfg.emission_degree);
        let probs = dirichlet(&mut rng, &gamma, cfg.emission_degree);
        emissions.push(
            tokens
                .iter()
                .zip(probs)
                .map(|(t, p)| (TokenId(t as u32), p.ln()))
                .collect(),
        );
        if u == n - 1 {
            transitions.push(Vec::new());
            continue;
        }
        let reach = (n - 1 - u).min(2 * cfg.transition_degree);
        let degree = cfg.transition_degree.min(n - 1 - u);
        let targets = sample(&mut rng, reach, degree);
        let probs = dirichlet(&mut rng, &gamma, degree);
        transitions.push(
            targets
                .iter()
                .zip(probs)
                .map(|(off, p)| (u + 1 + off, p.ln()))
                .collect(),
        );
    }
    Dag::new(emissions, transitions)
}
