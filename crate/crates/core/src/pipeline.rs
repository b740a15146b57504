//! End-to-end decoding: one lattice in, one result out, in any of the
//! supported modes, plus a batch runner over a JSON-lines manifest.

use std::fmt;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cbs::{beam_decode, cbs_dag_decode, greedy_decode, DagDecode};
use crate::constraints::{
    build_hlc_fsa, tokenize_phrase, vocab_fsa_from_static, ConstraintError, ConstraintPhrase,
    StaticLexicon,
};
use crate::dag::{load_dag, prune_dag, Dag, DagError, PruneConfig};
use crate::length::{dfs_viterbi, LcConfig, LcOutcome, LengthError, LengthPredictor};
use crate::metrics::{evaluate, EvalRecord, EvalVocabulary, MetricsError, MetricsReport};
use crate::token::{TokenId, TokenTable};
use crate::wfsa::{intersect, pruned_dag_to_wfsa, rm_epsilon, shortest_path, topological_sort, Wfsa, WfsaError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Length(#[from] LengthError),
    #[error(transparent)]
    Wfsa(#[from] WfsaError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Config(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Greedy,
    Beam,
    CbsDag,
    WfsaShortest,
    Hlc,
    Vc,
    Lc,
    ControlDag,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::Greedy,
        Mode::Beam,
        Mode::CbsDag,
        Mode::WfsaShortest,
        Mode::Hlc,
        Mode::Vc,
        Mode::Lc,
        Mode::ControlDag,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Greedy => "greedy",
            Mode::Beam => "beam",
            Mode::CbsDag => "cbs-dag",
            Mode::WfsaShortest => "wfsa-shortest",
            Mode::Hlc => "hlc",
            Mode::Vc => "vc",
            Mode::Lc => "lc",
            Mode::ControlDag => "control-dag",
        }
    }

    pub fn uses_phrases(self) -> bool {
        matches!(self, Mode::CbsDag | Mode::Hlc | Mode::ControlDag)
    }

    pub fn uses_vocabulary(self) -> bool {
        matches!(self, Mode::Vc | Mode::ControlDag)
    }

    pub fn uses_length(self) -> bool {
        matches!(self, Mode::Lc | Mode::ControlDag)
    }

    pub fn needs_constraint_file(self) -> bool {
        matches!(self, Mode::CbsDag | Mode::Hlc)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

/// Per-input constraints: `phrases` must appear verbatim, `entities` are
/// admitted as whole units by the vocabulary constraint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConstraints {
    #[serde(default)]
    pub phrases: Vec<String>,
    #[serde(default)]
    pub entities: Vec<String>,
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, PipelineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn parse_constraint_file(text: &str) -> Result<Vec<JobConstraints>, PipelineError> {
    parse_jsonl(text)
}

/// The vocabulary the `vc` and `control-dag` modes admit.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub dictionary: Vec<String>,
    pub specials: Vec<String>,
    pub automaton: Arc<StaticLexicon>,
}

impl Lexicon {
    pub fn build(dictionary: Vec<String>, specials: Vec<String>, table: &TokenTable) -> Result<Self, PipelineError> {
        let automaton = Arc::new(StaticLexicon::build(&dictionary, &specials, true, table)?);
        Ok(Lexicon {
            dictionary,
            specials,
            automaton,
        })
    }

    /// Reuses `cached` when its content hash matches, otherwise builds.
    /// The flag reports whether the cache was used.
    pub fn with_cache(
        dictionary: Vec<String>,
        specials: Vec<String>,
        table: &TokenTable,
        cached: StaticLexicon,
    ) -> Result<(Self, bool), PipelineError> {
        let hash = crate::constraints::lexicon_hash(&dictionary, &specials, true, table);
        if cached.hash == hash {
            let lex = Lexicon {
                dictionary,
                specials,
                automaton: Arc::new(cached),
            };
            return Ok((lex, true));
        }
        Ok((Self::build(dictionary, specials, table)?, false))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderConfig {
    pub mode: Mode,
    pub k_e: usize,
    pub k_t: usize,
    pub beam: usize,
    pub strictness: f64,
    pub edge_prune_p: f64,
    pub len_upper: Option<usize>,
    /// Report wall time per job. Off gives byte-identical output across runs.
    pub timing: bool,
}

impl DecoderConfig {
    pub fn new(mode: Mode) -> Self {
        DecoderConfig {
            mode,
            k_e: 3,
            k_t: 3,
            beam: 5,
            strictness: 1.0,
            edge_prune_p: 0.7,
            len_upper: None,
            timing: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    EmptyIntersection,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseFlag {
    pub phrase: String,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub id: Option<String>,
    pub mode: Mode,
    pub status: Status,
    pub tokens: Vec<TokenId>,
    pub text: String,
    /// Path cost (negative log-likelihood); absent unless status is ok.
    pub cost: Option<f64>,
    pub length: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target_length: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub length_upper: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub length_penalty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub adjusted_cost: Option<f64>,
    pub constraints: Vec<PhraseFlag>,
    pub all_satisfied: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wfsa_states: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wfsa_arcs: Option<usize>,
    /// Shortest and longest accepting lengths when no candidate fit.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub feasible_lengths: Option<(Option<usize>, Option<usize>)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_ms: Option<f64>,
}

impl DecodeResult {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("decode results always serialize")
    }
}

/// Decodes lattices under one fixed configuration. The token table and the
/// static lexicon are shared read-only, so one decoder can serve many
/// threads.
#[derive(Debug, Clone)]
pub struct Decoder {
    cfg: DecoderConfig,
    table: Arc<TokenTable>,
    lexicon: Option<Lexicon>,
}

impl Decoder {
    pub fn new(cfg: DecoderConfig, table: Arc<TokenTable>, lexicon: Option<Lexicon>) -> Result<Self, PipelineError> {
        PruneConfig::new(cfg.k_e, cfg.k_t)?;
        if cfg.beam == 0 {
            return Err(PipelineError::Config("beam size must be positive".into()));
        }
        if cfg.mode.uses_vocabulary() && lexicon.is_none() {
            return Err(PipelineError::Config(format!("mode {} needs a lexicon", cfg.mode)));
        }
        if cfg.mode.uses_length() {
            // validates strictness, p and the upper bound up front
            let lc = LcConfig::new(1, cfg.strictness, cfg.edge_prune_p)?;
            if let Some(u) = cfg.len_upper {
                lc.with_upper_bound(u)?;
            }
        }
        Ok(Decoder { cfg, table, lexicon })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.cfg
    }

    pub fn table(&self) -> &TokenTable {
        &self.table
    }

    pub fn lexicon(&self) -> Option<&Lexicon> {
        self.lexicon.as_ref()
    }

    fn lc_config(&self, target: usize) -> Result<LcConfig, PipelineError> {
        let lc = LcConfig::new(target, self.cfg.strictness, self.cfg.edge_prune_p)?;
        Ok(match self.cfg.len_upper {
            Some(u) => lc.with_upper_bound(u)?,
            None => lc,
        })
    }

    /// The constrained acceptor a WFSA mode searches, or `None` when the
    /// constraints leave no accepting path.
    pub fn constrained_wfsa(
        &self,
        pruned: &Dag,
        phrases: &[ConstraintPhrase],
        entities: &[String],
    ) -> Result<Option<Wfsa>, PipelineError> {
        let mode = self.cfg.mode;
        let mut w = pruned_dag_to_wfsa(pruned);
        if mode.uses_phrases() {
            for p in phrases {
                w = intersect(&w, &build_hlc_fsa(p)?);
                if !w.has_accepting_path() {
                    return Ok(None);
                }
            }
        }
        if mode.uses_vocabulary() {
            let lex = self
                .lexicon
                .as_ref()
                .ok_or_else(|| PipelineError::Config(format!("mode {mode} needs a lexicon")))?;
            let vocab = vocab_fsa_from_static(&lex.automaton, entities, &self.table)?;
            w = intersect(&w, &vocab.automaton);
        }
        if !w.has_accepting_path() {
            return Ok(None);
        }
        Ok(Some(topological_sort(&rm_epsilon(&w))?))
    }

    pub fn decode(
        &self,
        dag: &Dag,
        constraints: &JobConstraints,
        target_length: Option<usize>,
    ) -> Result<DecodeResult, PipelineError> {
        let started = Instant::now();
        let mode = self.cfg.mode;
        let phrases = constraints
            .phrases
            .iter()
            .map(|p| tokenize_phrase(p, &self.table))
            .collect::<Result<Vec<_>, _>>()?;
        let lc = if mode.uses_length() {
            let target = target_length.ok_or_else(|| {
                PipelineError::Config(format!("mode {mode} needs a target length or a length predictor"))
            })?;
            Some(self.lc_config(target)?)
        } else {
            None
        };
        let mut prune = PruneConfig::new(self.cfg.k_e, self.cfg.k_t)?;
        if mode.uses_phrases() {
            prune = prune.with_constraints(phrases.clone());
        }
        let pruned = prune_dag(dag, &prune);

        let mut result = DecodeResult {
            id: None,
            mode,
            status: Status::Ok,
            tokens: Vec::new(),
            text: String::new(),
            cost: None,
            length: 0,
            target_length: lc.map(|c| c.target_length),
            length_upper: lc.map(|c| c.upper_bound),
            length_penalty: None,
            adjusted_cost: None,
            constraints: Vec::new(),
            all_satisfied: false,
            wfsa_states: None,
            wfsa_arcs: None,
            feasible_lengths: None,
            wall_time_ms: None,
        };

        let from_dag = |d: DagDecode| (d.tokens.clone(), d.cost());
        let found: Option<(Vec<TokenId>, f64)> = match mode {
            Mode::Greedy => Some(from_dag(greedy_decode(&pruned))),
            Mode::Beam => Some(from_dag(beam_decode(&pruned, self.cfg.beam))),
            Mode::CbsDag => Some(from_dag(cbs_dag_decode(&pruned, &phrases, self.cfg.beam))),
            _ => match self.constrained_wfsa(&pruned, &phrases, &constraints.entities)? {
                None => {
                    result.status = Status::EmptyIntersection;
                    None
                }
                Some(w) => {
                    result.wfsa_states = Some(w.num_states());
                    result.wfsa_arcs = Some(w.num_arcs());
                    match lc {
                        Some(lc) => match dfs_viterbi(&w, &lc)?.outcome {
                            LcOutcome::Found(p) => {
                                result.length_penalty = Some(p.penalty);
                                result.adjusted_cost = Some(p.adjusted_cost);
                                Some((p.tokens, p.raw_cost))
                            }
                            LcOutcome::Infeasible(why) => {
                                result.status = Status::Infeasible;
                                result.feasible_lengths = Some((why.shortest_accepting, why.longest_accepting));
                                None
                            }
                        },
                        None => shortest_path(&w)?.map(|p| (p.tokens, p.cost)),
                    }
                }
            },
        };
        if let Some((tokens, cost)) = found {
            result.text = self.table.detokenize(&tokens);
            result.length = tokens.len();
            result.cost = Some(cost);
            result.tokens = tokens;
        }
        result.constraints = phrases
            .iter()
            .zip(&constraints.phrases)
            .map(|(p, surface)| PhraseFlag {
                phrase: surface.clone(),
                satisfied: result.status == Status::Ok && p.occurs_in(&result.tokens),
            })
            .collect();
        result.all_satisfied = result.status == Status::Ok && result.constraints.iter().all(|f| f.satisfied);
        if self.cfg.timing {
            result.wall_time_ms = Some(started.elapsed().as_secs_f64() * 1e3);
        }
        Ok(result)
    }
}

/// One line of a batch manifest. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestJob {
    pub id: String,
    pub dag: PathBuf,
    #[serde(default)]
    pub phrases: Vec<String>,
    #[serde(default)]
    pub entities: Vec<String>,
    #[serde(default)]
    pub target_len: Option<usize>,
    #[serde(default)]
    pub input_len: Option<usize>,
    #[serde(default)]
    pub references: Vec<String>,
    /// Values scored by the slot metrics; defaults to `phrases`.
    #[serde(default)]
    pub required_values: Option<Vec<String>>,
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestJob>, PipelineError> {
    parse_jsonl(text)
}

/// A batch output line: a result, or the error that stopped the job.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum JobLine {
    Done(DecodeResult),
    Failed { id: String, status: &'static str, error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub summary: bool,
    pub jobs: usize,
    pub ok: usize,
    pub empty_intersection: usize,
    pub infeasible: usize,
    pub failed: usize,
    /// Over jobs with status ok.
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub lines: Vec<JobLine>,
    pub summary: BatchSummary,
}

fn resolve_target(job: &ManifestJob, predictor: Option<&LengthPredictor>) -> Option<usize> {
    job.target_len
        .or_else(|| Some(predictor?.predict(job.input_len?)))
}

fn run_job(decoder: &Decoder, job: &ManifestJob, base: &FsPath, predictor: Option<&LengthPredictor>) -> Result<DecodeResult, PipelineError> {
    let path = base.join(&job.dag);
    let bytes = std::fs::read(&path).map_err(|source| PipelineError::Io { path, source })?;
    let dag = load_dag(&bytes)?;
    dag.check_vocab(decoder.table())?;
    let constraints = JobConstraints {
        phrases: job.phrases.clone(),
        entities: job.entities.clone(),
    };
    let mut r = decoder.decode(&dag, &constraints, resolve_target(job, predictor))?;
    r.id = Some(job.id.clone());
    Ok(r)
}

/// Runs every job with up to `parallel` worker threads. Output lines keep
/// manifest order whatever the parallelism; a failing job yields an error
/// line and the batch goes on.
pub fn run_batch(
    decoder: &Decoder,
    jobs: &[ManifestJob],
    base_dir: &FsPath,
    predictor: Option<&LengthPredictor>,
    parallel: usize,
) -> Result<BatchOutput, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<DecodeResult, PipelineError>> =
        pool.install(|| jobs.par_iter().map(|j| run_job(decoder, j, base_dir, predictor)).collect());

    let mut records = Vec::new();
    let mut summary = BatchSummary {
        summary: true,
        jobs: jobs.len(),
        ok: 0,
        empty_intersection: 0,
        infeasible: 0,
        failed: 0,
        metrics: None,
    };
    let mut lines = Vec::with_capacity(jobs.len());
    for (job, res) in jobs.iter().zip(results) {
        match res {
            Ok(r) => {
                match r.status {
                    Status::Ok => {
                        summary.ok += 1;
                        records.push(EvalRecord {
                            output: r.text.clone(),
                            required_values: job.required_values.clone().unwrap_or_else(|| job.phrases.clone()),
                            references: job.references.clone(),
                        });
                    }
                    Status::EmptyIntersection => summary.empty_intersection += 1,
                    Status::Infeasible => summary.infeasible += 1,
                }
                lines.push(JobLine::Done(r));
            }
            Err(e) => {
                summary.failed += 1;
                lines.push(JobLine::Failed {
                    id: job.id.clone(),
                    status: "error",
                    error: e.to_string(),
                });
            }
        }
    }
    if !records.is_empty() {
        let vocab = match decoder.lexicon() {
            Some(lex) => {
                let mut texts: Vec<&str> = lex.dictionary.iter().map(String::as_str).collect();
                texts.extend(lex.specials.iter().map(String::as_str));
                texts.extend(jobs.iter().flat_map(|j| j.entities.iter().map(String::as_str)));
                texts.extend(records.iter().flat_map(|r| r.required_values.iter().map(String::as_str)));
                EvalVocabulary::new(texts).ok()
            }
            None => None,
        };
        summary.metrics = Some(evaluate(&records, vocab.as_ref())?);
    }
    Ok(BatchOutput { lines, summary })
}

impl BatchOutput {
    /// Result lines followed by the summary line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&serde_json::to_string(line).expect("job lines always serialize"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&self.summary).expect("summaries always serialize"));
        out.push('\n');
        out
    }
}
