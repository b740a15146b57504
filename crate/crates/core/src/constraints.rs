//! Constraint automata: hard lexical phrases and the vocabulary acceptor.
//!
//! A phrase constraint accepts exactly the token strings that contain the
//! phrase contiguously. It is built as a KMP automaton, so it is
//! deterministic: state `j` means "the longest suffix read so far that is a
//! phrase prefix has length `j`", and mismatches fall back along failure
//! links. Sigma arcs act as the otherwise transition.
//!
//! The vocabulary acceptor is `(dict ∪ spec ∪ dyn)*` over token strings.
//! `dict ∪ spec` does not depend on the input, so it is determinized and
//! minimized once and can be cached by content hash; the per-input entity
//! automaton is unioned in afterwards and the closure applied last.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc as SharedArc, Mutex};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kmp::KmpMatcher;
use crate::token::{SegmentError, TokenId, TokenTable};
use crate::wfsa::{
    closure, concat, determinize_min, parse_dump, union, union_many, Arc, ArcLabel, DumpError,
    TropicalWeight, Wfsa,
};

/// Punctuation accepted by default as special tokens.
pub const DEFAULT_PUNCTUATION: &str = "$&'()*+,-./:;=>?@[]_";

/// Separators allowed between digit runs inside a number.
pub const NUMBER_SEPARATORS: &str = ",.:-/";

#[derive(Debug, Error, PartialEq)]
pub enum ConstraintError {
    #[error("constraint phrase is empty")]
    EmptyPhrase,
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error("cumulative cutoff must be in (0, 1], got {0}")]
    Cutoff(f64),
    #[error("lexicon cache file: {0}")]
    Cache(String),
    #[error(transparent)]
    Dump(#[from] DumpError),
}

/// A token sequence that must occur contiguously in the output.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConstraintPhrase {
    tokens: Vec<TokenId>,
    surface: String,
}

impl ConstraintPhrase {
    /// A phrase given directly as tokens, with no surface string.
    pub fn from_tokens(tokens: Vec<TokenId>) -> Result<Self, ConstraintError> {
        if tokens.is_empty() {
            return Err(ConstraintError::EmptyPhrase);
        }
        Ok(ConstraintPhrase {
            tokens,
            surface: String::new(),
        })
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn matcher(&self) -> KmpMatcher {
        KmpMatcher::new(&self.tokens)
    }

    /// True when the phrase occurs contiguously in `tokens`.
    pub fn occurs_in(&self, tokens: &[TokenId]) -> bool {
        tokens.windows(self.tokens.len()).any(|w| w == self.tokens)
    }
}

/// Segments `surface` word by word with the start-of-word mark applied.
pub fn tokenize_phrase(surface: &str, table: &TokenTable) -> Result<ConstraintPhrase, ConstraintError> {
    let tokens = table.segment_words(surface)?;
    if tokens.is_empty() {
        return Err(ConstraintError::EmptyPhrase);
    }
    Ok(ConstraintPhrase {
        tokens,
        surface: surface.split_whitespace().collect::<Vec<_>>().join(" "),
    })
}

/// Acceptor for strings containing `phrase` (the language `.*(C).*`).
pub fn build_hlc_fsa(phrase: &ConstraintPhrase) -> Result<Wfsa, ConstraintError> {
    if phrase.is_empty() {
        return Err(ConstraintError::EmptyPhrase);
    }
    let n = phrase.len();
    let matcher = phrase.matcher();
    let alphabet: BTreeSet<TokenId> = phrase.tokens.iter().copied().collect();
    let mut w = Wfsa::with_states(n + 1, 0);
    for j in 0..n {
        w.add_arc(j, Arc::new(ArcLabel::Sigma, 0.0, 0));
        for &t in &alphabet {
            let next = matcher.step(j, t);
            if next != 0 {
                w.add_arc(j, Arc::new(ArcLabel::Token(t), 0.0, next));
            }
        }
    }
    w.add_arc(n, Arc::new(ArcLabel::Sigma, 0.0, n));
    w.set_final(n, TropicalWeight::ONE);
    Ok(w)
}

/// Normalizes a corpus unigram: trims non-alphanumeric characters at both
/// ends and drops words that are empty or contain digits. Case is kept.
pub fn normalize_unigram(word: &str) -> Option<&str> {
    let w = word.trim_matches(|c: char| !c.is_alphanumeric());
    if w.is_empty() || w.chars().any(|c| c.is_numeric()) {
        None
    } else {
        Some(w)
    }
}

/// Space-delimited unigrams of `corpus`, most frequent first (ties
/// lexicographic), truncated at the shortest prefix whose share of all
/// unigram occurrences reaches `cumulative_cutoff`.
pub fn extract_lexicon<S: AsRef<str>>(
    corpus: &[S],
    cumulative_cutoff: f64,
) -> Result<Vec<String>, ConstraintError> {
    if !(cumulative_cutoff > 0.0 && cumulative_cutoff <= 1.0) {
        return Err(ConstraintError::Cutoff(cumulative_cutoff));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for line in corpus {
        for word in line.as_ref().split_whitespace().filter_map(normalize_unigram) {
            *counts.entry(word).or_default() += 1;
        }
    }
    let total: usize = counts.values().sum();
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut out = Vec::new();
    let mut cumulative = 0;
    for (word, count) in ranked {
        out.push(word.to_string());
        cumulative += count;
        if cumulative as f64 / total as f64 >= cumulative_cutoff {
            break;
        }
    }
    Ok(out)
}

/// One entry per non-empty line.
pub fn parse_word_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect()
}

/// The default special tokens present in `table`: punctuation, the
/// sentence markers and the bare start-of-word mark.
pub fn default_specials(table: &TokenTable) -> Vec<String> {
    let mut out: Vec<String> = DEFAULT_PUNCTUATION
        .chars()
        .map(String::from)
        .filter(|p| table.id(p).is_some())
        .collect();
    for id in [table.sos(), table.eos()] {
        out.push(table.surface(id).unwrap_or_default().to_string());
    }
    if table.id(table.sow()).is_some() {
        out.push(table.sow().to_string());
    }
    out
}

fn special_tokens(special: &str, table: &TokenTable) -> Result<Vec<TokenId>, ConstraintError> {
    match table.id(special) {
        Some(id) => Ok(vec![id]),
        None => Ok(table.segment_raw(special)?),
    }
}

/// Numbers as token strings: a word-initial digit piece (or the bare mark
/// followed by a digit piece), then digit pieces, each optionally preceded
/// by one separator. Empty when the table has no digit pieces.
fn number_fsa(table: &TokenTable) -> Option<Wfsa> {
    let is_digits = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_digit());
    let mut marked = Vec::new();
    let mut bare = Vec::new();
    for (id, s) in table.iter() {
        if is_digits(s) {
            bare.push(Wfsa::from_string(&[id]));
        } else if s.strip_prefix(table.sow()).is_some_and(is_digits) {
            marked.push(Wfsa::from_string(&[id]));
        }
    }
    if marked.is_empty() && bare.is_empty() {
        return None;
    }
    let digits = union_many(&bare);
    let mut heads = marked;
    if let (Some(mark), false) = (table.id(table.sow()), bare.is_empty()) {
        heads.push(concat(&Wfsa::from_string(&[mark]), &digits));
    }
    let separators: Vec<Wfsa> = NUMBER_SEPARATORS
        .chars()
        .filter_map(|c| table.id(&c.to_string()))
        .map(|id| Wfsa::from_string(&[id]))
        .collect();
    let tail_unit = if separators.is_empty() {
        digits.clone()
    } else {
        union(&digits, &concat(&union_many(&separators), &digits))
    };
    Some(concat(&union_many(&heads), &closure(&tail_unit)))
}

/// Content hash of the inputs to the static lexicon automaton.
pub fn lexicon_hash(
    dictionary: &[String],
    specials: &[String],
    include_numbers: bool,
    table: &TokenTable,
) -> String {
    let mut h = Sha256::new();
    for (tag, items) in [("dict", dictionary), ("spec", specials)] {
        h.update(tag.as_bytes());
        h.update([0u8]);
        for item in items {
            h.update(item.as_bytes());
            h.update([0u8]);
        }
    }
    h.update([u8::from(include_numbers)]);
    h.update(table.to_text().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// The determinized, minimized `dict ∪ spec` acceptor.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticLexicon {
    pub hash: String,
    pub automaton: Wfsa,
    pub dictionary_words: usize,
    pub special_tokens: usize,
}

impl StaticLexicon {
    pub fn build(
        dictionary: &[String],
        specials: &[String],
        include_numbers: bool,
        table: &TokenTable,
    ) -> Result<Self, ConstraintError> {
        let mut parts = Vec::with_capacity(dictionary.len() + specials.len() + 1);
        for word in dictionary {
            parts.push(Wfsa::from_string(tokenize_phrase(word, table)?.tokens()));
        }
        for special in specials {
            parts.push(Wfsa::from_string(&special_tokens(special, table)?));
        }
        if include_numbers {
            parts.extend(number_fsa(table));
        }
        Ok(StaticLexicon {
            hash: lexicon_hash(dictionary, specials, include_numbers, table),
            automaton: determinize_min(&union_many(&parts)),
            dictionary_words: dictionary.len(),
            special_tokens: specials.len(),
        })
    }

    /// Cache file: a `#hash` header, a `#counts` header, then the automaton
    /// dump.
    pub fn to_cache_text(&self) -> String {
        format!(
            "#hash {}\n#counts {} {}\n{}",
            self.hash,
            self.dictionary_words,
            self.special_tokens,
            self.automaton.to_dump()
        )
    }

    pub fn from_cache_text(text: &str) -> Result<Self, ConstraintError> {
        let bad = |m: &str| ConstraintError::Cache(m.to_string());
        let mut lines = text.lines();
        let hash = lines
            .next()
            .and_then(|l| l.strip_prefix("#hash "))
            .ok_or_else(|| bad("missing #hash header"))?
            .to_string();
        let counts: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("#counts "))
            .ok_or_else(|| bad("missing #counts header"))?
            .split(' ')
            .map(|c| c.parse().map_err(|_| bad("bad #counts value")))
            .collect::<Result<_, _>>()?;
        let [dictionary_words, special_tokens] = counts[..] else {
            return Err(bad("#counts needs two values"));
        };
        Ok(StaticLexicon {
            hash,
            automaton: parse_dump(text)?,
            dictionary_words,
            special_tokens,
        })
    }
}

/// The vocabulary acceptor for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconFsa {
    pub automaton: Wfsa,
    pub dictionary_words: usize,
    pub special_tokens: usize,
    pub dynamic_entities: usize,
}

/// `(static ∪ dyn)*` where `dyn` accepts exactly the tokenized entities.
pub fn vocab_fsa_from_static(
    stat: &StaticLexicon,
    dynamic_entities: &[String],
    table: &TokenTable,
) -> Result<LexiconFsa, ConstraintError> {
    let body = if dynamic_entities.is_empty() {
        stat.automaton.clone()
    } else {
        let entities = dynamic_entities
            .iter()
            .map(|e| Ok(Wfsa::from_string(tokenize_phrase(e, table)?.tokens())))
            .collect::<Result<Vec<_>, ConstraintError>>()?;
        union(&stat.automaton, &union_many(&entities))
    };
    Ok(LexiconFsa {
        automaton: closure(&body),
        dictionary_words: stat.dictionary_words,
        special_tokens: stat.special_tokens,
        dynamic_entities: dynamic_entities.len(),
    })
}

/// Builds the vocabulary acceptor without caching.
pub fn build_vocab_fsa(
    dictionary: &[String],
    specials: &[String],
    dynamic_entities: &[String],
    table: &TokenTable,
) -> Result<LexiconFsa, ConstraintError> {
    let stat = StaticLexicon::build(dictionary, specials, true, table)?;
    vocab_fsa_from_static(&stat, dynamic_entities, table)
}

/// Shares static lexicon automata between decodes, keyed by content hash.
#[derive(Debug, Default)]
pub struct LexiconCache {
    entries: Mutex<HashMap<String, SharedArc<StaticLexicon>>>,
}

impl LexiconCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("lexicon cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, lexicon: StaticLexicon) -> SharedArc<StaticLexicon> {
        let lexicon = SharedArc::new(lexicon);
        self.entries
            .lock()
            .expect("lexicon cache poisoned")
            .insert(lexicon.hash.clone(), lexicon.clone());
        lexicon
    }

    pub fn get_or_build(
        &self,
        dictionary: &[String],
        specials: &[String],
        table: &TokenTable,
    ) -> Result<SharedArc<StaticLexicon>, ConstraintError> {
        let hash = lexicon_hash(dictionary, specials, true, table);
        if let Some(hit) = self.entries.lock().expect("lexicon cache poisoned").get(&hash) {
            return Ok(hit.clone());
        }
        let built = StaticLexicon::build(dictionary, specials, true, table)?;
        Ok(self.insert(built))
    }

    pub fn vocab_fsa(
        &self,
        dictionary: &[String],
        specials: &[String],
        dynamic_entities: &[String],
        table: &TokenTable,
    ) -> Result<LexiconFsa, ConstraintError> {
        let stat = self.get_or_build(dictionary, specials, table)?;
        vocab_fsa_from_static(&stat, dynamic_entities, table)
    }
}
