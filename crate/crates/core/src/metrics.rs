//! Constraint error metrics and the BLEU brevity penalty.
//!
//! All rates are fractions in `[0, 1]`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Characters allowed between digits in a numeric word.
pub const NUMERIC_SEPARATORS: &str = ",.:-/";

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("evaluation vocabulary is empty")]
    EmptyVocabulary,
    #[error("brevity penalty needs at least one record")]
    NoRecords,
    #[error("record {0} has no references")]
    NoReferences(usize),
    #[error("record {0} has a zero length")]
    ZeroLength(usize),
    #[error("{candidates} candidates but {references} reference sets")]
    LengthMismatch { candidates: usize, references: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRecord {
    pub output: String,
    #[serde(default)]
    pub required_values: Vec<String>,
    #[serde(default)]
    pub references: Vec<String>,
}

/// One record per non-blank line.
pub fn parse_eval_records(text: &str) -> Result<Vec<EvalRecord>, MetricsError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| MetricsError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Strips leading and trailing punctuation (anything not alphanumeric).
pub fn strip_punctuation(word: &str) -> &str {
    word.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Digits, optionally broken up by `,.:-/`.
pub fn is_numeric(word: &str) -> bool {
    word.chars().any(|c| c.is_ascii_digit())
        && word
            .chars()
            .all(|c| c.is_ascii_digit() || NUMERIC_SEPARATORS.contains(c))
}

/// True-cased word set used to decide what counts as a neologism.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalVocabulary {
    words: BTreeSet<String>,
}

impl EvalVocabulary {
    pub fn new<I, S>(words: I) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = EvalVocabulary {
            words: BTreeSet::new(),
        };
        v.extend_from_text(words);
        if v.words.is_empty() {
            return Err(MetricsError::EmptyVocabulary);
        }
        Ok(v)
    }

    /// Words of the corpus plus the words of every required value.
    pub fn from_corpus<S: AsRef<str>>(corpus: &[S], records: &[EvalRecord]) -> Result<Self, MetricsError> {
        let values = records.iter().flat_map(|r| r.required_values.iter());
        let lines: Vec<&str> = corpus
            .iter()
            .map(AsRef::as_ref)
            .chain(values.map(String::as_str))
            .collect();
        Self::new(lines)
    }

    /// Adds every whitespace-separated word of each text, punctuation
    /// stripped.
    pub fn extend_from_text<I, S>(&mut self, texts: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for text in texts {
            for w in text.as_ref().split_whitespace().map(strip_punctuation) {
                if !w.is_empty() {
                    self.words.insert(w.to_string());
                }
            }
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Words of `output` that are out of vocabulary.
pub fn oov_words<'a>(output: &'a str, vocab: &EvalVocabulary) -> Vec<&'a str> {
    output
        .split_whitespace()
        .map(strip_punctuation)
        .filter(|w| !w.is_empty() && !is_numeric(w) && !vocab.contains(w))
        .collect()
}

fn missing_values(r: &EvalRecord) -> usize {
    r.required_values
        .iter()
        .filter(|v| !r.output.contains(v.as_str()))
        .count()
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Missing values over all (record, value) pairs.
pub fn slot_error_rate(records: &[EvalRecord]) -> f64 {
    let slots = records.iter().map(|r| r.required_values.len()).sum();
    ratio(records.iter().map(missing_values).sum(), slots)
}

/// Records missing at least one value, over records that have values.
pub fn slot_error_rate_per_response(records: &[EvalRecord]) -> f64 {
    let with_values = records.iter().filter(|r| !r.required_values.is_empty()).count();
    let errors = records.iter().filter(|r| missing_values(r) > 0).count();
    ratio(errors, with_values)
}

/// Records missing at least one value, over all records.
pub fn exact_occurrence_error_rate(records: &[EvalRecord]) -> f64 {
    ratio(
        records.iter().filter(|r| missing_values(r) > 0).count(),
        records.len(),
    )
}

/// Records with at least one out-of-vocabulary word, over all records.
pub fn neologism_rate(records: &[EvalRecord], vocab: &EvalVocabulary) -> f64 {
    ratio(
        records
            .iter()
            .filter(|r| !oov_words(&r.output, vocab).is_empty())
            .count(),
        records.len(),
    )
}

/// Corpus brevity penalty. Each candidate is paired with its closest
/// reference length (the shorter one on ties); `c` and `r` are the sums.
pub fn brevity_penalty(candidate_lengths: &[usize], reference_lengths: &[Vec<usize>]) -> Result<f64, MetricsError> {
    if candidate_lengths.is_empty() {
        return Err(MetricsError::NoRecords);
    }
    if candidate_lengths.len() != reference_lengths.len() {
        return Err(MetricsError::LengthMismatch {
            candidates: candidate_lengths.len(),
            references: reference_lengths.len(),
        });
    }
    let (mut c, mut r) = (0usize, 0usize);
    for (i, (&cand, refs)) in candidate_lengths.iter().zip(reference_lengths).enumerate() {
        if cand == 0 || refs.contains(&0) {
            return Err(MetricsError::ZeroLength(i));
        }
        let closest = refs
            .iter()
            .copied()
            .min_by_key(|&len| (len.abs_diff(cand), len))
            .ok_or(MetricsError::NoReferences(i))?;
        c += cand;
        r += closest;
    }
    Ok(if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    })
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: usize,
    pub slots: usize,
    pub ser: f64,
    pub ser_per_response: f64,
    pub eor: f64,
    /// Absent without a vocabulary.
    pub neo: Option<f64>,
    /// Absent unless every record has references. Lengths count
    /// whitespace-separated words.
    pub bp: Option<f64>,
}

pub fn evaluate(records: &[EvalRecord], vocab: Option<&EvalVocabulary>) -> Result<MetricsReport, MetricsError> {
    let bp = if !records.is_empty() && records.iter().all(|r| !r.references.is_empty()) {
        let cands: Vec<usize> = records.iter().map(|r| word_count(&r.output)).collect();
        let refs: Vec<Vec<usize>> = records
            .iter()
            .map(|r| r.references.iter().map(|s| word_count(s)).collect())
            .collect();
        Some(brevity_penalty(&cands, &refs)?)
    } else {
        None
    };
    Ok(MetricsReport {
        records: records.len(),
        slots: records.iter().map(|r| r.required_values.len()).sum(),
        ser: slot_error_rate(records),
        ser_per_response: slot_error_rate_per_response(records),
        eor: exact_occurrence_error_rate(records),
        neo: vocab.map(|v| neologism_rate(records, v)),
        bp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(output: &str, values: &[&str]) -> EvalRecord {
        EvalRecord {
            output: output.into(),
            required_values: values.iter().map(|s| s.to_string()).collect(),
            references: vec![],
        }
    }

    #[test]
    fn ser_examples() {
        assert_eq!(slot_error_rate(&[rec("Call 555-1234", &["555-1234"])]), 0.0);
        assert_eq!(slot_error_rate(&[rec("Call me", &["555-1234"])]), 1.0);
        let rs = [rec("a b", &["a", "c"]), rec("x", &["x"])];
        assert_eq!(slot_error_rate(&rs), 1.0 / 3.0);
        assert_eq!(slot_error_rate_per_response(&rs), 0.5);
        assert_eq!(slot_error_rate(&[rec("x", &[])]), 0.0);
    }

    #[test]
    fn eor_examples() {
        let rs = [rec("a", &["a"]), rec("b", &["b"]), rec("c", &["z", "y"]), rec("d", &[])];
        assert_eq!(exact_occurrence_error_rate(&rs), 0.25);
        assert_eq!(exact_occurrence_error_rate(&rs[..2]), 0.0);
    }

    #[test]
    fn neo_examples() {
        let vocab = EvalVocabulary::new(["the Cambridge office", "is open"]).unwrap();
        assert_eq!(neologism_rate(&[rec("The office, is open.", &[])], &vocab), 1.0);
        assert_eq!(neologism_rate(&[rec("the office: is open!", &[])], &vocab), 0.0);
        assert_eq!(neologism_rate(&[rec("the Cambrige office", &[])], &vocab), 1.0);
        assert_eq!(neologism_rate(&[rec("open 10:30 - 5,000", &[])], &vocab), 0.0);
        assert_eq!(oov_words("Cambrige 12a", &vocab), vec!["Cambrige", "12a"]);
        assert_eq!(EvalVocabulary::new([" ,. "]), Err(MetricsError::EmptyVocabulary));
    }

    #[test]
    fn bp_examples() {
        assert_eq!(brevity_penalty(&[10], &[vec![10]]).unwrap(), 1.0);
        let half = brevity_penalty(&[5], &[vec![10]]).unwrap();
        assert!((half - (-1.0f64).exp()).abs() < 1e-15);
        // closest reference, shorter on ties
        let bp = brevity_penalty(&[4], &[vec![2, 6]]).unwrap();
        assert_eq!(bp, 1.0);
        assert_eq!(brevity_penalty(&[], &[]), Err(MetricsError::NoRecords));
        assert_eq!(brevity_penalty(&[3], &[vec![]]), Err(MetricsError::NoReferences(0)));
    }

    #[test]
    fn report_and_jsonl() {
        let text = "{\"output\": \"a b\", \"required_values\": [\"a\"], \"references\": [\"a b c d\"]}\n\n{\"output\": \"c\", \"references\": [\"c\"]}\n";
        let rs = parse_eval_records(text).unwrap();
        assert_eq!(rs.len(), 2);
        let report = evaluate(&rs, None).unwrap();
        assert_eq!(report.ser, 0.0);
        assert_eq!(report.neo, None);
        assert!((report.bp.unwrap() - (1.0f64 - 5.0 / 3.0).exp()).abs() < 1e-12);
        assert!(matches!(
            parse_eval_records("{\"output\": 1}"),
            Err(MetricsError::Parse { line: 1, .. })
        ));
    }
}
