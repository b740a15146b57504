//! Token tables: the mapping between dense token ids and subword surfaces.
//!
//! The on-disk format is line oriented UTF-8:
//!
//! ```text
//! #version 1
//! #sow ▁
//! #sos 0
//! #eos 1
//! 0	<s>
//! 1	</s>
//! 2	▁cat
//! ```
//!
//! Every id in `0..N` must appear exactly once. Surfaces are non-empty and
//! unique so that longest-match segmentation is unambiguous.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default start-of-word mark (U+2581), as used by sentencepiece vocabularies.
pub const DEFAULT_SOW: &str = "\u{2581}";

/// Index into a [`TokenTable`].
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for TokenId {
    fn from(v: u32) -> Self {
        TokenId(v)
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TokenTableError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported token table version {0}")]
    Version(String),
    #[error("token id {0} is missing (ids must be dense)")]
    MissingId(u32),
    #[error("token id {0} appears more than once")]
    DuplicateId(u32),
    #[error("surface {0:?} appears more than once")]
    DuplicateSurface(String),
    #[error("{which} id {id} is outside the table of {size} tokens")]
    MarkerOutOfRange {
        which: &'static str,
        id: u32,
        size: usize,
    },
    #[error("missing header #{0}")]
    MissingHeader(&'static str),
    #[error("token table is empty")]
    Empty,
}

#[derive(Debug, Error, PartialEq)]
#[error("cannot segment {span:?} (at char {offset} of {input:?})")]
pub struct SegmentError {
    pub input: String,
    pub span: String,
    pub offset: usize,
}

/// A dense vocabulary of subword surfaces plus the sentence and word markers.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenTable {
    surfaces: Vec<String>,
    index: HashMap<String, TokenId>,
    sow: String,
    sos: TokenId,
    eos: TokenId,
    max_chars: usize,
}

impl TokenTable {
    pub fn new(
        surfaces: Vec<String>,
        sow: impl Into<String>,
        sos: TokenId,
        eos: TokenId,
    ) -> Result<Self, TokenTableError> {
        if surfaces.is_empty() {
            return Err(TokenTableError::Empty);
        }
        let mut index = HashMap::with_capacity(surfaces.len());
        let mut max_chars = 0;
        for (i, s) in surfaces.iter().enumerate() {
            if s.is_empty() {
                return Err(TokenTableError::Parse {
                    line: 0,
                    msg: format!("token {i} has an empty surface"),
                });
            }
            if index.insert(s.clone(), TokenId(i as u32)).is_some() {
                return Err(TokenTableError::DuplicateSurface(s.clone()));
            }
            max_chars = max_chars.max(s.chars().count());
        }
        for (which, id) in [("sos", sos), ("eos", eos)] {
            if id.index() >= surfaces.len() {
                return Err(TokenTableError::MarkerOutOfRange {
                    which,
                    id: id.0,
                    size: surfaces.len(),
                });
            }
        }
        let sow = sow.into();
        if sow.is_empty() {
            return Err(TokenTableError::Parse {
                line: 0,
                msg: "start-of-word mark is empty".into(),
            });
        }
        Ok(TokenTable {
            surfaces,
            index,
            sow,
            sos,
            eos,
            max_chars,
        })
    }

    pub fn parse(text: &str) -> Result<Self, TokenTableError> {
        let mut sow = None;
        let mut sos = None;
        let mut eos = None;
        let mut entries: Vec<Option<String>> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let (key, value) = header.split_once(' ').ok_or(TokenTableError::Parse {
                    line: line_no,
                    msg: format!("malformed header {line:?}"),
                })?;
                let parse_id = |v: &str| {
                    v.parse::<u32>().map(TokenId).map_err(|_| TokenTableError::Parse {
                        line: line_no,
                        msg: format!("bad id {v:?} in #{key}"),
                    })
                };
                match key {
                    "version" => {
                        if value != "1" {
                            return Err(TokenTableError::Version(value.to_string()));
                        }
                    }
                    "sow" => sow = Some(value.to_string()),
                    "sos" => sos = Some(parse_id(value)?),
                    "eos" => eos = Some(parse_id(value)?),
                    _ => {
                        return Err(TokenTableError::Parse {
                            line: line_no,
                            msg: format!("unknown header #{key}"),
                        })
                    }
                }
                continue;
            }
            let (id, surface) = line.split_once('\t').ok_or(TokenTableError::Parse {
                line: line_no,
                msg: "expected id<TAB>surface".into(),
            })?;
            let id: u32 = id.parse().map_err(|_| TokenTableError::Parse {
                line: line_no,
                msg: format!("bad token id {id:?}"),
            })?;
            if surface.is_empty() {
                return Err(TokenTableError::Parse {
                    line: line_no,
                    msg: format!("token {id} has an empty surface"),
                });
            }
            let slot = id as usize;
            // ids are dense, so anything past the line count is necessarily a gap
            if slot > text.len() {
                return Err(TokenTableError::MissingId(entries.len() as u32));
            }
            if entries.len() <= slot {
                entries.resize(slot + 1, None);
            }
            if entries[slot].is_some() {
                return Err(TokenTableError::DuplicateId(id));
            }
            entries[slot] = Some(surface.to_string());
        }
        let surfaces = entries
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or(TokenTableError::MissingId(i as u32)))
            .collect::<Result<Vec<_>, _>>()?;
        let sow = sow.unwrap_or_else(|| DEFAULT_SOW.to_string());
        let sos = sos.ok_or(TokenTableError::MissingHeader("sos"))?;
        let eos = eos.ok_or(TokenTableError::MissingHeader("eos"))?;
        TokenTable::new(surfaces, sow, sos, eos)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "#version 1\n#sow {}\n#sos {}\n#eos {}\n",
            self.sow, self.sos, self.eos
        );
        for (i, s) in self.surfaces.iter().enumerate() {
            out.push_str(&format!("{i}\t{s}\n"));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn sow(&self) -> &str {
        &self.sow
    }

    pub fn sos(&self) -> TokenId {
        self.sos
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.surfaces.get(id.index()).map(String::as_str)
    }

    pub fn id(&self, surface: &str) -> Option<TokenId> {
        self.index.get(surface).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, &str)> {
        self.surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| (TokenId(i as u32), s.as_str()))
    }

    /// Joins surfaces, turning start-of-word marks into spaces. Sentence
    /// markers and unknown ids are skipped.
    pub fn detokenize(&self, tokens: &[TokenId]) -> String {
        let mut out = String::new();
        for &t in tokens {
            if t == self.sos || t == self.eos {
                continue;
            }
            if let Some(s) = self.surface(t) {
                out.push_str(&s.replace(self.sow.as_str(), " "));
            }
        }
        out.trim().to_string()
    }

    /// Greedy longest-match segmentation of `text` with no word-boundary
    /// handling.
    pub fn segment_raw(&self, text: &str) -> Result<Vec<TokenId>, SegmentError> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < chars.len() {
            let start = chars[pos].0;
            let longest = (1..=self.max_chars.min(chars.len() - pos))
                .rev()
                .find_map(|n| {
                    let end = chars.get(pos + n).map_or(text.len(), |c| c.0);
                    self.id(&text[start..end]).map(|id| (n, id))
                });
            match longest {
                Some((n, id)) => {
                    out.push(id);
                    pos += n;
                }
                None => {
                    let end = text[start..]
                        .find(char::is_whitespace)
                        .map_or(text.len(), |e| start + e);
                    return Err(SegmentError {
                        input: text.to_string(),
                        span: text[start..end].to_string(),
                        offset: pos,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Segments whitespace-delimited words, prefixing each with the
    /// start-of-word mark.
    pub fn segment_words(&self, text: &str) -> Result<Vec<TokenId>, SegmentError> {
        let mut out = Vec::new();
        for word in text.split_whitespace() {
            let marked = format!("{}{}", self.sow, word);
            match self.segment_raw(&marked) {
                Ok(ids) => out.extend(ids),
                Err(mut e) => {
                    e.input = text.to_string();
                    e.span = e.span.replace(self.sow.as_str(), "");
                    return Err(e);
                }
            }
        }
        Ok(out)
    }
}
