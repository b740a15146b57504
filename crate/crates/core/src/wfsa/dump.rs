//! Textual automaton dump.
//!
//! ```text
//! start	0
//! states	3
//! 0	1	tok:5	0.6931471805599453
//! 1	2	eps	0
//! 2	2	sigma	0
//! final	2
//! ```
//!
//! Arc lines are `src<TAB>dst<TAB>label<TAB>cost`, sorted by
//! `(src, label, dst, cost)` with labels ordered `eps < sigma < tok:N`. Final
//! lines come last, ascending; a third column carries a non-zero final cost.

use thiserror::Error;

use super::{Arc, ArcLabel, TropicalWeight, Wfsa};
use crate::token::TokenId;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {msg}")]
pub struct DumpError {
    pub line: usize,
    pub msg: String,
}

pub(super) fn render(w: &Wfsa) -> String {
    let mut out = format!("start\t{}\nstates\t{}\n", w.start(), w.num_states());
    for s in 0..w.num_states() {
        let mut arcs: Vec<&Arc> = w.arcs(s).iter().collect();
        arcs.sort_by(|a, b| {
            (a.label, a.next)
                .cmp(&(b.label, b.next))
                .then(a.weight.value().total_cmp(&b.weight.value()))
        });
        for a in arcs {
            out.push_str(&format!(
                "{s}\t{}\t{}\t{}\n",
                a.next,
                a.label,
                a.weight.value()
            ));
        }
    }
    for s in w.finals() {
        let fw = w.final_weight(s);
        if fw == TropicalWeight::ONE {
            out.push_str(&format!("final\t{s}\n"));
        } else {
            out.push_str(&format!("final\t{s}\t{}\n", fw.value()));
        }
    }
    out
}

fn parse_label(s: &str) -> Option<ArcLabel> {
    match s {
        "eps" => Some(ArcLabel::Epsilon),
        "sigma" => Some(ArcLabel::Sigma),
        _ => s
            .strip_prefix("tok:")?
            .parse()
            .ok()
            .map(|id| ArcLabel::Token(TokenId(id))),
    }
}

fn parse_cost(s: &str, line: usize) -> Result<f64, DumpError> {
    match s.parse::<f64>() {
        Ok(c) if !c.is_nan() => Ok(c),
        _ => Err(DumpError {
            line,
            msg: format!("bad cost {s:?}"),
        }),
    }
}

/// Parses the dump format produced by [`Wfsa::to_dump`].
pub fn parse_dump(text: &str) -> Result<Wfsa, DumpError> {
    let err = |line: usize, msg: String| DumpError { line, msg };
    let mut start = None;
    let mut w: Option<Wfsa> = None;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let state = |s: &str, w: &Option<Wfsa>| -> Result<usize, DumpError> {
            let id: usize = s
                .parse()
                .map_err(|_| err(line_no, format!("bad state {s:?}")))?;
            match w {
                Some(w) if id < w.num_states() => Ok(id),
                Some(_) => Err(err(line_no, format!("state {id} out of range"))),
                None => Ok(id),
            }
        };
        match fields.as_slice() {
            ["start", s] => {
                if start.is_some() {
                    return Err(err(line_no, "duplicate start line".into()));
                }
                start = Some(state(s, &w)?);
            }
            ["states", count] => {
                if w.is_some() {
                    return Err(err(line_no, "duplicate states line".into()));
                }
                let count: usize = count
                    .parse()
                    .map_err(|_| err(line_no, format!("bad state count {count:?}")))?;
                // every state needs at least a few bytes of text to matter
                if count == 0 || count > text.len() + 1 {
                    return Err(err(line_no, format!("implausible state count {count}")));
                }
                let s = start.ok_or_else(|| err(line_no, "states before start".into()))?;
                if s >= count {
                    return Err(err(line_no, format!("start state {s} out of range")));
                }
                w = Some(Wfsa::with_states(count, s));
            }
            ["final", s] | ["final", s, _] => {
                let s = state(s, &w)?;
                let cost = match fields.get(2) {
                    Some(c) => parse_cost(c, line_no)?,
                    None => 0.0,
                };
                let aut = w
                    .as_mut()
                    .ok_or_else(|| err(line_no, "final before states".into()))?;
                aut.set_final(s, TropicalWeight::new(cost));
            }
            [src, dst, label, cost] => {
                let src = state(src, &w)?;
                let dst = state(dst, &w)?;
                let label = parse_label(label)
                    .ok_or_else(|| err(line_no, format!("bad label {label:?}")))?;
                let cost = parse_cost(cost, line_no)?;
                let aut = w
                    .as_mut()
                    .ok_or_else(|| err(line_no, "arc before states".into()))?;
                aut.add_arc(src, Arc::new(label, cost, dst));
            }
            _ => return Err(err(line_no, format!("unrecognized line {line:?}"))),
        }
    }
    w.ok_or_else(|| err(0, "missing states line".into()))
}
