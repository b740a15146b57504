//! Rational operations (Thompson constructions with epsilon arcs).

use super::{Arc, ArcLabel, TropicalWeight, Wfsa};

fn append(out: &mut Wfsa, w: &Wfsa) -> usize {
    let offset = out.num_states();
    for _ in 0..w.num_states() {
        out.add_state();
    }
    for s in 0..w.num_states() {
        for a in w.arcs(s) {
            out.add_arc(
                s + offset,
                Arc {
                    next: a.next + offset,
                    ..*a
                },
            );
        }
        out.set_final(s + offset, w.final_weight(s));
    }
    offset
}

/// Accepts `L(a) ∪ L(b)`.
pub fn union(a: &Wfsa, b: &Wfsa) -> Wfsa {
    let mut out = Wfsa::with_states(1, 0);
    let oa = append(&mut out, a);
    let ob = append(&mut out, b);
    out.add_arc(0, Arc::new(ArcLabel::Epsilon, 0.0, a.start() + oa));
    out.add_arc(0, Arc::new(ArcLabel::Epsilon, 0.0, b.start() + ob));
    out
}

/// Accepts the union of all operands; an empty slice gives the empty
/// language.
pub fn union_many(items: &[Wfsa]) -> Wfsa {
    let mut out = Wfsa::with_states(1, 0);
    for w in items {
        let off = append(&mut out, w);
        out.add_arc(0, Arc::new(ArcLabel::Epsilon, 0.0, w.start() + off));
    }
    out
}

/// Accepts `L(a) · L(b)`.
pub fn concat(a: &Wfsa, b: &Wfsa) -> Wfsa {
    let mut out = Wfsa::with_states(1, 0);
    let oa = append(&mut out, a);
    let ob = append(&mut out, b);
    out.add_arc(0, Arc::new(ArcLabel::Epsilon, 0.0, a.start() + oa));
    for f in a.finals().collect::<Vec<_>>() {
        let w = a.final_weight(f);
        out.set_final(f + oa, TropicalWeight::ZERO);
        out.add_arc(
            f + oa,
            Arc {
                label: ArcLabel::Epsilon,
                weight: w,
                next: b.start() + ob,
            },
        );
    }
    out
}

/// Accepts `L(a)*` (including the empty string).
pub fn closure(a: &Wfsa) -> Wfsa {
    let mut out = Wfsa::with_states(1, 0);
    let oa = append(&mut out, a);
    out.set_final(0, TropicalWeight::ONE);
    out.add_arc(0, Arc::new(ArcLabel::Epsilon, 0.0, a.start() + oa));
    for f in a.finals().collect::<Vec<_>>() {
        let w = a.final_weight(f);
        out.set_final(f + oa, TropicalWeight::ZERO);
        out.add_arc(
            f + oa,
            Arc {
                label: ArcLabel::Epsilon,
                weight: w,
                next: 0,
            },
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::TokenId;

    fn s(ids: &[u32]) -> Vec<TokenId> {
        ids.iter().map(|&i| TokenId(i)).collect()
    }

    #[test]
    fn union_accepts_both() {
        let u = union(&Wfsa::from_string(&s(&[1])), &Wfsa::from_string(&s(&[2])));
        assert!(u.accepts(&s(&[1])));
        assert!(u.accepts(&s(&[2])));
        assert!(!u.accepts(&s(&[1, 2])));
        assert!(!u.accepts(&[]));
    }

    #[test]
    fn concat_joins() {
        let c = concat(&Wfsa::from_string(&s(&[1])), &Wfsa::from_string(&s(&[2, 3])));
        assert!(c.accepts(&s(&[1, 2, 3])));
        assert!(!c.accepts(&s(&[1])));
        assert!(!c.accepts(&s(&[2, 3])));
    }

    #[test]
    fn closure_repeats() {
        let c = closure(&Wfsa::from_string(&s(&[1, 2])));
        assert!(c.accepts(&[]));
        assert!(c.accepts(&s(&[1, 2])));
        assert!(c.accepts(&s(&[1, 2, 1, 2, 1, 2])));
        assert!(!c.accepts(&s(&[1, 2, 1])));
        assert!(!c.accepts(&s(&[2, 1])));
    }
}
