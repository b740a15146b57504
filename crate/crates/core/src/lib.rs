//! Constrained decoding of directed acyclic token lattices.
//!
//! A lattice ([`dag::Dag`]) is pruned and converted to a weighted acceptor
//! over the tropical semiring ([`wfsa::Wfsa`]). Phrase, vocabulary and
//! length constraints are then applied by intersection and length-bucketed
//! Viterbi search. Beam decoders that work on the lattice directly live in
//! [`cbs`], and the constraint error metrics in [`metrics`].

pub mod cbs;
pub mod constraints;
pub mod dag;
pub mod kmp;
pub mod length;
pub mod metrics;
pub mod pipeline;
pub mod token;
pub mod wfsa;
