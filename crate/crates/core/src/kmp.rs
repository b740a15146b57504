//! Knuth-Morris-Pratt matching over token sequences.

use crate::token::TokenId;

/// `failure[i]` is the length of the longest proper border of
/// `pattern[..=i]`.
pub fn failure_function(pattern: &[TokenId]) -> Vec<usize> {
    let mut failure = vec![0; pattern.len()];
    let mut k = 0;
    for i in 1..pattern.len() {
        while k > 0 && pattern[i] != pattern[k] {
            k = failure[k - 1];
        }
        if pattern[i] == pattern[k] {
            k += 1;
        }
        failure[i] = k;
    }
    failure
}

/// Streaming matcher. States are `0..=len`; reaching `len` means the
/// pattern occurred, and that state is absorbing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KmpMatcher {
    pattern: Vec<TokenId>,
    failure: Vec<usize>,
}

impl KmpMatcher {
    pub fn new(pattern: &[TokenId]) -> Self {
        KmpMatcher {
            pattern: pattern.to_vec(),
            failure: failure_function(pattern),
        }
    }

    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty()
    }

    pub fn pattern(&self) -> &[TokenId] {
        &self.pattern
    }

    pub fn is_complete(&self, state: usize) -> bool {
        state >= self.pattern.len()
    }

    /// Transition without the absorbing final state: after a full match
    /// the matcher falls back along the failure link and keeps scanning.
    pub fn step(&self, mut state: usize, token: TokenId) -> usize {
        if state == self.pattern.len() {
            state = self.failure[state - 1];
        }
        while state > 0 && self.pattern[state] != token {
            state = self.failure[state - 1];
        }
        if self.pattern[state] == token {
            state + 1
        } else {
            0
        }
    }

    /// Sticky transition: completed matches stay completed.
    pub fn advance(&self, state: usize, token: TokenId) -> usize {
        if self.is_complete(state) {
            state
        } else {
            self.step(state, token)
        }
    }

    /// Runs the sticky matcher over `tokens` from the initial state.
    pub fn run(&self, tokens: &[TokenId]) -> usize {
        tokens.iter().fold(0, |s, &t| self.advance(s, t))
    }
}
