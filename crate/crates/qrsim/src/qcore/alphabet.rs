use std::sync::Arc;

use super::space::LabeledSpace;
use super::state::StateError;

/// The message alphabet Σ together with the length cap L.
///
/// Ports and buffers operate over words of Σ of length at most L; the
/// empty word ε is always part of the message set. Writing anything
/// longer than L during a run is a hard error, never a silent truncation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
    max_len: usize,
}

impl Alphabet {
    pub fn new<I: IntoIterator<Item = char>>(symbols: I, max_len: usize) -> Result<Self, StateError> {
        let symbols: Vec<char> = symbols.into_iter().collect();
        if symbols.is_empty() {
            return Err(StateError::EmptySpace);
        }
        for (i, c) in symbols.iter().enumerate() {
            if !c.is_ascii_alphanumeric() {
                return Err(StateError::BadSymbol { symbol: *c });
            }
            if symbols[..i].contains(c) {
                return Err(StateError::DuplicateLabel { label: c.to_string() });
            }
        }
        Ok(Alphabet { symbols, max_len })
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// All words of length ≤ `max_len` in (length, lexicographic) order,
    /// starting with ε at index 0.
    pub fn words(&self) -> Vec<String> {
        let mut words = vec![String::new()];
        let mut layer = vec![String::new()];
        for _ in 0..self.max_len {
            let mut next = Vec::with_capacity(layer.len() * self.symbols.len());
            for w in &layer {
                for c in &self.symbols {
                    let mut e = w.clone();
                    e.push(*c);
                    next.push(e);
                }
            }
            words.extend(next.iter().cloned());
            layer = next;
        }
        words
    }

    /// The port state space ℂ^{Σ^{≤L}}.
    pub fn message_space(&self) -> Arc<LabeledSpace> {
        LabeledSpace::shared(self.words()).expect("words are distinct")
    }

    pub fn contains_word(&self, w: &str) -> bool {
        w.chars().count() <= self.max_len && w.chars().all(|c| self.symbols.contains(&c))
    }
}

impl Default for Alphabet {
    /// Σ = {0, 1}, L = 2.
    fn default() -> Self {
        Alphabet::new(['0', '1'], 2).unwrap()
    }
}

/// Parses the unary encoding of a natural number: `1^n` for n ≥ 1.
///
/// Clock ports and the master-clock input carry naturals in this
/// encoding; any other word is not a number (and a buffer will ignore it).
pub(crate) fn parse_unary(word: &str) -> Option<usize> {
    if !word.is_empty() && word.chars().all(|c| c == '1') {
        Some(word.chars().count())
    } else {
        None
    }
}

/// The unary encoding `1^n`.
pub(crate) fn unary(n: usize) -> String {
    "1".repeat(n)
}
