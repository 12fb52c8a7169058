//! Finite words over the mode alphabet `Q = {1, .., D}`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A discrete mode, 1-based.
pub type Mode = usize;

/// Largest alphabet for which words have an unambiguous digit-string form.
pub const MAX_PRINTABLE_MODES: usize = 9;

/// Word `q_1 q_2 .. q_k`; the first letter is the first mode applied.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<Mode>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: Vec<Mode>) -> Self {
        Word(letters)
    }

    pub fn letters(&self) -> &[Mode] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn push(&self, letter: Mode) -> Word {
        let mut v = self.0.clone();
        v.push(letter);
        Word(v)
    }

    pub fn prepend(&self, letter: Mode) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(letter);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn first(&self) -> Option<Mode> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<Mode> {
        self.0.last().copied()
    }

    /// Word with the last letter removed (`w` for `w sigma`).
    pub fn without_last(&self) -> Option<Word> {
        (!self.0.is_empty()).then(|| Word(self.0[..self.0.len() - 1].to_vec()))
    }

    /// Word with the first letter removed (`v` for `sigma v`).
    pub fn without_first(&self) -> Option<Word> {
        (!self.0.is_empty()).then(|| Word(self.0[1..].to_vec()))
    }

    pub fn check_alphabet(&self, modes: usize) -> Result<()> {
        match self.0.iter().find(|&&q| q == 0 || q > modes) {
            Some(&letter) => Err(Error::LetterOutOfRange { letter, modes }),
            None => Ok(()),
        }
    }

    /// Parses a digit string such as `"121"`; `""` and `"ε"` denote the
    /// empty word.
    pub fn parse(s: &str) -> Result<Word> {
        let s = s.trim();
        if s.is_empty() || s == "ε" || s == "eps" {
            return Ok(Word::empty());
        }
        s.chars()
            .map(|c| match c.to_digit(10) {
                Some(d) if d >= 1 => Ok(d as Mode),
                _ => Err(Error::Parse(format!("invalid mode letter {c:?} in word {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }

    /// Digit-string form with `""` for the empty word.
    pub fn to_digits(&self) -> String {
        self.0.iter().map(|q| q.to_string()).collect()
    }

    /// Base-`(D+1)` value `phi(v) = q_1 (D+1)^{k-1} + .. + q_k`, `phi(eps) = 0`.
    /// `None` on overflow.
    pub fn order_key(&self, modes: usize) -> Option<u128> {
        let base = modes as u128 + 1;
        self.0
            .iter()
            .try_fold(0u128, |acc, &q| acc.checked_mul(base)?.checked_add(q as u128))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        if self.0.iter().all(|&q| q <= MAX_PRINTABLE_MODES) {
            f.write_str(&self.to_digits())
        } else {
            let parts: Vec<String> = self.0.iter().map(|q| q.to_string()).collect();
            write!(f, "[{}]", parts.join(","))
        }
    }
}

impl From<Vec<Mode>> for Word {
    fn from(v: Vec<Mode>) -> Self {
        Word(v)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_digits())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Word::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Number of words of length at most `depth` over `modes` letters.
pub fn count_words_up_to(modes: usize, depth: usize) -> u128 {
    let mut total: u128 = 0;
    let mut layer: u128 = 1;
    for _ in 0..=depth {
        total = total.saturating_add(layer);
        layer = layer.saturating_mul(modes as u128);
    }
    total
}

/// All words of length at most `depth`, in increasing `order_key` order
/// (shorter words first, lexicographic within a length).
pub fn words_up_to(modes: usize, depth: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut layer = vec![Word::empty()];
    for _ in 0..depth {
        let next: Vec<Word> = layer
            .iter()
            .flat_map(|w| (1..=modes).map(move |q| w.push(q)))
            .collect();
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}
