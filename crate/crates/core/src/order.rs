//! Ordered invariant values: words, pairs of words, tuples, and the
//! center-selection value for the terminal monomial phase.
//!
//! The engine's control flow rests on three total orders:
//!
//! * [`Word`] — a finite sequence of rationals compared letter by letter;
//!   when one word runs out first, the **shorter word is smaller**.
//! * [`SpadePair`] — the principal invariant: either the distinguished
//!   zero value, or an unordered pair of nonzero words stored as
//!   (min, max) and compared lexicographically word by word.  A pair is
//!   also comparable against a single rational (treated as a one-letter
//!   word C): pair > C iff min(pair) > C, or min(pair) = C ≠ 0.
//! * [`OldTuple`] — the legacy comparison tuple, ordered lexicographically
//!   entry by entry with the same shorter-is-smaller tail rule.
//!
//! [`GammaValue`] orders candidate centers in the terminal phase: first by
//! fewest divisors needed (Γ₁ = -n, so smaller n is larger), then by the
//! larger multiplicity sum (Γ₂), then by the larger index tuple (Γ₃,
//! descending indices compared lexicographically).

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rat::Rat;

/// A finite word of rational letters, compared lexicographically with the
/// shorter-prefix-is-smaller rule.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word(pub Vec<Rat>);

impl Word {
    pub fn single(r: Rat) -> Word {
        Word(vec![r])
    }

    pub fn letters(&self) -> &[Rat] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Whether any letter is zero (or the word is empty).
    pub fn vanishes(&self) -> bool {
        self.0.is_empty() || self.0.iter().any(|r| r.is_zero())
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.cmp(b) {
                Ordering::Equal => continue,
                non_eq => return non_eq,
            }
        }
        // Common prefix equal: the shorter word is the smaller one.
        self.0.len().cmp(&other.0.len())
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, ")")
    }
}

/// The principal invariant: zero, or a pair of nonzero words.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpadePair {
    Zero,
    Pair { min: Word, max: Word },
}

impl SpadePair {
    /// Builds the pair from the two defining words, storing them sorted.
    /// Collapses to `Zero` when either word vanishes (has a zero letter or
    /// is empty).
    pub fn from_words(a: Word, b: Word) -> SpadePair {
        if a.vanishes() || b.vanishes() {
            return SpadePair::Zero;
        }
        if a <= b {
            SpadePair::Pair { min: a, max: b }
        } else {
            SpadePair::Pair { min: b, max: a }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SpadePair::Zero)
    }

    /// Compares the pair against a single rational value C, treated as a
    /// one-letter word: the pair exceeds C iff its smaller word exceeds C,
    /// or equals C with C ≠ 0.
    pub fn cmp_letter(&self, c: Rat) -> Ordering {
        match self {
            SpadePair::Zero => {
                if c.is_zero() {
                    Ordering::Equal
                } else {
                    Ordering::Less
                }
            }
            SpadePair::Pair { min, .. } => {
                let c_word = Word::single(c);
                match min.cmp(&c_word) {
                    Ordering::Equal => {
                        if c.is_zero() {
                            Ordering::Equal
                        } else {
                            Ordering::Greater
                        }
                    }
                    non_eq => non_eq,
                }
            }
        }
    }
}

impl Ord for SpadePair {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (SpadePair::Zero, SpadePair::Zero) => Ordering::Equal,
            (SpadePair::Zero, _) => Ordering::Less,
            (_, SpadePair::Zero) => Ordering::Greater,
            (
                SpadePair::Pair { min: a1, max: a2 },
                SpadePair::Pair { min: b1, max: b2 },
            ) => a1.cmp(b1).then_with(|| a2.cmp(b2)),
        }
    }
}

impl PartialOrd for SpadePair {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for SpadePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpadePair::Zero => write!(f, "0"),
            SpadePair::Pair { min, max } => write!(f, "lex{{{min:?},{max:?}}}"),
        }
    }
}

/// The legacy comparison tuple, lexicographic with shorter-is-smaller tail.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OldTuple(pub Vec<Rat>);

impl Ord for OldTuple {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.cmp(b) {
                Ordering::Equal => continue,
                non_eq => return non_eq,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl PartialOrd for OldTuple {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for OldTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, ")")
    }
}

/// Center-selection value in the terminal phase.
///
/// `NegInfinity` marks points where no divisor subset reaches multiplicity
/// sum 1.  Otherwise the value records the minimal subset size `n`, the
/// maximal multiplicity sum over subsets of that size, and the maximal
/// index tuple (sorted descending) among subsets attaining that sum.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaValue {
    NegInfinity,
    Value {
        n: u32,
        h_sum: Rat,
        indices: Vec<u32>,
    },
}

impl GammaValue {
    pub fn is_neg_infinity(&self) -> bool {
        matches!(self, GammaValue::NegInfinity)
    }
}

impl Ord for GammaValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (GammaValue::NegInfinity, GammaValue::NegInfinity) => Ordering::Equal,
            (GammaValue::NegInfinity, _) => Ordering::Less,
            (_, GammaValue::NegInfinity) => Ordering::Greater,
            (
                GammaValue::Value {
                    n: n1,
                    h_sum: s1,
                    indices: i1,
                },
                GammaValue::Value {
                    n: n2,
                    h_sum: s2,
                    indices: i2,
                },
            ) => {
                // First component is -n: fewer required divisors is larger.
                n2.cmp(n1)
                    .then_with(|| s1.cmp(s2))
                    .then_with(|| i1.cmp(i2))
            }
        }
    }
}

impl PartialOrd for GammaValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for GammaValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaValue::NegInfinity => write!(f, "-inf"),
            GammaValue::Value { n, h_sum, indices } => {
                write!(f, "(-{n},{h_sum},{indices:?})")
            }
        }
    }
}
