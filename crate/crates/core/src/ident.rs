//! Edge identification types and per-level identification sequences.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CarpetError, Result};

/// How the two pairs of opposite sides of a square (a vacant square or the
/// outer boundary) are glued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IdentType {
    Torus,
    Projective,
    KleinH,
    KleinV,
}

/// Whether crossing a glued square reverses the offset along the entry edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reversal {
    /// Crossing left/right: the row offset is reversed.
    pub horizontal: bool,
    /// Crossing up/down: the column offset is reversed.
    pub vertical: bool,
}

// Orientation convention, indexed like `IdentType::ALL`. KleinH reverses the
// left/right gluing; swapping the two Klein rows gives the transposed convention.
const REVERSALS: [Reversal; 4] = [
    Reversal { horizontal: false, vertical: false },
    Reversal { horizontal: true, vertical: true },
    Reversal { horizontal: true, vertical: false },
    Reversal { horizontal: false, vertical: true },
];

impl IdentType {
    pub const ALL: [IdentType; 4] = [IdentType::Torus, IdentType::Projective, IdentType::KleinH, IdentType::KleinV];

    pub fn reversal(self) -> Reversal {
        REVERSALS[self as usize]
    }

    /// Short code used in sequence strings: `T`, `P`, `Kh`, `Kv`.
    pub fn code(self) -> &'static str {
        match self {
            IdentType::Torus => "T",
            IdentType::Projective => "P",
            IdentType::KleinH => "Kh",
            IdentType::KleinV => "Kv",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IdentType::Torus => "torus",
            IdentType::Projective => "projective",
            IdentType::KleinH => "klein-h",
            IdentType::KleinV => "klein-v",
        }
    }
}

impl fmt::Display for IdentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for IdentType {
    type Err = CarpetError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t" | "torus" => Ok(IdentType::Torus),
            "p" | "projective" => Ok(IdentType::Projective),
            "k" | "kh" | "klein" | "klein-h" | "kleinh" => Ok(IdentType::KleinH),
            "kv" | "klein-v" | "kleinv" => Ok(IdentType::KleinV),
            _ => Err(CarpetError::InvalidSequence(format!("unknown identification type {s:?}"))),
        }
    }
}

/// Identification choices for a level-m carpet: entry 0 glues the outer
/// boundary, entry d (d >= 1) glues the 8^(d-1) holes of side 3^(m-d).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct IdentSequence(Vec<IdentType>);

impl IdentSequence {
    pub fn new(entries: Vec<IdentType>) -> Result<Self> {
        if entries.is_empty() {
            return Err(CarpetError::InvalidSequence("sequence must have at least one entry".into()));
        }
        Ok(IdentSequence(entries))
    }

    /// Constant sequence of length m+1.
    pub fn uniform(t: IdentType, m: u32) -> Self {
        IdentSequence(vec![t; m as usize + 1])
    }

    pub fn entries(&self) -> &[IdentType] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn outer(&self) -> IdentType {
        self.0[0]
    }

    /// The single type if every entry agrees.
    pub fn constant_type(&self) -> Option<IdentType> {
        let first = self.0[0];
        self.0.iter().all(|&t| t == first).then_some(first)
    }

    /// Type gluing a hole of side 3^p in a level-m carpet (p < m).
    pub fn hole_type(&self, m: u32, p: u32) -> IdentType {
        debug_assert!(p < m);
        self.0[(m - p) as usize]
    }

    pub fn check_level(&self, m: u32) -> Result<()> {
        let needed = m as usize + 1;
        if self.0.len() < needed {
            return Err(CarpetError::SequenceTooShort { len: self.0.len(), m, needed });
        }
        Ok(())
    }

    /// First `m + 1` entries: the sequence of the level-m approximant.
    pub fn truncated(&self, m: u32) -> Result<Self> {
        self.check_level(m)?;
        Ok(IdentSequence(self.0[..=m as usize].to_vec()))
    }

    pub fn with_entry(&self, index: usize, t: IdentType) -> Self {
        let mut v = self.0.clone();
        v[index] = t;
        IdentSequence(v)
    }
}

impl fmt::Display for IdentSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.0 {
            f.write_str(t.code())?;
        }
        Ok(())
    }
}

impl FromStr for IdentSequence {
    type Err = CarpetError;

    /// Parses strings like `TTTTT` or `TPKhKvT`. A bare `K` means `Kh`.
    fn from_str(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        let mut chars = s.chars().filter(|c| !c.is_whitespace() && *c != ',').peekable();
        while let Some(c) = chars.next() {
            let t = match c.to_ascii_uppercase() {
                'T' => IdentType::Torus,
                'P' => IdentType::Projective,
                'K' => match chars.peek().map(|c| c.to_ascii_lowercase()) {
                    Some('h') => {
                        chars.next();
                        IdentType::KleinH
                    }
                    Some('v') => {
                        chars.next();
                        IdentType::KleinV
                    }
                    _ => IdentType::KleinH,
                },
                _ => return Err(CarpetError::InvalidSequence(format!("unexpected character {c:?} in {s:?}"))),
            };
            out.push(t);
        }
        IdentSequence::new(out)
    }
}

impl TryFrom<String> for IdentSequence {
    type Error = CarpetError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<IdentSequence> for String {
    fn from(s: IdentSequence) -> String {
        s.to_string()
    }
}
