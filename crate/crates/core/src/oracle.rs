//! On-demand neighbor function for the infinite blowup.
//!
//! The blowup is the increasing union of unglued level-k carpets, the level-k
//! carpet sitting at block position `p_k` inside level k+1. Addresses are
//! coordinates in the deepest window expanded so far; stepping off the window
//! lifts the address one level (adds `p_k * 3^k` to each coordinate) and
//! retries. Nothing is materialized.
//!
//! A single step changes one coordinate by one, so only the base-3 digit at
//! the carry position can create a new (1, 1) digit pair. That position is
//! also the size exponent of the vacant square being entered.

use serde::{Deserialize, Serialize};

use crate::error::{CarpetError, Result};
use crate::ident::{IdentSequence, IdentType};
use crate::topology::{pow3, Dir, POW3};

/// Deepest window level representable with 64-bit coordinates.
pub const MAX_BLOWUP_LEVEL: u32 = 40;

/// Where each level sits inside the next. Positions cycle with the list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    positions: Vec<(u8, u8)>,
}

impl Embedding {
    pub fn new(positions: Vec<(u8, u8)>) -> Result<Self> {
        if positions.is_empty() {
            return Err(CarpetError::InvalidArgument("embedding needs at least one position".into()));
        }
        for &(a, b) in &positions {
            if a > 2 || b > 2 || (a, b) == (1, 1) {
                return Err(CarpetError::InvalidArgument(format!("invalid embedding position ({a},{b})")));
            }
        }
        Ok(Embedding { positions })
    }

    /// Opposite corners in turn: (0,0) at even levels, (2,2) at odd ones.
    pub fn alternating() -> Self {
        Embedding { positions: vec![(0, 0), (2, 2)] }
    }

    pub fn position(&self, k: u32) -> (u8, u8) {
        self.positions[k as usize % self.positions.len()]
    }
}

impl Default for Embedding {
    fn default() -> Self {
        Embedding::alternating()
    }
}

/// Identification type of each hole generation, indexed by size exponent
/// (entry p glues holes of side 3^p). The last entry repeats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleRule {
    by_size: Vec<IdentType>,
}

impl HoleRule {
    pub fn uniform(t: IdentType) -> Self {
        HoleRule { by_size: vec![t] }
    }

    pub fn by_size(by_size: Vec<IdentType>) -> Result<Self> {
        if by_size.is_empty() {
            return Err(CarpetError::InvalidArgument("hole rule needs at least one entry".into()));
        }
        Ok(HoleRule { by_size })
    }

    /// The hole types of a finite level-m carpet, so that the level-m window
    /// reproduces its interior stitches.
    pub fn from_sequence(seq: &IdentSequence, m: u32) -> Result<Self> {
        seq.check_level(m)?;
        if m == 0 {
            return Ok(HoleRule::uniform(seq.outer()));
        }
        Ok(HoleRule { by_size: (0..m).map(|p| seq.hole_type(m, p)).collect() })
    }

    pub fn entries(&self) -> &[IdentType] {
        &self.by_size
    }

    pub fn at(&self, p: u32) -> IdentType {
        let k = (p as usize).min(self.by_size.len() - 1);
        self.by_size[k]
    }
}

/// Cell of the blowup, in window-level coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExtAddr {
    pub level: u32,
    pub i: u64,
    pub j: u64,
}

impl ExtAddr {
    /// The level-0 cell: lower-left corner at the origin before identification.
    pub fn origin() -> Self {
        ExtAddr { level: 0, i: 0, j: 0 }
    }

    pub fn new(level: u32, i: u64, j: u64) -> Result<Self> {
        if level > MAX_BLOWUP_LEVEL {
            return Err(CarpetError::LevelTooLarge { m: level, max: MAX_BLOWUP_LEVEL });
        }
        if crate::topology::cell_exists(i, j, level)? {
            Ok(ExtAddr { level, i, j })
        } else {
            Err(CarpetError::NoSuchCell { i, j, m: level })
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowupOracle {
    rule: HoleRule,
    embedding: Embedding,
}

/// Lowest non-zero base-3 digit of x > 0: (position, digit).
#[inline]
fn lowest_nonzero_digit(mut x: u64) -> (u32, u64) {
    let mut c = 0;
    loop {
        let d = x % 3;
        if d != 0 {
            return (c, d);
        }
        x /= 3;
        c += 1;
    }
}

#[inline]
fn digit(x: u64, c: u32) -> u64 {
    (x / POW3[c as usize]) % 3
}

/// Reverse the offset of x inside its aligned block of side 3^c.
#[inline]
fn reflect_low(x: u64, c: u32) -> u64 {
    let s = POW3[c as usize];
    let low = x % s;
    x - low + (s - 1 - low)
}

impl BlowupOracle {
    pub fn new(rule: HoleRule, embedding: Embedding) -> Self {
        BlowupOracle { rule, embedding }
    }

    pub fn uniform(t: IdentType) -> Self {
        BlowupOracle::new(HoleRule::uniform(t), Embedding::default())
    }

    pub fn rule(&self) -> &HoleRule {
        &self.rule
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    /// Re-express `addr` in the window of level `to` (>= addr.level).
    pub fn lift(&self, addr: ExtAddr, to: u32) -> Result<ExtAddr> {
        if to > MAX_BLOWUP_LEVEL {
            return Err(CarpetError::LevelTooLarge { m: to, max: MAX_BLOWUP_LEVEL });
        }
        let mut a = addr;
        while a.level < to {
            let (px, py) = self.embedding.position(a.level);
            let s = pow3(a.level);
            a = ExtAddr { level: a.level + 1, i: a.i + px as u64 * s, j: a.j + py as u64 * s };
        }
        Ok(a)
    }

    /// Equality of blowup cells given in possibly different windows.
    pub fn same_cell(&self, a: ExtAddr, b: ExtAddr) -> Result<bool> {
        let level = a.level.max(b.level);
        Ok(self.lift(a, level)? == self.lift(b, level)?)
    }

    /// One step inside the level-`level` window; `None` if it leaves the window.
    #[inline]
    pub fn step_window(&self, level: u32, i: u64, j: u64, dir: Dir) -> Option<(u64, u64)> {
        let n = POW3[level as usize];
        match dir {
            Dir::Right => {
                let a = i + 1;
                if a == n {
                    return None;
                }
                let (c, d) = lowest_nonzero_digit(a);
                if d == 1 && digit(j, c) == 1 {
                    let flip = self.rule.at(c).reversal().horizontal;
                    Some((a + POW3[c as usize], if flip { reflect_low(j, c) } else { j }))
                } else {
                    Some((a, j))
                }
            }
            Dir::Left => {
                if i == 0 {
                    return None;
                }
                let (c, d) = lowest_nonzero_digit(i);
                let a = i - 1;
                if d - 1 == 1 && digit(j, c) == 1 {
                    let flip = self.rule.at(c).reversal().horizontal;
                    Some((a - POW3[c as usize], if flip { reflect_low(j, c) } else { j }))
                } else {
                    Some((a, j))
                }
            }
            Dir::Up => {
                let b = j + 1;
                if b == n {
                    return None;
                }
                let (c, d) = lowest_nonzero_digit(b);
                if d == 1 && digit(i, c) == 1 {
                    let flip = self.rule.at(c).reversal().vertical;
                    Some((if flip { reflect_low(i, c) } else { i }, b + POW3[c as usize]))
                } else {
                    Some((i, b))
                }
            }
            Dir::Down => {
                if j == 0 {
                    return None;
                }
                let (c, d) = lowest_nonzero_digit(j);
                let b = j - 1;
                if d - 1 == 1 && digit(i, c) == 1 {
                    let flip = self.rule.at(c).reversal().vertical;
                    Some((if flip { reflect_low(i, c) } else { i }, b - POW3[c as usize]))
                } else {
                    Some((i, b))
                }
            }
        }
    }

    /// One step in the blowup, expanding the window as needed.
    pub fn step(&self, addr: ExtAddr, dir: Dir) -> Result<ExtAddr> {
        let mut a = addr;
        loop {
            if let Some((i, j)) = self.step_window(a.level, a.i, a.j, dir) {
                return Ok(ExtAddr { level: a.level, i, j });
            }
            if a.level >= MAX_BLOWUP_LEVEL - 1 {
                return Err(CarpetError::LevelTooLarge { m: a.level + 1, max: MAX_BLOWUP_LEVEL - 1 });
            }
            a = self.lift(a, a.level + 1)?;
        }
    }

    /// Left, Right, Up, Down neighbors.
    pub fn neighbors(&self, addr: ExtAddr) -> Result<[ExtAddr; 4]> {
        Ok([
            self.step(addr, Dir::Left)?,
            self.step(addr, Dir::Right)?,
            self.step(addr, Dir::Up)?,
            self.step(addr, Dir::Down)?,
        ])
    }
}
