//! Finite magic-carpet cell graphs.
//!
//! A level-m carpet lives on the 3^m x 3^m grid; cell (i, j) exists iff no
//! base-3 digit position has a 1 in both i and j. Column i grows to the right,
//! row j grows upward. Each cell has four slots (Left, Right, Up, Down); a step
//! that would enter a vacant square comes out on the opposite side of it, with
//! the offset along the edge kept or reversed according to the square's
//! identification type.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CarpetError, Result};
use crate::ident::{IdentSequence, IdentType};

/// Largest level for which finite graphs are materialized (8^7 cells).
pub const MAX_FINITE_LEVEL: u32 = 7;

pub(crate) const POW3: [u64; 41] = {
    let mut t = [1u64; 41];
    let mut k = 1;
    while k < 41 {
        t[k] = t[k - 1] * 3;
        k += 1;
    }
    t
};

pub fn pow3(k: u32) -> u64 {
    POW3[k as usize]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir {
    Left,
    Right,
    Up,
    Down,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::Left, Dir::Right, Dir::Up, Dir::Down];

    pub fn opposite(self) -> Dir {
        match self {
            Dir::Left => Dir::Right,
            Dir::Right => Dir::Left,
            Dir::Up => Dir::Down,
            Dir::Down => Dir::Up,
        }
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Dir::Left | Dir::Right)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraphKind {
    /// Outer boundary identified by `seq[0]`: every slot filled.
    Glued,
    /// Outer boundary left free: slots leaving the square are missing.
    Unglued,
}

/// A cell of the level-m carpet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellAddr {
    pub m: u32,
    pub i: u64,
    pub j: u64,
}

impl CellAddr {
    pub fn new(m: u32, i: u64, j: u64) -> Result<Self> {
        if cell_exists(i, j, m)? {
            Ok(CellAddr { m, i, j })
        } else {
            Err(CarpetError::NoSuchCell { i, j, m })
        }
    }

    pub fn side(&self) -> u64 {
        pow3(self.m)
    }

    pub fn is_on_ring(&self) -> bool {
        let last = self.side() - 1;
        self.i == 0 || self.j == 0 || self.i == last || self.j == last
    }
}

fn base3(mut x: u64, width: u32) -> String {
    let mut digits = vec![b'0'; width as usize];
    for d in digits.iter_mut().rev() {
        *d = b'0' + (x % 3) as u8;
        x /= 3;
    }
    String::from_utf8(digits).expect("ascii digits")
}

fn parse_base3(s: &str) -> Result<u64> {
    s.chars().try_fold(0u64, |acc, c| match c {
        '0'..='2' => Ok(acc * 3 + (c as u64 - '0' as u64)),
        _ => Err(CarpetError::InvalidArgument(format!("bad base-3 digit {c:?} in {s:?}"))),
    })
}

impl CellAddr {
    pub fn i_base3(&self) -> String {
        base3(self.i, self.m)
    }

    pub fn j_base3(&self) -> String {
        base3(self.j, self.m)
    }
}

impl fmt::Display for CellAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i_base3(), self.j_base3())
    }
}

impl FromStr for CellAddr {
    type Err = CarpetError;

    /// Parses the base-3 display form `(1000,0222)`; the level is the digit count.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let (a, b) =
            inner.split_once(',').ok_or_else(|| CarpetError::InvalidArgument(format!("bad cell address {s:?}")))?;
        let (a, b) = (a.trim(), b.trim());
        if a.len() != b.len() {
            return Err(CarpetError::InvalidArgument(format!(
                "cell address {s:?} has digit strings of different lengths"
            )));
        }
        CellAddr::new(a.len() as u32, parse_base3(a)?, parse_base3(b)?)
    }
}

/// Digit rule for the Sierpinski carpet at level m.
pub fn cell_exists(i: u64, j: u64, m: u32) -> Result<bool> {
    if m > 40 {
        return Err(CarpetError::LevelTooLarge { m, max: 40 });
    }
    if i >= pow3(m) || j >= pow3(m) {
        return Err(CarpetError::OutOfRange { i, j, m });
    }
    Ok(exists_unchecked(i, j, m))
}

pub(crate) fn exists_unchecked(mut i: u64, mut j: u64, m: u32) -> bool {
    for _ in 0..m {
        if i % 3 == 1 && j % 3 == 1 {
            return false;
        }
        i /= 3;
        j /= 3;
    }
    true
}

/// Exponent p of the largest vacant square (side 3^p) containing (i, j), if any.
fn enclosing_hole(i: u64, j: u64, m: u32) -> Option<u32> {
    (0..m).rev().find(|&p| (i / pow3(p)) % 3 == 1 && (j / pow3(p)) % 3 == 1)
}

/// Position reached after crossing a glued square of side `s` whose lower-left
/// cell is (`hx`, `hy`), entered from (`i`, `j`) moving in `dir`.
fn cross_square(i: u64, j: u64, dir: Dir, hx: i64, hy: i64, s: i64, t: IdentType) -> (i64, i64) {
    let rev = t.reversal();
    let (i, j) = (i as i64, j as i64);
    let reflect = |offset: i64, flip: bool| if flip { s - 1 - offset } else { offset };
    match dir {
        Dir::Right => (hx + s, hy + reflect(j - hy, rev.horizontal)),
        Dir::Left => (hx - 1, hy + reflect(j - hy, rev.horizontal)),
        Dir::Up => (hx + reflect(i - hx, rev.vertical), hy + s),
        Dir::Down => (hx + reflect(i - hx, rev.vertical), hy - 1),
    }
}

/// One step from `addr`. Returns `None` only for an unglued carpet when the
/// step leaves the outer square.
pub fn resolve_step(addr: CellAddr, dir: Dir, seq: &IdentSequence, kind: GraphKind) -> Option<CellAddr> {
    let m = addr.m;
    let n = pow3(m) as i64;
    let (i, j) = (addr.i as i64, addr.j as i64);
    let (a, b) = match dir {
        Dir::Left => (i - 1, j),
        Dir::Right => (i + 1, j),
        Dir::Up => (i, j + 1),
        Dir::Down => (i, j - 1),
    };
    if a < 0 || b < 0 || a >= n || b >= n {
        return match kind {
            GraphKind::Unglued => None,
            GraphKind::Glued => {
                // the outer boundary is a square of side 3^m with lower-left
                // corner at (0, 0); leaving it is entering it from outside
                let (x, y) = cross_square(addr.i, addr.j, dir, 0, 0, n, seq.outer());
                let (x, y) = match dir {
                    Dir::Right => (0, y),
                    Dir::Left => (n - 1, y),
                    Dir::Up => (x, 0),
                    Dir::Down => (x, n - 1),
                };
                Some(CellAddr { m, i: x as u64, j: y as u64 })
            }
        };
    }
    let (a, b) = (a as u64, b as u64);
    match enclosing_hole(a, b, m) {
        None => Some(CellAddr { m, i: a, j: b }),
        Some(p) => {
            let s = pow3(p);
            let (hx, hy) = ((a / s) * s, (b / s) * s);
            let t = seq.hole_type(m, p);
            let (x, y) = cross_square(addr.i, addr.j, dir, hx as i64, hy as i64, s as i64, t);
            Some(CellAddr { m, i: x as u64, j: y as u64 })
        }
    }
}

const NONE: u32 = u32::MAX;

/// Finite cell graph with four directed neighbor slots per cell.
#[derive(Debug, Clone)]
pub struct CarpetGraph {
    m: u32,
    seq: IdentSequence,
    kind: GraphKind,
    cells: Vec<CellAddr>,
    lookup: Vec<u32>,
    slots: Vec<[u32; 4]>,
    boundary: Vec<bool>,
}

pub fn build_glued(m: u32, seq: &IdentSequence) -> Result<CarpetGraph> {
    CarpetGraph::build(m, seq, GraphKind::Glued)
}

pub fn build_unglued(m: u32, seq: &IdentSequence) -> Result<CarpetGraph> {
    CarpetGraph::build(m, seq, GraphKind::Unglued)
}

impl CarpetGraph {
    pub fn build(m: u32, seq: &IdentSequence, kind: GraphKind) -> Result<Self> {
        if m > MAX_FINITE_LEVEL {
            return Err(CarpetError::LevelTooLarge { m, max: MAX_FINITE_LEVEL });
        }
        seq.check_level(m)?;
        let n = pow3(m);
        let mut lookup = vec![NONE; (n * n) as usize];
        let mut cells = Vec::with_capacity(8usize.pow(m));
        for j in 0..n {
            for i in 0..n {
                if exists_unchecked(i, j, m) {
                    lookup[(j * n + i) as usize] = cells.len() as u32;
                    cells.push(CellAddr { m, i, j });
                }
            }
        }
        let slots = cells
            .iter()
            .map(|&c| {
                let mut s = [NONE; 4];
                for d in Dir::ALL {
                    if let Some(nb) = resolve_step(c, d, seq, kind) {
                        s[d.index()] = lookup[(nb.j * n + nb.i) as usize];
                        debug_assert_ne!(s[d.index()], NONE);
                    }
                }
                s
            })
            .collect();
        let boundary = cells.iter().map(CellAddr::is_on_ring).collect();
        Ok(CarpetGraph { m, seq: seq.clone(), kind, cells, lookup, slots, boundary })
    }

    pub fn level(&self) -> u32 {
        self.m
    }

    pub fn seq(&self) -> &IdentSequence {
        &self.seq
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn side(&self) -> u64 {
        pow3(self.m)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[CellAddr] {
        &self.cells
    }

    pub fn cell(&self, k: usize) -> CellAddr {
        self.cells[k]
    }

    pub fn index_of(&self, i: u64, j: u64) -> Option<usize> {
        let n = self.side();
        if i >= n || j >= n {
            return None;
        }
        match self.lookup[(j * n + i) as usize] {
            NONE => None,
            k => Some(k as usize),
        }
    }

    pub fn index_of_addr(&self, addr: &CellAddr) -> Result<usize> {
        if addr.m != self.m {
            return Err(CarpetError::InvalidArgument(format!(
                "cell {addr} is at level {} but the graph is level {}",
                addr.m, self.m
            )));
        }
        self.index_of(addr.i, addr.j).ok_or(CarpetError::NoSuchCell { i: addr.i, j: addr.j, m: addr.m })
    }

    pub fn slot(&self, k: usize, dir: Dir) -> Option<usize> {
        match self.slots[k][dir.index()] {
            NONE => None,
            s => Some(s as usize),
        }
    }

    pub fn slots(&self, k: usize) -> [Option<usize>; 4] {
        Dir::ALL.map(|d| self.slot(k, d))
    }

    /// Filled slots of cell k, with multiplicity.
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.slots[k].iter().filter(|&&s| s != NONE).map(|&s| s as usize)
    }

    pub fn degree(&self, k: usize) -> usize {
        self.neighbors(k).count()
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.boundary[k]
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.iter().filter(|&&b| b).count()
    }

    pub fn boundary_cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.boundary[k]).collect()
    }

    pub fn interior_cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| !self.boundary[k]).collect()
    }

    /// Undirected edges as sorted (min, max) index pairs, one entry per slot.
    pub fn edge_multiset(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> =
            (0..self.len()).flat_map(|a| self.neighbors(a).map(move |b| (a.min(b), a.max(b)))).collect();
        edges.sort_unstable();
        edges
    }

    /// Every filled slot a -> b is matched by some slot b -> a.
    pub fn slots_reciprocal(&self) -> bool {
        (0..self.len()).all(|a| {
            self.neighbors(a).all(|b| {
                let forward = self.neighbors(a).filter(|&x| x == b).count();
                let back = self.neighbors(b).filter(|&x| x == a).count();
                forward == back
            })
        })
    }

    /// Checks that `sym` maps the slot multiset of every cell onto the slot
    /// multiset of its image.
    pub fn is_automorphism(&self, sym: Symmetry) -> bool {
        let n = self.side();
        let image = |k: usize| -> Option<usize> {
            let c = self.cells[k];
            let (i, j) = sym.apply(n, c.i, c.j);
            self.index_of(i, j)
        };
        let mut perm = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            match image(k) {
                Some(x) => perm.push(x),
                None => return false,
            }
        }
        (0..self.len()).all(|a| {
            let mut mapped: Vec<usize> = self.neighbors(a).map(|b| perm[b]).collect();
            let mut actual: Vec<usize> = self.neighbors(perm[a]).collect();
            mapped.sort_unstable();
            actual.sort_unstable();
            mapped == actual
        })
    }

    /// Cell permutation induced by a symmetry of the square.
    pub fn permutation(&self, sym: Symmetry) -> Option<Vec<usize>> {
        let n = self.side();
        self.cells
            .iter()
            .map(|c| {
                let (i, j) = sym.apply(n, c.i, c.j);
                self.index_of(i, j)
            })
            .collect()
    }

    /// CSV dump: cell_index, addr_i_base3, addr_j_base3, left, right, up, down, is_boundary.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cell_index,addr_i_base3,addr_j_base3,left,right,up,down,is_boundary")?;
        for (k, c) in self.cells.iter().enumerate() {
            let s = self.slots(k).map(|x| x.map_or(-1, |v| v as i64));
            writeln!(
                w,
                "{k},{},{},{},{},{},{},{}",
                c.i_base3(),
                c.j_base3(),
                s[0],
                s[1],
                s[2],
                s[3],
                u8::from(self.boundary[k])
            )?;
        }
        Ok(())
    }
}

/// The eight symmetries of the square acting on cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symmetry {
    Identity,
    FlipH,
    FlipV,
    Rot180,
    Transpose,
    AntiTranspose,
    Rot90,
    Rot270,
}

impl Symmetry {
    pub const D4: [Symmetry; 8] = [
        Symmetry::Identity,
        Symmetry::FlipH,
        Symmetry::FlipV,
        Symmetry::Rot180,
        Symmetry::Transpose,
        Symmetry::AntiTranspose,
        Symmetry::Rot90,
        Symmetry::Rot270,
    ];

    pub const KLEIN_FOUR: [Symmetry; 4] = [Symmetry::Identity, Symmetry::FlipH, Symmetry::FlipV, Symmetry::Rot180];

    /// Image of cell (i, j) in an n x n grid.
    pub fn apply(self, n: u64, i: u64, j: u64) -> (u64, u64) {
        let l = n - 1;
        match self {
            Symmetry::Identity => (i, j),
            Symmetry::FlipH => (l - i, j),
            Symmetry::FlipV => (i, l - j),
            Symmetry::Rot180 => (l - i, l - j),
            Symmetry::Transpose => (j, i),
            Symmetry::AntiTranspose => (l - j, l - i),
            Symmetry::Rot90 => (l - j, i),
            Symmetry::Rot270 => (j, l - i),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> IdentSequence {
        s.parse().unwrap()
    }

    #[test]
    fn cell_exists_examples() {
        assert!(!cell_exists(1, 1, 1).unwrap());
        assert!(cell_exists(0, 0, 4).unwrap());
        let count =
            (0..9).flat_map(|i| (0..9).map(move |j| (i, j))).filter(|&(i, j)| cell_exists(i, j, 2).unwrap()).count();
        assert_eq!(count, 64);
        assert!(matches!(cell_exists(9, 0, 2), Err(CarpetError::OutOfRange { .. })));
    }

    #[test]
    fn display_convention() {
        let c = CellAddr::new(4, 27, 26).unwrap();
        assert_eq!(c.to_string(), "(1000,0222)");
        assert_eq!("(1000,0222)".parse::<CellAddr>().unwrap(), c);
        assert!("(1111,1111)".parse::<CellAddr>().is_err());
    }

    #[test]
    fn resolve_step_examples() {
        let t1 = seq("TT");
        let c = |i, j| CellAddr { m: 1, i, j };
        assert_eq!(resolve_step(c(1, 0), Dir::Up, &t1, GraphKind::Glued), Some(c(1, 2)));
        assert_eq!(resolve_step(c(0, 1), Dir::Left, &t1, GraphKind::Glued), Some(c(2, 1)));
        let p1 = seq("PP");
        assert_eq!(resolve_step(c(0, 0), Dir::Left, &p1, GraphKind::Glued), Some(c(2, 2)));
        assert_eq!(resolve_step(c(0, 0), Dir::Left, &p1, GraphKind::Unglued), None);
    }

    #[test]
    fn glued_level_one_torus() {
        let g = build_glued(1, &seq("TT")).unwrap();
        assert_eq!(g.len(), 8);
        let k = g.index_of(1, 0).unwrap();
        let top = g.index_of(1, 2).unwrap();
        assert_eq!(g.slot(k, Dir::Up), Some(top));
        assert_eq!(g.slot(k, Dir::Down), Some(top));
        assert!((0..g.len()).all(|k| g.degree(k) == 4));
    }

    #[test]
    fn unglued_counts() {
        let g = build_unglued(2, &seq("TTT")).unwrap();
        assert_eq!(g.boundary_count(), 32);
        let g1 = build_unglued(1, &seq("TT")).unwrap();
        assert_eq!(g1.degree(g1.index_of(0, 0).unwrap()), 2);
        let g3 = build_unglued(3, &seq("TTTT")).unwrap();
        assert_eq!(g3.len(), 512);
        for k in g3.interior_cells() {
            assert_eq!(g3.degree(k), 4);
        }
        for k in g3.boundary_cells() {
            let c = g3.cell(k);
            let outward = [c.i == 0, c.i == 26, c.j == 26, c.j == 0];
            for (d, out) in Dir::ALL.into_iter().zip(outward) {
                assert_eq!(g3.slot(k, d).is_none(), out, "cell {c} dir {d:?}");
            }
        }
    }

    #[test]
    fn smallest_hole_type_is_irrelevant_at_level_one() {
        let a = build_glued(1, &seq("TT")).unwrap();
        let b = build_glued(1, &seq("TP")).unwrap();
        assert_eq!(a.edge_multiset(), b.edge_multiset());
    }

    #[test]
    fn csv_dump_marks_missing() {
        let g = build_unglued(1, &seq("TT")).unwrap();
        let mut out = Vec::new();
        g.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "cell_index,addr_i_base3,addr_j_base3,left,right,up,down,is_boundary");
        assert_eq!(lines.next().unwrap(), "0,0,0,-1,1,3,-1,1");
        assert_eq!(text.lines().count(), 9);
    }
}
