//! Graph distances on finite carpets and ball growth in blowups.
//!
//! Balls are strict: B(x, r) = { y : d(x, y) < r }.

use std::collections::VecDeque;
use std::io::Write;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{CarpetError, Result};
use crate::ident::IdentType;
use crate::oracle::{BlowupOracle, ExtAddr, MAX_BLOWUP_LEVEL};
use crate::topology::{exists_unchecked, pow3, CarpetGraph, Dir};

/// BFS distances from `source`; cells farther than `limit` (or unreachable) are `None`.
pub fn bfs_distances(g: &CarpetGraph, source: usize, limit: Option<u32>) -> Vec<Option<u32>> {
    multi_source_distances(g, &[source], limit)
}

/// Distance to the nearest of `sources`.
pub fn multi_source_distances(g: &CarpetGraph, sources: &[usize], limit: Option<u32>) -> Vec<Option<u32>> {
    let limit = limit.unwrap_or(u32::MAX);
    let mut dist = vec![None; g.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if dist[s].is_none() {
            dist[s] = Some(0);
            queue.push_back(s);
        }
    }
    while let Some(a) = queue.pop_front() {
        let d = dist[a].expect("queued cells have distances");
        if d >= limit {
            continue;
        }
        for b in g.neighbors(a) {
            if dist[b].is_none() {
                dist[b] = Some(d + 1);
                queue.push_back(b);
            }
        }
    }
    dist
}

pub fn eccentricity(g: &CarpetGraph, source: usize) -> Result<u32> {
    let dist = bfs_distances(g, source, None);
    let reached = dist.iter().filter(|d| d.is_some()).count();
    if reached < g.len() {
        return Err(CarpetError::Disconnected { reached, total: g.len() });
    }
    Ok(dist.into_iter().flatten().max().unwrap_or(0))
}

/// r_m = 2^(m+2) - 6: corner-to-anywhere reach in a non-projective V_m.
pub fn r_m(m: u32) -> u64 {
    assert!(m >= 1, "r_m is defined for m >= 1");
    (1u64 << (m + 2)) - 6
}

/// R_0 = 0, R_{m+1} = max(2 R_m + 3, 2 R_m + 2^m + 1): the projective analogue.
pub fn big_r_m(m: u32) -> u64 {
    (0..m).fold(0u64, |r, k| (2 * r + 3).max(2 * r + (1u64 << k) + 1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthSequences {
    /// Levels 1..=m_max.
    pub m: Vec<u32>,
    pub r: Vec<u64>,
    pub big_r: Vec<u64>,
}

pub fn growth_sequences(m_max: u32) -> Result<GrowthSequences> {
    if !(2..=60).contains(&m_max) {
        return Err(CarpetError::InvalidArgument(format!("m_max must be in 2..=60, got {m_max}")));
    }
    let m: Vec<u32> = (1..=m_max).collect();
    Ok(GrowthSequences { r: m.iter().map(|&k| r_m(k)).collect(), big_r: m.iter().map(|&k| big_r_m(k)).collect(), m })
}

/// Smallest window level whose reach bound covers twice the radius.
pub fn window_level_for_radius(projective: bool, radius: u64) -> u32 {
    let reach = |m: u32| if projective { big_r_m(m) } else { r_m(m) };
    (1..MAX_BLOWUP_LEVEL).find(|&m| reach(m) >= 2 * radius).unwrap_or(MAX_BLOWUP_LEVEL)
}

/// Visited set over a 3^level window: a dense directory of lazily allocated
/// square bit pages.
struct PagedBitset {
    page_exp: u32,
    dir_side: u64,
    pages: Vec<Option<Box<[u64]>>>,
}

impl PagedBitset {
    fn new(level: u32) -> Self {
        let page_exp = level.saturating_sub(6).max(5).min(level);
        let dir_side = pow3(level - page_exp);
        PagedBitset { page_exp, dir_side, pages: vec![None; (dir_side * dir_side) as usize] }
    }

    /// Marks (i, j); true if it was not marked before.
    #[inline]
    fn insert(&mut self, i: u64, j: u64) -> bool {
        let ps = pow3(self.page_exp);
        let key = ((j / ps) * self.dir_side + i / ps) as usize;
        let page =
            self.pages[key].get_or_insert_with(|| vec![0u64; (ps * ps).div_ceil(64) as usize].into_boxed_slice());
        let bit = (j % ps) * ps + i % ps;
        let (w, b) = ((bit / 64) as usize, bit % 64);
        let fresh = page[w] >> b & 1 == 0;
        page[w] |= 1 << b;
        fresh
    }
}

/// Layered BFS inside the level-`level` window. `visit` sees every cell with
/// its distance (< `r_max`) and may stop the search. Returns shell sizes.
///
/// A window exit reachable from a cell at distance <= r_max - 2 could hide a
/// shorter path, so it is reported as `WindowTooSmall`.
fn window_bfs<F>(o: &BlowupOracle, level: u32, start: (u64, u64), r_max: u64, mut visit: F) -> Result<Vec<u64>>
where
    F: FnMut(u64, u64, u64) -> ControlFlow<()>,
{
    if r_max == 0 {
        return Ok(Vec::new());
    }
    let mut seen = PagedBitset::new(level);
    seen.insert(start.0, start.1);
    let mut shells = vec![1u64];
    if visit(start.0, start.1, 0).is_break() {
        return Ok(shells);
    }
    let mut frontier = vec![start];
    for d in 1..r_max {
        let mut next = Vec::with_capacity(frontier.len() + frontier.len() / 2);
        for &(i, j) in &frontier {
            for dir in Dir::ALL {
                let (a, b) =
                    o.step_window(level, i, j, dir).ok_or(CarpetError::WindowTooSmall { level, radius: r_max })?;
                if seen.insert(a, b) {
                    if visit(a, b, d).is_break() {
                        shells.push(next.len() as u64 + 1);
                        return Ok(shells);
                    }
                    next.push((a, b));
                }
            }
        }
        shells.push(next.len() as u64);
        frontier = next;
    }
    Ok(shells)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallSeries {
    pub source: ExtAddr,
    pub window_level: u32,
    /// counts[r - 1] = #B(source, r) for r = 1..=r_max.
    pub counts: Vec<u64>,
}

impl BallSeries {
    pub fn r_max(&self) -> u64 {
        self.counts.len() as u64
    }

    pub fn count(&self, r: u64) -> u64 {
        self.counts[(r - 1) as usize]
    }

    pub fn ratio(&self, r: u64) -> f64 {
        self.count(r) as f64 / (r as f64).powi(3)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# strict balls: count = #{{y : d(x, y) < r}}")?;
        writeln!(w, "r,count,count_over_r3")?;
        for r in 1..=self.r_max() {
            writeln!(w, "{r},{},{:.9e}", self.count(r), self.ratio(r))?;
        }
        Ok(())
    }
}

/// Exact strict-ball counts for r = 1..=r_max inside a fixed window.
pub fn ball_series(o: &BlowupOracle, source: ExtAddr, r_max: u64, level: u32) -> Result<BallSeries> {
    if r_max == 0 {
        return Err(CarpetError::InvalidArgument("r_max must be at least 1".into()));
    }
    let s = o.lift(source, level.max(source.level))?;
    let shells = window_bfs(o, s.level, (s.i, s.j), r_max, |_, _, _| ControlFlow::Continue(()))?;
    let counts = shells
        .iter()
        .scan(0u64, |acc, &n| {
            *acc += n;
            Some(*acc)
        })
        .collect();
    Ok(BallSeries { source, window_level: s.level, counts })
}

fn needs_projective_reach(o: &BlowupOracle) -> bool {
    o.rule().entries().contains(&IdentType::Projective)
}

/// `ball_series` starting from the sizing rule and widening the window until
/// no exit is reachable.
pub fn ball_series_auto(o: &BlowupOracle, source: ExtAddr, r_max: u64) -> Result<BallSeries> {
    let mut level = window_level_for_radius(needs_projective_reach(o), r_max).max(source.level);
    loop {
        match ball_series(o, source, r_max, level) {
            Err(CarpetError::WindowTooSmall { .. }) if level < MAX_BLOWUP_LEVEL - 1 => level += 1,
            other => return other,
        }
    }
}

/// Blowup distance between two cells, searching up to `max` steps.
pub fn blowup_distance(o: &BlowupOracle, x: ExtAddr, y: ExtAddr, max: u64) -> Result<Option<u64>> {
    let mut level = window_level_for_radius(needs_projective_reach(o), max + 1).max(x.level).max(y.level);
    loop {
        let (a, b) = (o.lift(x, level)?, o.lift(y, level)?);
        let mut found = None;
        let res = window_bfs(o, level, (a.i, a.j), max + 1, |i, j, d| {
            if (i, j) == (b.i, b.j) {
                found = Some(d);
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        match res {
            Ok(_) => return Ok(found),
            Err(CarpetError::WindowTooSmall { .. }) if found.is_none() && level < MAX_BLOWUP_LEVEL - 1 => level += 1,
            Err(e) => return Err(e),
        }
    }
}

/// Cells of B(source, r) in window coordinates at `level`.
pub fn ball_cells(o: &BlowupOracle, source: ExtAddr, r: u64, level: u32) -> Result<Vec<(u64, u64)>> {
    let s = o.lift(source, level.max(source.level))?;
    let mut out = Vec::new();
    window_bfs(o, s.level, (s.i, s.j), r, |i, j, _| {
        out.push((i, j));
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// Copies of V_m (blocks of side 3^m in the level-`level` window) sharing a
/// corner vertex with the copy containing `source`, the source copy included.
/// Corners on a vacant square's edge are identified across it.
pub fn corner_sharing_copies(o: &BlowupOracle, source: ExtAddr, m: u32, level: u32) -> Result<Vec<(u64, u64)>> {
    let s = o.lift(source, level.max(source.level))?;
    let level = s.level;
    if m >= level {
        return Err(CarpetError::WindowTooSmall { level, radius: pow3(m) });
    }
    let blocks_level = level - m;
    let nb = pow3(blocks_level);
    let z = (s.i / pow3(m), s.j / pow3(m));

    let mut copies = Vec::new();
    for corner in [(z.0, z.1), (z.0 + 1, z.1), (z.0, z.1 + 1), (z.0 + 1, z.1 + 1)] {
        for (x, y) in vertex_class(o, corner, m, blocks_level)? {
            for (a, b) in
                [(x.wrapping_sub(1), y.wrapping_sub(1)), (x, y.wrapping_sub(1)), (x.wrapping_sub(1), y), (x, y)]
            {
                if a < nb && b < nb && exists_unchecked(a, b, blocks_level) && !copies.contains(&(a, b)) {
                    copies.push((a, b));
                }
            }
        }
    }
    copies.sort_unstable();
    Ok(copies)
}

/// Lattice points identified with `p` (block units) through the unique vacant
/// square, if any, whose boundary passes through `p`.
fn vertex_class(o: &BlowupOracle, p: (u64, u64), m: u32, blocks_level: u32) -> Result<Vec<(u64, u64)>> {
    let nb = pow3(blocks_level);
    if p.0 == 0 || p.1 == 0 || p.0 >= nb || p.1 >= nb {
        return Err(CarpetError::WindowTooSmall { level: blocks_level + m, radius: pow3(m) });
    }
    for q in 0..blocks_level {
        let s = pow3(q);
        let (u, v) = (p.0 % (3 * s), p.1 % (3 * s));
        if !(s..=2 * s).contains(&u) || !(s..=2 * s).contains(&v) {
            continue;
        }
        if u != s && u != 2 * s && v != s && v != 2 * s {
            // strictly inside a vacant square: not a lattice point of any cell
            return Ok(vec![p]);
        }
        let (hx, hy) = (p.0 - u + s, p.1 - v + s);
        let rev = o.rule().at(q + m).reversal();
        let image = |(x, y): (u64, u64)| -> Vec<(u64, u64)> {
            let mut out = Vec::new();
            let flip = |t: u64, f: bool| if f { s - t } else { t };
            if y == hy {
                out.push((hx + flip(x - hx, rev.vertical), hy + s));
            }
            if y == hy + s {
                out.push((hx + flip(x - hx, rev.vertical), hy));
            }
            if x == hx {
                out.push((hx + s, hy + flip(y - hy, rev.horizontal)));
            }
            if x == hx + s {
                out.push((hx, hy + flip(y - hy, rev.horizontal)));
            }
            out
        };
        let mut class = vec![p];
        let mut k = 0;
        while k < class.len() {
            for w in image(class[k]) {
                if !class.contains(&w) {
                    class.push(w);
                }
            }
            k += 1;
        }
        return Ok(class);
    }
    Ok(vec![p])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ident::IdentSequence;
    use crate::topology::build_unglued;

    #[test]
    fn growth_sequence_values() {
        let g = growth_sequences(4).unwrap();
        assert_eq!(g.r, vec![2, 10, 26, 58]);
        assert_eq!(g.big_r, vec![3, 9, 23, 55]);
        assert!(growth_sequences(1).is_err());
    }

    #[test]
    fn corner_eccentricities_of_v2() {
        let ecc = |t| {
            let g = build_unglued(2, &IdentSequence::uniform(t, 2)).unwrap();
            eccentricity(&g, 0).unwrap()
        };
        assert_eq!(ecc(IdentType::Torus), 10);
        assert_eq!(ecc(IdentType::KleinH), 9);
    }

    #[test]
    fn small_balls() {
        let o = BlowupOracle::uniform(IdentType::Torus);
        let b = ball_series_auto(&o, ExtAddr::origin(), 6).unwrap();
        assert_eq!(&b.counts[..2], &[1, 5]);
        assert!(b.counts.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn too_small_window_is_an_error() {
        let o = BlowupOracle::uniform(IdentType::Torus);
        let r = ball_series(&o, ExtAddr::origin(), 40, 3);
        assert!(matches!(r, Err(CarpetError::WindowTooSmall { .. })));
    }

    #[test]
    fn neighbors_at_distance_one() {
        let o = BlowupOracle::uniform(IdentType::Projective);
        let x = ExtAddr::new(4, 20, 21).unwrap();
        for n in o.neighbors(x).unwrap() {
            assert_eq!(blowup_distance(&o, x, n, 3).unwrap(), Some(1));
        }
    }

    #[test]
    fn paged_bitset_marks_once() {
        let mut s = PagedBitset::new(7);
        assert!(s.insert(2186, 0));
        assert!(!s.insert(2186, 0));
        assert!(s.insert(0, 2186));
    }
}
