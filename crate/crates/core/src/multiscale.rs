//! Cross-level operations: tiling an eigenfunction into the eight sub-copies
//! of the next level, averaging back down, periodic extension, and spectral
//! projections built from the glued eigenbasis.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{CarpetError, Result};
use crate::ident::IdentType;
use crate::metric::multi_source_distances;
use crate::spectral::{assemble, LaplacianKind, Operator, Spectrum};
use crate::topology::{pow3, CarpetGraph, GraphKind};

/// Eigen-relation tolerance for tiled and extended functions, relative to ‖v‖.
pub const TILE_TOL: f64 = 1e-10;

/// Below this fraction of the input norm a vector counts as zero.
pub const ZERO_FRACTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flip {
    Identity,
    /// Mirror the column coordinate i.
    H,
    /// Mirror the row coordinate j.
    V,
}

/// Reflection of sub-copy (a, b), a the column block and b the row block, when
/// a level-m function is repeated over level m+1. None for the central hole.
pub fn tile_flip(t: IdentType, a: u64, b: u64) -> Option<Flip> {
    if a == 1 && b == 1 {
        return None;
    }
    let (mid_col, mid_row) = (a == 1, b == 1);
    Some(match t {
        IdentType::Torus => Flip::Identity,
        IdentType::Projective if mid_col => Flip::V,
        IdentType::Projective if mid_row => Flip::H,
        IdentType::KleinH if mid_col => Flip::V,
        IdentType::KleinV if mid_row => Flip::H,
        _ => Flip::Identity,
    })
}

fn constant_glued(g: &CarpetGraph) -> Result<IdentType> {
    if g.kind() != GraphKind::Glued {
        return Err(CarpetError::KindMismatch("multiscale operations need glued graphs".into()));
    }
    g.seq().truncated(g.level())?.constant_type().ok_or_else(|| {
        CarpetError::InvalidArgument("multiscale operations need a constant identification sequence".into())
    })
}

fn check_len(g: &CarpetGraph, values: &[f64]) -> Result<()> {
    if values.len() != g.len() {
        return Err(CarpetError::InvalidArgument(format!(
            "function has {} values, graph has {} cells",
            values.len(),
            g.len()
        )));
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// ‖L v - lambda v‖ / ‖v‖ (0 for v = 0).
pub fn eigen_residual(op: &Operator, v: &[f64], lambda: f64) -> f64 {
    let mut lv = vec![0.0; v.len()];
    op.apply(v, &mut lv);
    let r = lv.iter().zip(v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
    let n = norm(v);
    if n == 0.0 {
        0.0
    } else {
        r / n
    }
}

/// Repeats a level-m function on each of the eight sub-copies of level m+1.
pub fn tile(src: &CarpetGraph, dst: &CarpetGraph, values: &[f64]) -> Result<Vec<f64>> {
    let t = constant_glued(src)?;
    if constant_glued(dst)? != t || dst.level() != src.level() + 1 {
        return Err(CarpetError::InvalidArgument("tiling target must be the next level of the same type".into()));
    }
    check_len(src, values)?;
    let n = pow3(src.level());
    dst.cells()
        .iter()
        .map(|c| {
            let (a, b) = (c.i / n, c.j / n);
            let (mut li, mut lj) = (c.i % n, c.j % n);
            match tile_flip(t, a, b).expect("hole block holds no cells") {
                Flip::Identity => {}
                Flip::H => li = n - 1 - li,
                Flip::V => lj = n - 1 - lj,
            }
            let k = src.index_of(li, lj).expect("sub-copy cell exists at the lower level");
            Ok(values[k])
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TiledFunction {
    pub source_level: u32,
    pub target_level: u32,
    pub eigenvalue: f64,
    pub values: Vec<f64>,
    pub residual: f64,
}

/// Tiles glued eigenvector k of `spec` and verifies it stays an eigenvector.
pub fn tile_eigenfunction(spec: &Spectrum, k: usize, src: &CarpetGraph, dst: &CarpetGraph) -> Result<TiledFunction> {
    if spec.kind != LaplacianKind::CombinatorialGlued || spec.m != src.level() {
        return Err(CarpetError::InvalidArgument("tiling needs a glued spectrum of the source level".into()));
    }
    let values = tile(src, dst, &spec.vector_on_cells(k))?;
    let lambda = spec.eigenvalues[k];
    let residual = eigen_residual(&assemble(dst, LaplacianKind::CombinatorialGlued)?, &values, lambda);
    if !(residual <= TILE_TOL) {
        return Err(CarpetError::NumericCheck(format!(
            "tiled eigenvector {k} has residual {residual:e}; the reflection convention is wrong"
        )));
    }
    Ok(TiledFunction { source_level: src.level(), target_level: dst.level(), eigenvalue: lambda, values, residual })
}

fn check_consecutive(fine: &CarpetGraph, coarse: &CarpetGraph) -> Result<()> {
    if fine.level() != coarse.level() + 1 {
        return Err(CarpetError::InvalidArgument("graphs must be consecutive levels".into()));
    }
    Ok(())
}

/// Each level-(m-1) cell (I, J) gets the mean of u over its eight sub-cells
/// (3I + a, 3J + b), (a, b) != (1, 1).
pub fn average_down(fine: &CarpetGraph, coarse: &CarpetGraph, values: &[f64]) -> Result<Vec<f64>> {
    check_consecutive(fine, coarse)?;
    check_len(fine, values)?;
    Ok(coarse
        .cells()
        .iter()
        .map(|c| {
            let mut s = 0.0;
            for b in 0..3 {
                for a in 0..3 {
                    if (a, b) != (1, 1) {
                        s += values[fine.index_of(3 * c.i + a, 3 * c.j + b).expect("sub-cell exists")];
                    }
                }
            }
            s / 8.0
        })
        .collect())
}

/// Copies each level-(m-1) value to its eight sub-cells; right inverse of
/// `average_down`.
pub fn prolong(coarse: &CarpetGraph, fine: &CarpetGraph, values: &[f64]) -> Result<Vec<f64>> {
    check_consecutive(fine, coarse)?;
    check_len(coarse, values)?;
    Ok(fine.cells().iter().map(|c| values[coarse.index_of(c.i / 3, c.j / 3).expect("parent cell exists")]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefinementCategory {
    Ok,
    /// The averaged function vanishes.
    AverageZero,
    /// The averaged function is orthogonal to its best-matching eigenspace.
    ProjectionZero,
}

impl RefinementCategory {
    pub fn label(self) -> &'static str {
        match self {
            RefinementCategory::Ok => "ok",
            RefinementCategory::AverageZero => "ubar=0",
            RefinementCategory::ProjectionZero => "proj=0",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementScore {
    pub matched_eigenvalue: Option<f64>,
    /// ‖ū - proj ū‖ / ‖ū‖, in [0, 1].
    pub residual: Option<f64>,
    pub category: RefinementCategory,
}

/// Averages u down one level and compares it with its projection on the
/// coarse eigenspace whose eigenvalue best fits it.
pub fn refinement_score(
    fine: &CarpetGraph,
    coarse: &CarpetGraph,
    coarse_spec: &Spectrum,
    u: &[f64],
) -> Result<RefinementScore> {
    if coarse_spec.kind != LaplacianKind::CombinatorialGlued || coarse_spec.m != coarse.level() {
        return Err(CarpetError::InvalidArgument("refinement needs the coarse glued spectrum".into()));
    }
    let ubar = average_down(fine, coarse, u)?;
    let nbar = norm(&ubar);
    if nbar <= ZERO_FRACTION * norm(u) {
        return Ok(RefinementScore {
            matched_eigenvalue: None,
            residual: None,
            category: RefinementCategory::AverageZero,
        });
    }
    let op = assemble(coarse, LaplacianKind::CombinatorialGlued)?;
    let mut lu = vec![0.0; ubar.len()];
    op.apply(&ubar, &mut lu);
    let (ll, lu_u, uu) = (dot(&lu, &lu), dot(&lu, &ubar), nbar * nbar);
    let clusters = coarse_spec.clusters();
    let best = clusters
        .iter()
        .min_by(|p, q| {
            let f = |r: &std::ops::Range<usize>| {
                let l = coarse_spec.eigenvalues[r.start];
                ll - 2.0 * l * lu_u + l * l * uu
            };
            f(p).total_cmp(&f(q))
        })
        .expect("spectrum is non-empty")
        .clone();
    let matched = best.clone().map(|k| coarse_spec.eigenvalues[k]).sum::<f64>() / best.len() as f64;
    let mut proj = vec![0.0; ubar.len()];
    for k in best {
        let v = coarse_spec.vector(k);
        let c = dot(&ubar, v);
        proj.iter_mut().zip(v).for_each(|(p, x)| *p += c * x);
    }
    if norm(&proj) <= ZERO_FRACTION * nbar {
        return Ok(RefinementScore {
            matched_eigenvalue: Some(matched),
            residual: Some(1.0),
            category: RefinementCategory::ProjectionZero,
        });
    }
    let diff: Vec<f64> = ubar.iter().zip(&proj).map(|(a, b)| a - b).collect();
    Ok(RefinementScore {
        matched_eigenvalue: Some(matched),
        residual: Some((norm(&diff) / nbar).clamp(0.0, 1.0)),
        category: RefinementCategory::Ok,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementRow {
    pub index: usize,
    pub eigenvalue: f64,
    pub score: RefinementScore,
}

/// Scores every fine glued eigenvector against the coarse spectrum.
pub fn refinement_scan(
    fine: &CarpetGraph,
    fine_spec: &Spectrum,
    coarse: &CarpetGraph,
    coarse_spec: &Spectrum,
) -> Result<Vec<RefinementRow>> {
    use rayon::prelude::*;
    if fine_spec.kind != LaplacianKind::CombinatorialGlued || fine_spec.m != fine.level() {
        return Err(CarpetError::InvalidArgument("refinement needs the fine glued spectrum".into()));
    }
    (0..fine_spec.len())
        .into_par_iter()
        .map(|k| {
            let score = refinement_score(fine, coarse, coarse_spec, &fine_spec.vector_on_cells(k))?;
            Ok(RefinementRow { index: k, eigenvalue: fine_spec.eigenvalues[k], score })
        })
        .collect()
}

pub fn write_refinement_csv<W: Write>(rows: &[RefinementRow], mut w: W) -> Result<()> {
    writeln!(w, "index,eigenvalue,matched_eigenvalue,residual,category")?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.10}")).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{:.10},{},{},{}",
            r.index,
            r.eigenvalue,
            opt(r.score.matched_eigenvalue),
            opt(r.score.residual),
            r.score.category.label()
        )?;
    }
    Ok(())
}

/// Tiles a level-m function repeatedly up to the level of `window` (the graphs
/// in `chain` are the glued levels m, m+1, ..., M).
pub fn periodic_extension(chain: &[CarpetGraph], values: &[f64]) -> Result<Vec<f64>> {
    let first = chain.first().ok_or_else(|| CarpetError::InvalidArgument("empty level chain".into()))?;
    check_len(first, values)?;
    let mut cur = values.to_vec();
    for w in chain.windows(2) {
        cur = tile(&w[0], &w[1], &cur)?;
    }
    Ok(cur)
}

/// Glued graphs of levels m..=big_m for a constant type.
pub fn level_chain(t: IdentType, m: u32, big_m: u32) -> Result<Vec<CarpetGraph>> {
    if big_m < m {
        return Err(CarpetError::InvalidArgument(format!("window level {big_m} is below the source level {m}")));
    }
    (m..=big_m).map(|l| crate::topology::build_glued(l, &crate::ident::IdentSequence::uniform(t, l))).collect()
}

/// max |(-Δ)u - lambda u| over window cells at distance > 1 from the ring,
/// with -Δ the combinatorial operator of the hole-identified (unglued) window.
pub fn interior_eigen_residual(window: &CarpetGraph, values: &[f64], lambda: f64) -> Result<f64> {
    if window.kind() != GraphKind::Unglued {
        return Err(CarpetError::KindMismatch("interior check needs the unglued window".into()));
    }
    check_len(window, values)?;
    let dist = multi_source_distances(window, &window.boundary_cells(), None);
    let mut worst = 0f64;
    for k in 0..window.len() {
        if dist[k].is_some_and(|d| d > 1) {
            let lu: f64 = window.neighbors(k).map(|nb| values[k] - values[nb]).sum();
            worst = worst.max((lu - lambda * values[k]).abs());
        }
    }
    Ok(worst)
}

fn check_support(g: &CarpetGraph, f: &[f64]) -> Result<()> {
    check_len(g, f)?;
    if let Some(k) = (0..g.len()).find(|&k| g.is_boundary(k) && f[k] != 0.0) {
        return Err(CarpetError::InvalidArgument(format!("support touches the window ring at {}", g.cell(k))));
    }
    Ok(())
}

fn glued_basis(spec: &Spectrum, g: &CarpetGraph) -> Result<()> {
    if spec.kind != LaplacianKind::CombinatorialGlued || spec.m != g.level() || spec.n_graph_cells() != g.len() {
        return Err(CarpetError::InvalidArgument("projection needs the glued spectrum of the window graph".into()));
    }
    Ok(())
}

/// sum_k phi(lambda_k) <f, u_k> u_k, inner products over supp f.
pub fn spectral_apply(spec: &Spectrum, g: &CarpetGraph, f: &[f64], phi: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    glued_basis(spec, g)?;
    check_support(g, f)?;
    let support: Vec<usize> = (0..f.len()).filter(|&k| f[k] != 0.0).collect();
    let mut out = vec![0.0; f.len()];
    for k in 0..spec.len() {
        let w = phi(spec.eigenvalues[k]);
        if w == 0.0 {
            continue;
        }
        let v = spec.vector(k);
        let c = w * support.iter().map(|&x| f[x] * v[x]).sum::<f64>();
        out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
    }
    Ok(out)
}

/// Projection of f onto eigenvalues in [a, b). The operator is positive
/// semidefinite, so round-off negatives count as 0.
pub fn spectral_projection(spec: &Spectrum, g: &CarpetGraph, f: &[f64], a: f64, b: f64) -> Result<Vec<f64>> {
    spectral_apply(spec, g, f, |l| {
        let l = l.max(0.0);
        if l >= a && l < b {
            1.0
        } else {
            0.0
        }
    })
}

/// Coarse eigenvalues with no partner in the fine spectrum, matched as a
/// multiset within `tol`. Empty means coarse ⊂ fine.
pub fn unmatched_eigenvalues(coarse: &[f64], fine: &[f64], tol: f64) -> Vec<f64> {
    let mut used = vec![false; fine.len()];
    let mut start = 0;
    let mut missing = Vec::new();
    for &l in coarse {
        while start < fine.len() && fine[start] < l - tol {
            start += 1;
        }
        let hit = (start..fine.len()).take_while(|&k| fine[k] <= l + tol).find(|&k| !used[k]);
        match hit {
            Some(k) => used[k] = true,
            None => missing.push(l),
        }
    }
    missing
}
