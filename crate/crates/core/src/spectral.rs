//! Laplacian spectra of finite carpets.
//!
//! Two operators: the normalized Dirichlet Laplacian u(x) - (1/4) sum u(y)
//! on the interior cells of an unglued carpet (ring values taken as zero), and
//! the combinatorial Laplacian sum (f(x) - f(y)) on a glued carpet. Slots
//! count with multiplicity in both.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{CarpetError, Result};
use crate::ident::IdentSequence;
use crate::metric::multi_source_distances;
use crate::topology::{CarpetGraph, GraphKind};

/// Largest operator decomposed densely.
pub const DENSE_LIMIT: usize = 4096;

/// Bound on max_k ||A v_k - lambda_k v_k|| every spectrum must meet.
pub const RESIDUAL_BOUND: f64 = 1e-8;

/// Eigenvalues closer than this (relative) form one cluster.
pub const CLUSTER_GAP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LaplacianKind {
    NormalizedDirichlet,
    CombinatorialGlued,
}

impl LaplacianKind {
    pub fn graph_kind(self) -> GraphKind {
        match self {
            LaplacianKind::NormalizedDirichlet => GraphKind::Unglued,
            LaplacianKind::CombinatorialGlued => GraphKind::Glued,
        }
    }

    /// Gershgorin interval containing the spectrum.
    pub fn spectral_bound(self) -> f64 {
        match self {
            LaplacianKind::NormalizedDirichlet => 2.0,
            LaplacianKind::CombinatorialGlued => 8.0,
        }
    }
}

/// Sparse symmetric operator on a subset of cells.
#[derive(Debug, Clone)]
pub struct Operator {
    pub kind: LaplacianKind,
    /// Graph cell index of each row.
    pub cells: Vec<usize>,
    rows: Vec<Vec<(u32, f64)>>,
}

impl Operator {
    pub fn order(&self) -> usize {
        self.cells.len()
    }

    pub fn row(&self, r: usize) -> &[(u32, f64)] {
        &self.rows[r]
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, row) in self.rows.iter().enumerate() {
            y[r] = row.iter().map(|&(c, w)| w * x[c as usize]).sum();
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.order();
        let mut a = Mat::<f64>::zeros(n, n);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, w) in row {
                a[(r, c as usize)] += w;
            }
        }
        a
    }
}

pub fn assemble(g: &CarpetGraph, kind: LaplacianKind) -> Result<Operator> {
    if g.kind() != kind.graph_kind() {
        return Err(CarpetError::KindMismatch(format!("{kind:?} needs a {:?} graph", kind.graph_kind())));
    }
    let cells: Vec<usize> = match kind {
        LaplacianKind::NormalizedDirichlet => g.interior_cells(),
        LaplacianKind::CombinatorialGlued => (0..g.len()).collect(),
    };
    let mut row_of = vec![u32::MAX; g.len()];
    for (r, &k) in cells.iter().enumerate() {
        row_of[k] = r as u32;
    }
    let (self_w, nb_w) = match kind {
        LaplacianKind::NormalizedDirichlet => (0.25, 0.25),
        LaplacianKind::CombinatorialGlued => (1.0, 1.0),
    };
    let rows = cells
        .iter()
        .enumerate()
        .map(|(r, &k)| {
            let mut row: Vec<(u32, f64)> = vec![(r as u32, 0.0)];
            for nb in g.neighbors(k) {
                // each slot contributes self_w * f(x) - nb_w * f(y)
                row[0].1 += self_w;
                let c = row_of[nb];
                if c == u32::MAX {
                    continue;
                }
                match row.iter_mut().find(|e| e.0 == c) {
                    Some(e) => e.1 -= nb_w,
                    None => row.push((c, -nb_w)),
                }
            }
            row
        })
        .collect();
    Ok(Operator { kind, cells, rows })
}

/// Full eigendecomposition with provenance.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub kind: LaplacianKind,
    pub m: u32,
    pub seq: IdentSequence,
    pub eigenvalues: Vec<f64>,
    /// Column-major: vector k occupies [k*n, (k+1)*n).
    vectors: Vec<f64>,
    /// Graph cell index of each vector component.
    pub cells: Vec<usize>,
    row_of: Vec<u32>,
    pub residual: f64,
}

fn row_lookup(cells: &[usize], n_cells: usize) -> Vec<u32> {
    let mut row_of = vec![u32::MAX; n_cells];
    for (r, &k) in cells.iter().enumerate() {
        row_of[k] = r as u32;
    }
    row_of
}

/// Runs of ascending eigenvalues separated by relative gaps below CLUSTER_GAP
/// (scale floored at 1e-3 so the zero mode stays apart).
pub fn clusters_of(ev: &[f64]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=ev.len() {
        let split = k == ev.len() || {
            let scale = ev[k].abs().max(ev[k - 1].abs()).max(1e-3);
            ev[k] - ev[k - 1] >= CLUSTER_GAP * scale
        };
        if split {
            out.push(start..k);
            start = k;
        }
    }
    out
}

/// Makes the largest-magnitude component positive (first one on ties).
fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn eigendecompose(g: &CarpetGraph, kind: LaplacianKind) -> Result<Spectrum> {
    let op = assemble(g, kind)?;
    let n = op.order();
    if n > DENSE_LIMIT {
        return Err(CarpetError::InvalidArgument(format!("operator order {n} exceeds the dense limit {DENSE_LIMIT}")));
    }
    if n == 0 {
        return Err(CarpetError::InvalidArgument("operator has no rows".into()));
    }
    let evd = op.to_dense().self_adjoint_eigen(Side::Lower).map_err(|e| CarpetError::EigenFailed(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| s[k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (dst, &k) in order.iter().enumerate() {
        let col = &mut vectors[dst * n..(dst + 1) * n];
        for (i, x) in col.iter_mut().enumerate() {
            *x = u[(i, k)];
        }
        normalize_sign(col);
    }
    let mut spec = Spectrum {
        kind,
        m: g.level(),
        seq: g.seq().clone(),
        eigenvalues,
        vectors,
        row_of: row_lookup(&op.cells, g.len()),
        cells: op.cells.clone(),
        residual: 0.0,
    };
    spec.residual = spec.max_residual(&op);
    if !(spec.residual <= RESIDUAL_BOUND) {
        return Err(CarpetError::EigenFailed(format!("residual {:e} exceeds {RESIDUAL_BOUND:e}", spec.residual)));
    }
    Ok(spec)
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        let n = self.len();
        &self.vectors[k * n..(k + 1) * n]
    }

    /// Row of graph cell `cell`, if the operator acts on it.
    pub fn row_of(&self, cell: usize) -> Option<usize> {
        match self.row_of.get(cell) {
            Some(&r) if r != u32::MAX => Some(r as usize),
            _ => None,
        }
    }

    pub fn n_graph_cells(&self) -> usize {
        self.row_of.len()
    }

    /// Eigenvector k on all graph cells, zero off the operator's rows.
    pub fn vector_on_cells(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_graph_cells()];
        for (r, &c) in self.cells.iter().enumerate() {
            out[c] = self.vector(k)[r];
        }
        out
    }

    pub fn max_residual(&self, op: &Operator) -> f64 {
        let n = self.len();
        let mut av = vec![0.0; n];
        (0..n)
            .map(|k| {
                let v = self.vector(k);
                op.apply(v, &mut av);
                av.iter().zip(v).map(|(a, x)| (a - self.eigenvalues[k] * x).powi(2)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Runs of numerically equal eigenvalues.
    pub fn clusters(&self) -> Vec<Range<usize>> {
        clusters_of(&self.eigenvalues)
    }

    /// Index pairs (a, a+1) forming two-dimensional eigenspaces that start below `limit`.
    pub fn double_positions(&self, limit: usize) -> Vec<(usize, usize)> {
        self.clusters()
            .into_iter()
            .filter(|c| c.len() == 2 && c.start < limit)
            .map(|c| (c.start, c.start + 1))
            .collect()
    }

    /// N(t) = #{ k : lambda_k <= t }.
    pub fn count(&self, t: f64) -> usize {
        self.eigenvalues.partition_point(|&x| x <= t)
    }

    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let header = CacheHeader {
            m: self.m,
            seq: self.seq.clone(),
            kind: self.kind,
            count: self.len(),
            residual: self.residual,
        };
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for x in self.eigenvalues.iter().chain(&self.vectors) {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a cache written by `write_cache`; `g` supplies the cell layout
    /// and must match the header.
    pub fn read_cache(path: &Path, g: &CarpetGraph) -> Result<Spectrum> {
        let mut r = BufReader::new(File::open(path)?);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let h: CacheHeader = serde_json::from_str(line.trim_end())?;
        if h.m != g.level() || &h.seq != g.seq() || h.kind.graph_kind() != g.kind() {
            return Err(CarpetError::Cache(format!(
                "cache describes level {} {} {:?}, graph is level {} {} {:?}",
                h.m,
                h.seq,
                h.kind,
                g.level(),
                g.seq(),
                g.kind()
            )));
        }
        let cells: Vec<usize> = match h.kind {
            LaplacianKind::NormalizedDirichlet => g.interior_cells(),
            LaplacianKind::CombinatorialGlued => (0..g.len()).collect(),
        };
        let n = h.count;
        if cells.len() != n {
            return Err(CarpetError::Cache(format!("cache has {n} rows, operator has {}", cells.len())));
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * (n + n * n) {
            return Err(CarpetError::Cache(format!(
                "expected {} payload bytes, found {}",
                8 * (n + n * n),
                bytes.len()
            )));
        }
        let mut floats = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let eigenvalues: Vec<f64> = floats.by_ref().take(n).collect();
        let vectors: Vec<f64> = floats.collect();
        Ok(Spectrum {
            kind: h.kind,
            m: h.m,
            seq: h.seq,
            eigenvalues,
            vectors,
            row_of: row_lookup(&cells, g.len()),
            cells,
            residual: h.residual,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheHeader {
    m: u32,
    seq: IdentSequence,
    kind: LaplacianKind,
    count: usize,
    residual: f64,
}

/// Renormalization estimate from two consecutive levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub r: f64,
    /// lambda_k(m) / lambda_k(m+1), k = 1..=count.
    pub ratios: Vec<f64>,
    /// False when a two-dimensional eigenspace starts at different indices in
    /// the two spectra within the averaged range.
    pub aligned: bool,
}

/// Mean of lambda_k(m) / lambda_k(m+1) over k = 1..=10.
pub fn estimate_r(coarse: &Spectrum, fine: &Spectrum) -> Result<RatioEstimate> {
    estimate_r_with(coarse, fine, 10)
}

pub fn estimate_r_with(coarse: &Spectrum, fine: &Spectrum, count: usize) -> Result<RatioEstimate> {
    if coarse.kind != fine.kind || fine.m != coarse.m + 1 {
        return Err(CarpetError::InvalidArgument(format!(
            "need the same operator at consecutive levels, got {:?} level {} and {:?} level {}",
            coarse.kind, coarse.m, fine.kind, fine.m
        )));
    }
    if fine.seq.truncated(coarse.m)? != coarse.seq.truncated(coarse.m)? {
        return Err(CarpetError::InvalidArgument(format!(
            "sequences {} and {} disagree on the first {} entries",
            coarse.seq,
            fine.seq,
            coarse.m + 1
        )));
    }
    let ratios = eigenvalue_ratios(&coarse.eigenvalues, &fine.eigenvalues, count)?;
    let starts = |s: &Spectrum| -> Vec<usize> {
        s.clusters().into_iter().filter(|c| c.len() > 1 && c.start <= count).map(|c| c.start).collect()
    };
    let aligned = starts(coarse) == starts(fine);
    Ok(RatioEstimate { r: ratios.iter().sum::<f64>() / count as f64, ratios, aligned })
}

/// lambda_k(coarse) / lambda_k(fine) for k = 1..=count.
pub fn eigenvalue_ratios(coarse: &[f64], fine: &[f64], count: usize) -> Result<Vec<f64>> {
    if coarse.len() <= count || fine.len() <= count {
        return Err(CarpetError::InvalidArgument(format!("need more than {count} eigenvalues")));
    }
    Ok((1..=count).map(|k| coarse[k] / fine[k]).collect())
}

/// alpha = log 8 / log R.
pub fn weyl_exponent(r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return Err(CarpetError::InvalidArgument(format!("renormalization factor must exceed 1, got {r}")));
    }
    Ok(8f64.ln() / r.ln())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeylRow {
    pub t: f64,
    pub n: usize,
    pub w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeylTable {
    pub alpha: f64,
    /// One row per distinct positive eigenvalue t, with N(t) counted at t.
    pub rows: Vec<WeylRow>,
}

pub fn counting_and_weyl(spec: &Spectrum, r: f64) -> Result<WeylTable> {
    weyl_table(&spec.eigenvalues, r)
}

/// One row per distinct positive eigenvalue of an ascending list.
pub fn weyl_table(ev: &[f64], r: f64) -> Result<WeylTable> {
    let alpha = weyl_exponent(r)?;
    let rows = clusters_of(ev)
        .into_iter()
        .filter_map(|c| {
            let t = ev[c.end - 1];
            (t > CLUSTER_GAP).then(|| {
                let n = ev.partition_point(|&x| x <= t);
                WeylRow { t, n, w: n as f64 / t.powf(alpha) }
            })
        })
        .collect();
    Ok(WeylTable { alpha, rows })
}

impl WeylTable {
    /// Columns: t, N, W and their log10 and natural-log counterparts.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,n,w,log10_t,log10_n,log10_w,ln_t,ln_w")?;
        for row in &self.rows {
            writeln!(
                w,
                "{:.12e},{},{:.12e},{:.9},{:.9},{:.9},{:.9},{:.9}",
                row.t,
                row.n,
                row.w,
                row.t.log10(),
                (row.n as f64).log10(),
                row.w.log10(),
                row.t.ln(),
                row.w.ln()
            )?;
        }
        Ok(())
    }
}

/// Eigenvalues alone, ascending. Without vectors there is no residual, so the
/// result is checked against the trace and the spectral bound instead.
pub fn eigenvalues_only(g: &CarpetGraph, kind: LaplacianKind) -> Result<Vec<f64>> {
    let op = assemble(g, kind)?;
    let n = op.order();
    if n == 0 || n > DENSE_LIMIT {
        return Err(CarpetError::InvalidArgument(format!("operator order {n} is outside 1..={DENSE_LIMIT}")));
    }
    let dense = op.to_dense();
    let mut ev = dense.self_adjoint_eigenvalues(Side::Lower).map_err(|e| CarpetError::EigenFailed(format!("{e:?}")))?;
    ev.sort_by(f64::total_cmp);
    let trace: f64 = (0..n).map(|i| dense[(i, i)]).sum();
    let sum: f64 = ev.iter().sum();
    let bound = kind.spectral_bound();
    if (sum - trace).abs() > 1e-9 * trace.max(1.0) || ev[0] < -1e-9 || ev[n - 1] > bound + 1e-9 {
        return Err(CarpetError::EigenFailed(format!(
            "eigenvalues fail the trace/bound check (sum {sum}, trace {trace})"
        )));
    }
    Ok(ev)
}

/// N(t) / t^alpha for one identification sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeylCurve {
    pub seq: IdentSequence,
    pub r: f64,
    pub alpha: f64,
    pub eigenvalues: Vec<f64>,
}

impl WeylCurve {
    pub fn new(seq: IdentSequence, r: f64, eigenvalues: Vec<f64>) -> Result<Self> {
        Ok(WeylCurve { seq, r, alpha: weyl_exponent(r)?, eigenvalues })
    }

    pub fn w(&self, t: f64) -> f64 {
        self.eigenvalues.partition_point(|&x| x <= t) as f64 / t.powf(self.alpha)
    }
}

/// Zoom window for segmentation comparisons, in ln t.
pub const SEGMENT_WINDOW: (f64, f64) = (-5.0, -2.0);

/// max |log10 W_a - log10 W_b| over `samples` uniform points of ln t in `window`.
pub fn weyl_gap(a: &WeylCurve, b: &WeylCurve, window: (f64, f64), samples: usize) -> f64 {
    let n = samples.max(2);
    (0..n)
        .map(|k| {
            let t = (window.0 + (window.1 - window.0) * k as f64 / (n - 1) as f64).exp();
            (a.w(t).log10() - b.w(t).log10()).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentationReport {
    /// Length of the shared prefix defining a group.
    pub prefix: usize,
    pub within_mean: f64,
    pub across_mean: f64,
    pub within_max: f64,
    pub across_max: f64,
    pub within_pairs: usize,
    pub across_pairs: usize,
}

/// Pairwise Weyl gaps split by whether the two sequences share their first
/// `prefix` entries.
pub fn segmentation(curves: &[WeylCurve], prefix: usize, window: (f64, f64), samples: usize) -> SegmentationReport {
    let (mut within, mut across) = (Vec::new(), Vec::new());
    for a in 0..curves.len() {
        for b in a + 1..curves.len() {
            let gap = weyl_gap(&curves[a], &curves[b], window, samples);
            let (ea, eb) = (curves[a].seq.entries(), curves[b].seq.entries());
            if ea[..prefix.min(ea.len())] == eb[..prefix.min(eb.len())] {
                within.push(gap);
            } else {
                across.push(gap);
            }
        }
    }
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let max = |v: &[f64]| v.iter().copied().fold(f64::NAN, f64::max);
    SegmentationReport {
        prefix,
        within_mean: mean(&within),
        across_mean: mean(&across),
        within_max: max(&within),
        across_max: max(&across),
        within_pairs: within.len(),
        across_pairs: across.len(),
    }
}

/// Share of the squared mass of `values` (one entry per graph cell) on cells
/// within graph distance `width` of the boundary ring.
pub fn boundary_mass_fraction(g: &CarpetGraph, values: &[f64], width: u32) -> f64 {
    let dist = multi_source_distances(g, &g.boundary_cells(), Some(width));
    let total: f64 = values.iter().map(|v| v * v).sum();
    let near: f64 = values.iter().zip(&dist).filter(|(_, d)| d.is_some()).map(|(v, _)| v * v).sum();
    near / total
}

/// Boundary mass fraction of the first `k_max` Dirichlet eigenfunctions.
pub fn boundary_decay_scan(spec: &Spectrum, g: &CarpetGraph, width: u32, k_max: usize) -> Result<Vec<f64>> {
    if spec.kind != LaplacianKind::NormalizedDirichlet {
        return Err(CarpetError::KindMismatch("the boundary scan needs a Dirichlet spectrum".into()));
    }
    if spec.m != g.level() || g.kind() != GraphKind::Unglued || spec.n_graph_cells() != g.len() {
        return Err(CarpetError::InvalidArgument("graph does not match the spectrum".into()));
    }
    Ok((0..k_max.min(spec.len())).map(|k| boundary_mass_fraction(g, &spec.vector_on_cells(k), width)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ident::IdentType;
    use crate::topology::{build_glued, build_unglued, Symmetry};

    fn glued(t: IdentType, m: u32) -> CarpetGraph {
        build_glued(m, &IdentSequence::uniform(t, m)).unwrap()
    }

    #[test]
    fn assembly_rows() {
        let g = glued(IdentType::KleinH, 2);
        let op = assemble(&g, LaplacianKind::CombinatorialGlued).unwrap();
        for r in 0..op.order() {
            assert!(op.row(r).iter().map(|e| e.1).sum::<f64>().abs() < 1e-15);
        }
        let u = build_unglued(4, &IdentSequence::uniform(IdentType::Torus, 4)).unwrap();
        let d = assemble(&u, LaplacianKind::NormalizedDirichlet).unwrap();
        assert_eq!(d.order(), 3776);
        assert!((0..d.order()).all(|r| d.row(r)[0] == (r as u32, 1.0)));
        assert!(assemble(&g, LaplacianKind::NormalizedDirichlet).is_err());
    }

    #[test]
    fn torus_level_two() {
        let s = eigendecompose(&glued(IdentType::Torus, 2), LaplacianKind::CombinatorialGlued).unwrap();
        assert!(s.eigenvalues[0].abs() < 1e-12);
        assert!((s.eigenvalues[1] - 0.4410218).abs() < 1e-6);
        assert!((s.eigenvalues[2] - 0.690591).abs() < 1e-6);
        assert_eq!(s.clusters()[2], 2..4);
        let v0 = s.vector(0);
        assert!(v0.iter().all(|x| (x - 0.125).abs() < 1e-12));
        assert_eq!(s.count(8.0), 64);
        assert_eq!(s.count(0.1), 1);
    }

    #[test]
    fn klein_level_two_is_simple_at_bottom() {
        let s = eigendecompose(&glued(IdentType::KleinH, 2), LaplacianKind::CombinatorialGlued).unwrap();
        assert!((s.eigenvalues[1] - 0.4410218).abs() < 1e-6);
        assert!(s.double_positions(16).is_empty());
    }

    #[test]
    fn spectrum_is_invariant_under_automorphisms() {
        let g = glued(IdentType::Projective, 2);
        let op = assemble(&g, LaplacianKind::CombinatorialGlued).unwrap();
        let a = op.to_dense();
        let base = eigendecompose(&g, LaplacianKind::CombinatorialGlued).unwrap();
        for sym in Symmetry::D4 {
            let p = g.permutation(sym).unwrap();
            let b = Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(p[i], p[j])]);
            let mut ev: Vec<f64> = b.self_adjoint_eigenvalues(Side::Lower).unwrap();
            ev.sort_by(f64::total_cmp);
            for (x, y) in ev.iter().zip(&base.eigenvalues) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn cache_round_trip() {
        let g = build_unglued(2, &IdentSequence::uniform(IdentType::KleinV, 2)).unwrap();
        let s = eigendecompose(&g, LaplacianKind::NormalizedDirichlet).unwrap();
        let dir = std::env::temp_dir().join(format!("carpet-cache-{}", std::process::id()));
        s.write_cache(&dir).unwrap();
        let back = Spectrum::read_cache(&dir, &g).unwrap();
        std::fs::remove_file(&dir).unwrap();
        assert_eq!(back.eigenvalues, s.eigenvalues);
        assert_eq!(back.vector(7), s.vector(7));
        let other = build_unglued(2, &IdentSequence::uniform(IdentType::Torus, 2)).unwrap();
        s.write_cache(&dir).unwrap();
        assert!(matches!(Spectrum::read_cache(&dir, &other), Err(CarpetError::Cache(_))));
        std::fs::remove_file(&dir).unwrap();
    }

    #[test]
    fn boundary_mass_fixtures() {
        let g = build_unglued(3, &IdentSequence::uniform(IdentType::Torus, 3)).unwrap();
        let ones = vec![1.0; g.len()];
        let share = g.boundary_count() as f64 / g.len() as f64;
        assert!((boundary_mass_fraction(&g, &ones, 0) - share).abs() < 1e-15);
        let s = eigendecompose(&g, LaplacianKind::NormalizedDirichlet).unwrap();
        assert!(s.eigenvalues[0] > 0.0);
        assert!(boundary_decay_scan(&s, &g, 0, 20).unwrap().iter().all(|&f| f == 0.0));
    }

    #[test]
    fn weyl_exponent_exceeds_one() {
        assert!((weyl_exponent(6.441049).unwrap() - 1.116364).abs() < 1e-6);
        assert!(weyl_exponent(1.0).is_err());
    }
}
