//! Discrete harmonic problems on unglued carpets: each slot is a unit
//! conductor, so an interior cell is harmonic when it equals the mean of its
//! four slot neighbors.

use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{CarpetError, Result};
use crate::metric::multi_source_distances;
use crate::topology::{CarpetGraph, GraphKind};

/// Relative residual every returned solution must meet.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Largest system factorized directly by default.
pub const DIRECT_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    Auto,
    Direct,
    ConjugateGradient,
}

enum Backend {
    Direct(Llt<usize, f64>),
    Cg,
}

/// The system for the free cells of an unglued graph when the cells flagged
/// in `fixed` carry prescribed values: (deg I - A_ff) u_f = A_fF u_F.
pub struct DirichletSystem {
    n_cells: usize,
    free: Vec<usize>,
    row_of: Vec<u32>,
    /// Per free row: diagonal and the off-diagonal (free row, multiplicity) entries.
    diag: Vec<f64>,
    offdiag: Vec<Vec<(u32, f64)>>,
    /// Per free row: couplings to fixed cells, (cell index, multiplicity).
    coupling: Vec<Vec<(usize, f64)>>,
    backend: Backend,
}

const FIXED: u32 = u32::MAX;

fn require_unglued(g: &CarpetGraph) -> Result<()> {
    if g.kind() != GraphKind::Unglued {
        return Err(CarpetError::KindMismatch("harmonic problems need an unglued graph".into()));
    }
    Ok(())
}

impl DirichletSystem {
    pub fn new(g: &CarpetGraph, fixed: &[bool], method: SolveMethod) -> Result<Self> {
        require_unglued(g)?;
        if fixed.len() != g.len() {
            return Err(CarpetError::InvalidArgument("fixed mask length differs from cell count".into()));
        }
        let free: Vec<usize> = (0..g.len()).filter(|&k| !fixed[k]).collect();
        let mut row_of = vec![FIXED; g.len()];
        for (r, &k) in free.iter().enumerate() {
            row_of[k] = r as u32;
        }
        let mut diag = Vec::with_capacity(free.len());
        let mut offdiag = Vec::with_capacity(free.len());
        let mut coupling = Vec::with_capacity(free.len());
        for &k in &free {
            let mut off: Vec<(u32, f64)> = Vec::with_capacity(4);
            let mut cpl: Vec<(usize, f64)> = Vec::new();
            for nb in g.neighbors(k) {
                match row_of[nb] {
                    FIXED => match cpl.iter_mut().find(|e| e.0 == nb) {
                        Some(e) => e.1 += 1.0,
                        None => cpl.push((nb, 1.0)),
                    },
                    r => match off.iter_mut().find(|e| e.0 == r) {
                        Some(e) => e.1 += 1.0,
                        None => off.push((r, 1.0)),
                    },
                }
            }
            diag.push(g.degree(k) as f64);
            offdiag.push(off);
            coupling.push(cpl);
        }
        let use_direct = match method {
            SolveMethod::Direct => true,
            SolveMethod::ConjugateGradient => false,
            SolveMethod::Auto => free.len() <= DIRECT_LIMIT,
        };
        let mut sys = DirichletSystem { n_cells: g.len(), free, row_of, diag, offdiag, coupling, backend: Backend::Cg };
        if use_direct && !sys.free.is_empty() {
            sys.backend = Backend::Direct(sys.factorize()?);
        }
        Ok(sys)
    }

    /// Boundary ring fixed, everything else free.
    pub fn with_ring_fixed(g: &CarpetGraph, method: SolveMethod) -> Result<Self> {
        let fixed: Vec<bool> = (0..g.len()).map(|k| g.is_boundary(k)).collect();
        DirichletSystem::new(g, &fixed, method)
    }

    fn factorize(&self) -> Result<Llt<usize, f64>> {
        let mut triplets = Vec::with_capacity(self.free.len() * 5);
        for r in 0..self.free.len() {
            triplets.push(Triplet::new(r, r, self.diag[r]));
            for &(c, w) in &self.offdiag[r] {
                triplets.push(Triplet::new(c as usize, r, -w));
            }
        }
        let n = self.free.len();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| CarpetError::InvalidArgument(format!("sparse assembly: {e:?}")))?;
        a.sp_cholesky(Side::Lower).map_err(|e| CarpetError::NumericCheck(format!("sparse Cholesky failed: {e:?}")))
    }

    pub fn free_cells(&self) -> &[usize] {
        &self.free
    }

    /// Row of cell k in the reduced system, if k is free.
    pub fn row_of(&self, k: usize) -> Option<usize> {
        match self.row_of[k] {
            FIXED => None,
            r => Some(r as usize),
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.free.len() {
            let mut s = self.diag[r] * x[r];
            for &(c, w) in &self.offdiag[r] {
                s -= w * x[c as usize];
            }
            y[r] = s;
        }
    }

    fn residual_ok(&self, x: &[f64], b: &[f64]) -> Result<()> {
        let mut ax = vec![0.0; x.len()];
        self.apply(x, &mut ax);
        let res = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = if bn > 0.0 { res / bn } else { res };
        if rel > RESIDUAL_TOL || !rel.is_finite() {
            return Err(CarpetError::SolveFailed { residual: rel, tol: RESIDUAL_TOL });
        }
        Ok(())
    }

    /// Solves the reduced system A x = b (b indexed by free row).
    pub fn solve_reduced(&self, b: &[f64]) -> Result<Vec<f64>> {
        let x = match &self.backend {
            Backend::Direct(llt) => {
                let rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
                let sol = llt.solve(&rhs);
                (0..b.len()).map(|i| sol[(i, 0)]).collect()
            }
            Backend::Cg => self.conjugate_gradient(b)?,
        };
        self.residual_ok(&x, b)?;
        Ok(x)
    }

    /// Solves for several right-hand sides at once (columns of `b`).
    pub fn solve_many(&self, b: &Mat<f64>) -> Result<Mat<f64>> {
        match &self.backend {
            Backend::Direct(llt) => {
                let sol = llt.solve(b);
                for c in 0..b.ncols() {
                    let x: Vec<f64> = (0..b.nrows()).map(|i| sol[(i, c)]).collect();
                    let rhs: Vec<f64> = (0..b.nrows()).map(|i| b[(i, c)]).collect();
                    self.residual_ok(&x, &rhs)?;
                }
                Ok(sol)
            }
            Backend::Cg => {
                let mut out = Mat::<f64>::zeros(b.nrows(), b.ncols());
                for c in 0..b.ncols() {
                    let rhs: Vec<f64> = (0..b.nrows()).map(|i| b[(i, c)]).collect();
                    let x = self.solve_reduced(&rhs)?;
                    for (i, v) in x.into_iter().enumerate() {
                        out[(i, c)] = v;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Jacobi-preconditioned conjugate gradient.
    fn conjugate_gradient(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = b.len();
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = vec![0.0; n];
        if bn == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        // a little below the contract so the final residual check has slack
        let target = 0.1 * RESIDUAL_TOL * bn;
        for _ in 0..(20 * n).max(1000) {
            self.apply(&p, &mut ap);
            let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= target {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] / self.diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bn;
        Err(CarpetError::SolveFailed { residual: res, tol: RESIDUAL_TOL })
    }

    /// Full-length solution: fixed cells keep `values[k]`, free cells are solved.
    pub fn solve(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.n_cells {
            return Err(CarpetError::InvalidArgument("value vector length differs from cell count".into()));
        }
        let b: Vec<f64> = self.coupling.iter().map(|c| c.iter().map(|&(k, w)| w * values[k]).sum()).collect();
        let x = self.solve_reduced(&b)?;
        let mut out = values.to_vec();
        for (r, &k) in self.free.iter().enumerate() {
            out[k] = x[r];
        }
        Ok(out)
    }
}

/// Harmonic extension of the values given on the boundary ring. Entries of
/// `values` at interior cells are ignored.
pub fn harmonic_extension(g: &CarpetGraph, values: &[f64]) -> Result<Vec<f64>> {
    DirichletSystem::with_ring_fixed(g, SolveMethod::Auto)?.solve(values)
}

/// P(., y): the harmonic extension of the indicator of boundary cell y.
pub fn poisson_kernel(g: &CarpetGraph, y: usize) -> Result<Vec<f64>> {
    require_unglued(g)?;
    if y >= g.len() || !g.is_boundary(y) {
        return Err(CarpetError::InvalidArgument(format!("cell {y} is not a boundary cell")));
    }
    let mut values = vec![0.0; g.len()];
    values[y] = 1.0;
    harmonic_extension(g, &values)
}

/// Resistance between interior cell x and the grounded ring: with u(x) = 1,
/// u = 0 on the ring and u harmonic elsewhere, 1 / (current leaving x).
pub fn effective_resistance(g: &CarpetGraph, x: usize) -> Result<f64> {
    require_unglued(g)?;
    if g.is_boundary(x) {
        return Err(CarpetError::InvalidArgument(format!("cell {x} is on the boundary ring")));
    }
    let mut fixed: Vec<bool> = (0..g.len()).map(|k| g.is_boundary(k)).collect();
    fixed[x] = true;
    let mut values = vec![0.0; g.len()];
    values[x] = 1.0;
    let u = DirichletSystem::new(g, &fixed, SolveMethod::Auto)?.solve(&values)?;
    let current: f64 = g.neighbors(x).map(|y| 1.0 - u[y]).sum();
    Ok(1.0 / current)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResistanceProfile {
    pub cells: Vec<usize>,
    pub distance_to_boundary: Vec<u32>,
    pub resistance: Vec<f64>,
}

impl ResistanceProfile {
    pub fn max(&self) -> f64 {
        self.resistance.iter().cloned().fold(f64::MIN, f64::max)
    }

    /// Largest resistance at each distance from the ring, for distances 1..=max.
    pub fn max_by_distance(&self) -> Vec<(u32, f64)> {
        let dmax = self.distance_to_boundary.iter().copied().max().unwrap_or(0);
        (1..=dmax)
            .map(|d| {
                let m = self
                    .distance_to_boundary
                    .iter()
                    .zip(&self.resistance)
                    .filter(|(&dd, _)| dd == d)
                    .map(|(_, &r)| r)
                    .fold(f64::MIN, f64::max);
                (d, m)
            })
            .collect()
    }

    /// Distance at which the per-distance maximum peaks, over the largest
    /// distance. Near-ties go to the smaller distance.
    pub fn hill_ratio(&self) -> f64 {
        let by_d = self.max_by_distance();
        let top = self.max();
        let peak = by_d.iter().find(|(_, r)| *r >= top * (1.0 - 1e-12)).map_or(0, |e| e.0);
        peak as f64 / by_d.len() as f64
    }

    pub fn write_csv<W: Write>(&self, g: &CarpetGraph, mut w: W) -> Result<()> {
        writeln!(w, "cell,distance_to_boundary,resistance")?;
        for ((&k, &d), &r) in self.cells.iter().zip(&self.distance_to_boundary).zip(&self.resistance) {
            writeln!(w, "\"{}\",{d},{r:.12}", g.cell(k))?;
        }
        Ok(())
    }
}

/// Resistance of every interior cell at once: it equals the diagonal of the
/// inverse of the reduced (ring-grounded) Laplacian.
pub fn resistance_profile(g: &CarpetGraph) -> Result<ResistanceProfile> {
    let sys = DirichletSystem::with_ring_fixed(g, SolveMethod::Auto)?;
    let n = sys.free.len();
    let mut diag = vec![0.0; n];
    const BLOCK: usize = 256;
    for start in (0..n).step_by(BLOCK) {
        let cols = BLOCK.min(n - start);
        let rhs = Mat::<f64>::from_fn(n, cols, |i, c| if i == start + c { 1.0 } else { 0.0 });
        let sol = sys.solve_many(&rhs)?;
        for c in 0..cols {
            diag[start + c] = sol[(start + c, c)];
        }
    }
    let dist = multi_source_distances(g, &g.boundary_cells(), None);
    Ok(ResistanceProfile {
        distance_to_boundary: sys.free.iter().map(|&k| dist[k].expect("unglued carpets are connected")).collect(),
        cells: sys.free,
        resistance: diag,
    })
}
