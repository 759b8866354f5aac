//! Heat kernel and wave propagator as spectral sums over a Dirichlet (or
//! glued) spectrum.

use std::io::Write;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{CarpetError, Result};
use crate::metric::bfs_distances;
use crate::spectral::Spectrum;
use crate::topology::CarpetGraph;

/// Kernel values below this are reported as numerical noise.
pub const NOISE_FLOOR: f64 = 1e-30;

fn row(spec: &Spectrum, cell: usize) -> Result<usize> {
    spec.row_of(cell)
        .ok_or_else(|| CarpetError::InvalidArgument(format!("cell {cell} is not in the operator's domain")))
}

/// H_t(x, y) = sum_i exp(-rate * lambda_i * t) u_i(x) u_i(y). `rate` is 1 for
/// the operator as decomposed; 4 turns the normalized Dirichlet operator into
/// the combinatorial one.
#[derive(Debug, Clone, Copy)]
pub struct HeatKernel<'a> {
    spec: &'a Spectrum,
    rate: f64,
}

impl<'a> HeatKernel<'a> {
    pub fn new(spec: &'a Spectrum) -> Self {
        HeatKernel { spec, rate: 1.0 }
    }

    pub fn with_rate(spec: &'a Spectrum, rate: f64) -> Self {
        HeatKernel { spec, rate }
    }

    pub fn spectrum(&self) -> &Spectrum {
        self.spec
    }

    fn check_t(t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(CarpetError::InvalidArgument(format!("time must be non-negative, got {t}")));
        }
        Ok(())
    }

    /// H_t between graph cells x and y.
    pub fn value(&self, t: f64, x: usize, y: usize) -> Result<f64> {
        Self::check_t(t)?;
        let (rx, ry) = (row(self.spec, x)?, row(self.spec, y)?);
        Ok(self.value_rows(t, rx, ry))
    }

    pub fn value_rows(&self, t: f64, rx: usize, ry: usize) -> f64 {
        (0..self.spec.len())
            .map(|k| {
                let v = self.spec.vector(k);
                (-self.rate * self.spec.eigenvalues[k] * t).exp() * v[rx] * v[ry]
            })
            .sum()
    }

    /// H_t(., y) on every operator row.
    pub fn column(&self, t: f64, y: usize) -> Result<Vec<f64>> {
        Self::check_t(t)?;
        let ry = row(self.spec, y)?;
        let n = self.spec.len();
        let mut out = vec![0.0; n];
        for k in 0..n {
            let v = self.spec.vector(k);
            let c = (-self.rate * self.spec.eigenvalues[k] * t).exp() * v[ry];
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
        Ok(out)
    }

    /// The full matrix H_t over operator rows.
    pub fn matrix(&self, t: f64) -> Result<Mat<f64>> {
        Self::check_t(t)?;
        let n = self.spec.len();
        let v = Mat::<f64>::from_fn(n, n, |i, k| self.spec.vector(k)[i]);
        let scaled = Mat::<f64>::from_fn(n, n, |i, k| v[(i, k)] * (-self.rate * self.spec.eigenvalues[k] * t).exp());
        Ok(&scaled * v.transpose())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    Ten,
    E,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Ten => x.log10(),
            LogBase::E => x.ln(),
        }
    }

    fn exp(self, x: f64) -> f64 {
        match self {
            LogBase::Ten => 10f64.powf(x),
            LogBase::E => x.exp(),
        }
    }
}

/// Sampling for a log-log diagonal slope fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Heat rate multiplier (see `HeatKernel::with_rate`).
    pub rate: f64,
    pub base: LogBase,
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
}

impl SlopeFit {
    /// Combinatorial rates, natural-log axes, 401 samples across [-1, 3].
    /// This is the procedure that reproduces the reference slope tables.
    pub fn reference() -> Self {
        SlopeFit { rate: 4.0, base: LogBase::E, lo: -1.0, hi: 3.0, samples: 401 }
    }

    /// Normalized rates, log10 axes, 81 samples across [-1, 3].
    pub fn log10_window() -> Self {
        SlopeFit { rate: 1.0, base: LogBase::Ten, lo: -1.0, hi: 3.0, samples: 81 }
    }

    fn grid(&self) -> Vec<f64> {
        let n = self.samples.max(2);
        (0..n).map(|k| self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64).collect()
    }
}

impl Default for SlopeFit {
    fn default() -> Self {
        SlopeFit::reference()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeResult {
    /// Least-squares slope of log H_t(x,x) against log t.
    pub slope: f64,
    /// beta(x) = -slope.
    pub beta: f64,
    /// Window actually used (in the fit's log base).
    pub window: (f64, f64),
    pub samples_used: usize,
    /// True if the window was cut short because H underflowed.
    pub shrunk: bool,
}

/// Ordinary least-squares slope of y against x.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Power-law slope of the diagonal heat kernel at graph cell x.
pub fn diagonal_slope(spec: &Spectrum, x: usize, fit: &SlopeFit) -> Result<SlopeResult> {
    let rx = row(spec, x)?;
    let heat = HeatKernel::with_rate(spec, fit.rate);
    let grid = fit.grid();
    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    let mut shrunk = false;
    for &s in &grid {
        let h = heat.value_rows(fit.base.exp(s), rx, rx);
        if !(h > 1e-300) {
            shrunk = true;
            break;
        }
        xs.push(s);
        ys.push(fit.base.log(h));
    }
    if xs.len() < 2 {
        return Err(CarpetError::NumericCheck(format!("heat kernel underflows across the fit window at cell {x}")));
    }
    let slope = ols_slope(&xs, &ys);
    Ok(SlopeResult {
        slope,
        beta: -slope,
        window: (xs[0], *xs.last().expect("non-empty")),
        samples_used: xs.len(),
        shrunk,
    })
}

/// Which frequency the propagator uses for eigenvalue lambda.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveFrequency {
    /// sin(lambda t) / lambda.
    Linear,
    /// sin(sqrt(lambda) t) / sqrt(lambda), the usual wave equation.
    Sqrt,
}

impl WaveFrequency {
    fn omega(self, lambda: f64) -> f64 {
        match self {
            WaveFrequency::Linear => lambda,
            WaveFrequency::Sqrt => lambda.max(0.0).sqrt(),
        }
    }
}

/// sin(w t) / w, with its limit t at w = 0.
fn sinc_t(w: f64, t: f64) -> f64 {
    if w.abs() < 1e-12 {
        t
    } else {
        (w * t).sin() / w
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WavePropagator<'a> {
    spec: &'a Spectrum,
    freq: WaveFrequency,
}

impl<'a> WavePropagator<'a> {
    pub fn new(spec: &'a Spectrum, freq: WaveFrequency) -> Self {
        WavePropagator { spec, freq }
    }

    fn omegas(&self) -> impl Iterator<Item = f64> + '_ {
        self.spec.eigenvalues.iter().map(|&l| self.freq.omega(l))
    }

    /// W_t(x, y).
    pub fn value(&self, t: f64, x: usize, y: usize) -> Result<f64> {
        let (rx, ry) = (row(self.spec, x)?, row(self.spec, y)?);
        Ok(self
            .omegas()
            .enumerate()
            .map(|(k, w)| sinc_t(w, t) * self.spec.vector(k)[rx] * self.spec.vector(k)[ry])
            .sum())
    }

    /// dW_t(x, y)/dt.
    pub fn time_derivative(&self, t: f64, x: usize, y: usize) -> Result<f64> {
        let (rx, ry) = (row(self.spec, x)?, row(self.spec, y)?);
        Ok(self
            .omegas()
            .enumerate()
            .map(|(k, w)| (w * t).cos() * self.spec.vector(k)[rx] * self.spec.vector(k)[ry])
            .sum())
    }

    /// W_t(., y) on every operator row.
    pub fn column(&self, t: f64, y: usize) -> Result<Vec<f64>> {
        let ry = row(self.spec, y)?;
        let n = self.spec.len();
        let mut out = vec![0.0; n];
        for (k, w) in self.omegas().enumerate() {
            let v = self.spec.vector(k);
            let c = sinc_t(w, t) * v[ry];
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
        Ok(out)
    }

    /// Solution with displacement f and velocity g at time 0 (both indexed
    /// by operator row): returns (u(t), du/dt(t)).
    pub fn solve(&self, f: &[f64], g: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.spec.len();
        let mut u = vec![0.0; n];
        let mut ut = vec![0.0; n];
        for (k, w) in self.omegas().enumerate() {
            let v = self.spec.vector(k);
            let a: f64 = f.iter().zip(v).map(|(p, q)| p * q).sum();
            let b: f64 = g.iter().zip(v).map(|(p, q)| p * q).sum();
            let (c, s) = ((w * t).cos(), (w * t).sin());
            let pos = a * c + b * sinc_t(w, t);
            let vel = -a * w * s + b * c;
            for i in 0..n {
                u[i] += pos * v[i];
                ut[i] += vel * v[i];
            }
        }
        (u, ut)
    }

    /// <u_t, u_t> + <u, Omega^2 u>, Omega the frequency operator.
    pub fn energy(&self, u: &[f64], ut: &[f64]) -> f64 {
        let kinetic: f64 = ut.iter().map(|x| x * x).sum();
        let potential: f64 = self
            .omegas()
            .enumerate()
            .map(|(k, w)| {
                let c: f64 = u.iter().zip(self.spec.vector(k)).map(|(p, q)| p * q).sum();
                w * w * c * c
            })
            .sum();
        kinetic + potential
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileMode {
    /// The maximal horizontal run of operator cells through y.
    Line,
    /// Every cell, grouped by graph distance from y.
    Shell,
    /// Every cell, in operator order.
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub cell: usize,
    pub distance: u32,
    pub value: f64,
    pub noise: bool,
}

/// Least-squares fit of -ln(H(r)/H(0)) = c r^gamma over r >= 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayFit {
    pub gamma: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSeries {
    pub base: usize,
    pub t: f64,
    pub mode: ProfileMode,
    pub points: Vec<ProfilePoint>,
    /// Absolute resolution of the spectral sum: sqrt(n) * eps * max |value|.
    /// Differences below it are round-off.
    pub roundoff: f64,
    /// Fit to the per-shell maxima (upper envelope).
    pub gamma_upper: Option<DecayFit>,
    /// Fit to the per-shell minima (lower envelope).
    pub gamma_lower: Option<DecayFit>,
}

impl KernelSeries {
    /// (distance, max value, min value) per shell.
    pub fn shell_extremes(&self) -> Vec<(u32, f64, f64)> {
        let dmax = self.points.iter().map(|p| p.distance).max().unwrap_or(0);
        let mut out: Vec<(u32, f64, f64)> = (0..=dmax).map(|d| (d, f64::MIN, f64::MAX)).collect();
        let mut seen = vec![false; out.len()];
        for p in &self.points {
            let e = &mut out[p.distance as usize];
            e.1 = e.1.max(p.value);
            e.2 = e.2.min(p.value);
            seen[p.distance as usize] = true;
        }
        out.into_iter().zip(seen).filter(|(_, s)| *s).map(|(e, _)| e).collect()
    }

    /// Whether the shell maximum is non-increasing from shell `from` on, over
    /// shells whose maxima lie above the round-off floor.
    pub fn shell_max_decreasing(&self, from: u32) -> bool {
        let resolved: Vec<(u32, f64)> = self
            .shell_extremes()
            .into_iter()
            .filter(|e| e.0 >= from && e.1 > self.roundoff)
            .map(|e| (e.0, e.1))
            .collect();
        resolved.windows(2).all(|w| w[1].1 <= w[0].1 + self.roundoff)
    }

    pub fn write_csv<W: Write>(&self, g: &CarpetGraph, mut w: W) -> Result<()> {
        writeln!(w, "r,cell,value,log10_value,noise")?;
        for p in &self.points {
            writeln!(
                w,
                "{},\"{}\",{:.12e},{:.6},{}",
                p.distance,
                g.cell(p.cell),
                p.value,
                p.value.abs().log10(),
                u8::from(p.noise)
            )?;
        }
        Ok(())
    }
}

fn fit_decay(shells: &[(u32, f64)], floor: f64) -> Option<DecayFit> {
    let h0 = shells.iter().find(|e| e.0 == 0)?.1;
    let (xs, ys): (Vec<f64>, Vec<f64>) = shells
        .iter()
        .filter(|&&(r, h)| r >= 1 && h > floor.max(NOISE_FLOOR) && h < h0)
        .map(|&(r, h)| ((r as f64).ln(), (-(h / h0).ln()).ln()))
        .unzip();
    if xs.len() < 2 {
        return None;
    }
    let gamma = ols_slope(&xs, &ys);
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    Some(DecayFit { gamma, c: (my - gamma * mx).exp() })
}

/// Off-diagonal profile of the heat kernel H_t(., y) on the spectrum's graph.
pub fn off_diagonal_profile(
    heat: &HeatKernel,
    g: &CarpetGraph,
    y: usize,
    t: f64,
    mode: ProfileMode,
) -> Result<KernelSeries> {
    let spec = heat.spectrum();
    if g.level() != spec.m || g.len() != spec.n_graph_cells() {
        return Err(CarpetError::InvalidArgument("graph does not match the spectrum".into()));
    }
    let col = heat.column(t, y)?;
    let dist = bfs_distances(g, y, None);
    let point = |cell: usize| -> Option<ProfilePoint> {
        let r = spec.row_of(cell)?;
        let value = col[r];
        Some(ProfilePoint { cell, distance: dist[cell]?, value, noise: value.abs() < NOISE_FLOOR })
    };
    let mut points: Vec<ProfilePoint> = match mode {
        ProfileMode::Full | ProfileMode::Shell => spec.cells.iter().filter_map(|&c| point(c)).collect(),
        ProfileMode::Line => {
            let c = g.cell(y);
            let on_line = |i: u64| g.index_of(i, c.j).filter(|&k| spec.row_of(k).is_some());
            let mut lo = c.i;
            while lo > 0 && on_line(lo - 1).is_some() {
                lo -= 1;
            }
            let mut hi = c.i;
            while on_line(hi + 1).is_some() {
                hi += 1;
            }
            (lo..=hi).filter_map(|i| on_line(i).and_then(point)).collect()
        }
    };
    if mode == ProfileMode::Shell {
        points.sort_by_key(|p| (p.distance, p.cell));
    }
    let roundoff = (col.len() as f64).sqrt() * f64::EPSILON * col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut series = KernelSeries { base: y, t, mode, points, roundoff, gamma_upper: None, gamma_lower: None };
    let ext = series.shell_extremes();
    series.gamma_upper = fit_decay(&ext.iter().map(|e| (e.0, e.1)).collect::<Vec<_>>(), roundoff);
    series.gamma_lower = fit_decay(&ext.iter().map(|e| (e.0, e.2)).collect::<Vec<_>>(), roundoff);
    Ok(series)
}
