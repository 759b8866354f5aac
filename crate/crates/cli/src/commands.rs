use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use carpet_core::harmonic::{poisson_kernel, resistance_profile};
use carpet_core::kernels::{
    diagonal_slope, off_diagonal_profile, HeatKernel, ProfileMode, SlopeFit, WaveFrequency, WavePropagator,
};
use carpet_core::metric::{ball_series_auto, bfs_distances};
use carpet_core::multiscale::{
    level_chain, refinement_scan, spectral_projection, tile_eigenfunction, write_refinement_csv,
};
use carpet_core::spectral::{
    boundary_decay_scan, eigendecompose, eigenvalue_ratios, eigenvalues_only, segmentation, weyl_table, LaplacianKind,
    Spectrum, WeylCurve, SEGMENT_WINDOW,
};
use carpet_core::walk::{run_batch, WalkConfig};
use carpet_core::{
    build_glued, build_unglued, BlowupOracle, CarpetError, CarpetGraph, CellAddr, ExtAddr, GraphKind, IdentSequence,
    IdentType, Result,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::Params;

pub struct Ctx {
    pub command: &'static str,
    pub params: Params,
    pub hash: String,
    out: PathBuf,
    cache: PathBuf,
}

fn config_error(msg: impl Into<String>) -> CarpetError {
    CarpetError::InvalidArgument(msg.into())
}

impl Ctx {
    pub fn new(command: &'static str, params: Params) -> Result<Ctx> {
        let hash = params.hash(command)?;
        let (out, cache) = (params.out_dir(), params.cache_dir());
        fs::create_dir_all(&out)?;
        Ok(Ctx { command, params, hash, out, cache })
    }

    /// A CSV whose first line is `# config_hash=sha256:<hex>`.
    fn csv(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.out.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "# config_hash=sha256:{}", self.hash)?;
        body(&mut w)?;
        w.flush()?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }

    fn summary(&self, value: serde_json::Value) -> Result<()> {
        let doc = json!({ "command": self.command, "config_hash": self.hash, "config": self.params, "result": value });
        let path = self.out.join(format!("{}_summary.json", self.command));
        fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
        println!("{}", serde_json::to_string_pretty(&doc["result"])?);
        Ok(())
    }

    fn cache_path(&self, stem: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.cache)?;
        Ok(self.cache.join(stem))
    }

    /// Full spectrum, from the cache when present.
    fn spectrum(&self, g: &CarpetGraph, kind: LaplacianKind) -> Result<Spectrum> {
        let path = self.cache_path(&format!("spectrum_{}_m{}_{}.bin", kind_tag(kind), g.level(), g.seq()))?;
        if path.exists() {
            eprintln!("loading {}", path.display());
            return Spectrum::read_cache(&path, g);
        }
        eprintln!("decomposing {:?} level {} {}", kind, g.level(), g.seq());
        let s = eigendecompose(g, kind)?;
        s.write_cache(&path)?;
        Ok(s)
    }

    /// Glued eigenvalues only, cached as JSON.
    fn glued_eigenvalues(&self, seq: &IdentSequence, m: u32) -> Result<Vec<f64>> {
        let seq = seq.truncated(m)?;
        let path = self.cache_path(&format!("eigenvalues_glued_m{m}_{seq}.json"))?;
        if path.exists() {
            return Ok(serde_json::from_str(&fs::read_to_string(&path)?)?);
        }
        let ev = eigenvalues_only(&build_glued(m, &seq)?, LaplacianKind::CombinatorialGlued)?;
        fs::write(&path, serde_json::to_string(&ev)?)?;
        Ok(ev)
    }
}

fn kind_tag(kind: LaplacianKind) -> &'static str {
    match kind {
        LaplacianKind::NormalizedDirichlet => "dirichlet",
        LaplacianKind::CombinatorialGlued => "glued",
    }
}

fn laplacian_kind(p: &Params, default: LaplacianKind) -> Result<LaplacianKind> {
    match p.kind.as_deref() {
        None => Ok(default),
        Some("glued") => Ok(LaplacianKind::CombinatorialGlued),
        Some("dirichlet") => Ok(LaplacianKind::NormalizedDirichlet),
        Some(k) => Err(config_error(format!("unknown operator kind {k:?} (glued or dirichlet)"))),
    }
}

fn graph_for(kind: LaplacianKind, seq: &IdentSequence, m: u32) -> Result<CarpetGraph> {
    match kind {
        LaplacianKind::CombinatorialGlued => build_glued(m, seq),
        LaplacianKind::NormalizedDirichlet => build_unglued(m, seq),
    }
}

fn cell_index(g: &CarpetGraph, s: &str) -> Result<usize> {
    let addr: CellAddr = s.parse()?;
    if addr.m != g.level() {
        return Err(config_error(format!("cell {s} has {} digits, the graph has level {}", addr.m, g.level())));
    }
    g.index_of_addr(&addr)
}

fn cell_list(g: &CarpetGraph, s: &str) -> Result<Vec<usize>> {
    s.split(';').map(str::trim).filter(|x| !x.is_empty()).map(|x| cell_index(g, x)).collect()
}

pub fn build(ctx: &Ctx) -> Result<()> {
    let (seq, m) = ctx.params.sequence(None)?;
    let kind = match ctx.params.kind.as_deref().unwrap_or("glued") {
        "glued" => GraphKind::Glued,
        "unglued" => GraphKind::Unglued,
        k => return Err(config_error(format!("unknown graph kind {k:?} (glued or unglued)"))),
    };
    let g = CarpetGraph::build(m, &seq, kind)?;
    ctx.csv("graph.csv", |w| g.write_csv(w))?;
    let regular = (0..g.len()).all(|k| g.degree(k) == 4);
    ctx.summary(json!({
        "cells": g.len(),
        "boundary_cells": g.boundary_count(),
        "four_regular": regular,
        "slots_reciprocal": g.slots_reciprocal(),
    }))
}

pub fn balls(ctx: &Ctx) -> Result<()> {
    let t = ctx.params.ident_type(Some(IdentType::Torus))?;
    let r_max = ctx.params.r_max.unwrap_or(512);
    let o = BlowupOracle::uniform(t);
    let series = ball_series_auto(&o, ExtAddr::origin(), r_max)?;
    ctx.csv("balls.csv", |w| series.write_csv(w))?;
    let ratios: Vec<f64> = (32..=r_max).map(|r| series.ratio(r)).collect();
    let lower: Vec<serde_json::Value> = (1..=5u32)
        .filter(|&m| (m as u64) << m <= r_max)
        .map(|m| {
            let r = (m as u64) << m;
            json!({ "m": m, "radius": r, "count": series.count(r), "eight_pow_m": 8u64.pow(m) })
        })
        .collect();
    ctx.summary(json!({
        "type": t.code(),
        "window_level": series.window_level,
        "ratio_min_32": ratios.iter().copied().fold(f64::INFINITY, f64::min),
        "ratio_max_32": ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "growth_checks": lower,
    }))
}

pub fn walk(ctx: &Ctx) -> Result<()> {
    let p = &ctx.params;
    let t = p.ident_type(Some(IdentType::Torus))?;
    let cfg = WalkConfig::new(p.trials.unwrap_or(1000), p.max_length.unwrap_or(500_000), p.seed.unwrap_or(20240601));
    let stats = run_batch(&BlowupOracle::uniform(t), &cfg)?;
    let width = p.hist_width.unwrap_or(0.25);
    ctx.csv("walk_trials.csv", |w| stats.write_trials_csv(w))?;
    ctx.csv("walk_histogram.csv", |w| stats.write_histogram_csv(w, width))?;
    ctx.summary(json!({
        "type": t.code(),
        "trials": stats.trials,
        "recurrent": stats.recurrent_count,
        "transient": stats.transient_count,
        "recurrent_fraction": stats.recurrent_fraction(),
        "even_returns": stats.even_returns,
        "odd_returns": stats.odd_returns,
    }))
}

pub fn resistance(ctx: &Ctx) -> Result<()> {
    let (seq, m) = ctx.params.sequence(None)?;
    let g = build_unglued(m, &seq)?;
    let prof = resistance_profile(&g)?;
    ctx.csv("resistance.csv", |w| prof.write_csv(&g, w))?;
    ctx.summary(json!({
        "seq": seq.to_string(),
        "max": prof.max(),
        "hill_ratio": prof.hill_ratio(),
        "max_by_distance": prof.max_by_distance(),
    }))
}

pub fn spectrum(ctx: &Ctx) -> Result<()> {
    let (seq, m) = ctx.params.sequence(None)?;
    let kind = laplacian_kind(&ctx.params, LaplacianKind::CombinatorialGlued)?;
    let g = graph_for(kind, &seq, m)?;
    let s = ctx.spectrum(&g, kind)?;
    let clusters = s.clusters();
    ctx.csv("eigenvalues.csv", |w| {
        writeln!(w, "index,eigenvalue,cluster,multiplicity")?;
        for (c, r) in clusters.iter().enumerate() {
            for k in r.clone() {
                writeln!(w, "{k},{:.15e},{c},{}", s.eigenvalues[k], r.len())?;
            }
        }
        Ok(())
    })?;
    ctx.summary(json!({
        "seq": seq.to_string(),
        "kind": kind_tag(kind),
        "order": s.len(),
        "residual": s.residual,
        "double_positions_first_16": s.double_positions(16),
    }))
}

pub fn dirichlet_scan(ctx: &Ctx) -> Result<()> {
    let (seq, m) = ctx.params.sequence(None)?;
    let g = build_unglued(m, &seq)?;
    let s = ctx.spectrum(&g, LaplacianKind::NormalizedDirichlet)?;
    let width = ctx.params.width.unwrap_or(1);
    let masses = boundary_decay_scan(&s, &g, width, ctx.params.k_max.unwrap_or(150))?;
    ctx.csv("boundary_mass.csv", |w| {
        writeln!(w, "index,eigenvalue,boundary_mass_fraction")?;
        for (k, f) in masses.iter().enumerate() {
            writeln!(w, "{k},{:.15e},{:.12e}", s.eigenvalues[k], f)?;
        }
        Ok(())
    })?;
    let (argmin, min) =
        masses.iter().enumerate().fold((0, f64::INFINITY), |a, (k, &f)| if f < a.1 { (k, f) } else { a });
    ctx.summary(json!({ "seq": seq.to_string(), "width": width, "scanned": masses.len(), "min_fraction": min, "argmin": argmin }))
}

pub fn heat(ctx: &Ctx) -> Result<()> {
    let p = &ctx.params;
    let (seq, m) = p.sequence(None)?;
    let g = build_unglued(m, &seq)?;
    let s = ctx.spectrum(&g, LaplacianKind::NormalizedDirichlet)?;
    let fit = match p.fit.as_deref().unwrap_or("reference") {
        "reference" => SlopeFit::reference(),
        "log10" => SlopeFit::log10_window(),
        f => return Err(config_error(format!("unknown fit {f:?} (reference or log10)"))),
    };
    let cells = match &p.cells {
        Some(list) => cell_list(&g, list)?,
        None => g.interior_cells(),
    };
    let slopes = cells.par_iter().map(|&x| diagonal_slope(&s, x, &fit)).collect::<Result<Vec<_>>>()?;
    ctx.csv("heat_slopes.csv", |w| {
        writeln!(w, "cell,slope,beta,window_lo,window_hi,samples,shrunk")?;
        for (x, r) in cells.iter().zip(&slopes) {
            writeln!(
                w,
                "\"{}\",{:.9},{:.9},{},{},{},{}",
                g.cell(*x),
                r.slope,
                r.beta,
                r.window.0,
                r.window.1,
                r.samples_used,
                u8::from(r.shrunk)
            )?;
        }
        Ok(())
    })?;
    let mut profiles = Vec::new();
    if let Some(y) = &p.cell {
        let y = cell_index(&g, y)?;
        let mode = match p.profile.as_deref().unwrap_or("shell") {
            "line" => ProfileMode::Line,
            "shell" => ProfileMode::Shell,
            "full" => ProfileMode::Full,
            other => return Err(config_error(format!("unknown profile mode {other:?}"))),
        };
        let heat = HeatKernel::new(&s);
        let times: Vec<f64> = Params::list(p.times.as_deref().unwrap_or("0.1,1,10"), "time")?;
        for (k, &t) in times.iter().enumerate() {
            let series = off_diagonal_profile(&heat, &g, y, t, mode)?;
            ctx.csv(&format!("heat_profile_{k}.csv"), |w| series.write_csv(&g, w))?;
            profiles.push(json!({
                "t": t,
                "file": format!("heat_profile_{k}.csv"),
                "gamma_upper": series.gamma_upper,
                "gamma_lower": series.gamma_lower,
                "shell_max_decreasing_from_2": series.shell_max_decreasing(2),
                "roundoff": series.roundoff,
            }));
        }
    }
    ctx.summary(json!({ "seq": seq.to_string(), "fit": fit, "cells": cells.len(), "profiles": profiles }))
}

pub fn wave(ctx: &Ctx) -> Result<()> {
    let p = &ctx.params;
    let (seq, m) = p.sequence(None)?;
    let kind = laplacian_kind(p, LaplacianKind::NormalizedDirichlet)?;
    let g = graph_for(kind, &seq, m)?;
    let s = ctx.spectrum(&g, kind)?;
    let freq = match p.freq.as_deref().unwrap_or("linear") {
        "linear" => WaveFrequency::Linear,
        "sqrt" => WaveFrequency::Sqrt,
        f => return Err(config_error(format!("unknown frequency {f:?} (linear or sqrt)"))),
    };
    let y = cell_index(&g, p.cell.as_deref().ok_or_else(|| config_error("wave needs --cell"))?)?;
    let times: Vec<f64> = Params::list(p.times.as_deref().unwrap_or("0,0.5,1,2"), "time")?;
    if times.iter().any(|t| t.is_nan() || *t < 0.0) {
        return Err(config_error("times must be non-negative"));
    }
    let w = WavePropagator::new(&s, freq);
    ctx.csv("wave.csv", |out| {
        writeln!(out, "t,cell,w,dw_dt")?;
        for &t in &times {
            let col = w.column(t, y)?;
            for (r, &x) in s.cells.iter().enumerate() {
                writeln!(out, "{t},\"{}\",{:.12e},{:.12e}", g.cell(x), col[r], w.time_derivative(t, x, y)?)?;
            }
        }
        Ok(())
    })?;
    ctx.summary(json!({ "seq": seq.to_string(), "kind": kind_tag(kind), "frequency": freq, "times": times }))
}

pub fn poisson(ctx: &Ctx) -> Result<()> {
    let (seq, m) = ctx.params.sequence(None)?;
    let g = build_unglued(m, &seq)?;
    let y = cell_index(&g, ctx.params.cell.as_deref().ok_or_else(|| config_error("poisson needs a boundary --cell"))?)?;
    let pk = poisson_kernel(&g, y)?;
    let d = bfs_distances(&g, y, None);
    ctx.csv("poisson.csv", |w| {
        writeln!(w, "cell,distance,value")?;
        for (k, v) in pk.iter().enumerate() {
            writeln!(w, "\"{}\",{},{:.12e}", g.cell(k), d[k].map_or(-1, i64::from), v)?;
        }
        Ok(())
    })?;
    ctx.summary(json!({ "seq": seq.to_string(), "base": g.cell(y).to_string(), "sum": pk.iter().sum::<f64>() }))
}

pub fn tile_cmd(ctx: &Ctx) -> Result<()> {
    let t = ctx.params.ident_type(None)?;
    let m = ctx.params.m.unwrap_or(2);
    let chain = level_chain(t, m, m + 1)?;
    let s = ctx.spectrum(&chain[0], LaplacianKind::CombinatorialGlued)?;
    let tiled = (0..s.len()).map(|k| tile_eigenfunction(&s, k, &chain[0], &chain[1])).collect::<Result<Vec<_>>>()?;
    ctx.csv("tile_residuals.csv", |w| {
        writeln!(w, "index,eigenvalue,residual")?;
        for (k, f) in tiled.iter().enumerate() {
            writeln!(w, "{k},{:.15e},{:.3e}", f.eigenvalue, f.residual)?;
        }
        Ok(())
    })?;
    if let Some(k) = ctx.params.index {
        let f = tiled.get(k).ok_or_else(|| config_error(format!("index {k} out of range")))?;
        ctx.csv("tiled.csv", |w| {
            writeln!(w, "cell,value")?;
            for (c, v) in chain[1].cells().iter().zip(&f.values) {
                writeln!(w, "\"{c}\",{v:.15e}")?;
            }
            Ok(())
        })?;
    }
    let worst = tiled.iter().map(|f| f.residual).fold(0.0, f64::max);
    ctx.summary(json!({ "type": t.code(), "source_level": m, "vectors": tiled.len(), "max_residual": worst }))
}

pub fn refine(ctx: &Ctx) -> Result<()> {
    let t = ctx.params.ident_type(None)?;
    let m = ctx.params.m.unwrap_or(4);
    if m < 2 {
        return Err(config_error("refine needs m >= 2"));
    }
    let chain = level_chain(t, m - 1, m)?;
    let coarse = ctx.spectrum(&chain[0], LaplacianKind::CombinatorialGlued)?;
    let fine = ctx.spectrum(&chain[1], LaplacianKind::CombinatorialGlued)?;
    let rows = refinement_scan(&chain[1], &fine, &chain[0], &coarse)?;
    ctx.csv("refinement.csv", |w| write_refinement_csv(&rows, w))?;
    let count = |label: &str| rows.iter().filter(|r| r.score.category.label() == label).count();
    ctx.summary(json!({
        "type": t.code(),
        "fine_level": m,
        "ok": count("ok"),
        "average_zero": count("ubar=0"),
        "projection_zero": count("proj=0"),
    }))
}

/// P^(m)_[a,b) of a point mass, for each level, compared on the smallest
/// window (the lower-left copy, whose coordinates agree at every level).
pub fn resolution(ctx: &Ctx) -> Result<()> {
    let p = &ctx.params;
    let t = p.ident_type(None)?;
    let mut levels: Vec<u32> = Params::list(p.levels.as_deref().unwrap_or("2,3,4"), "level")?;
    levels.sort_unstable();
    levels.dedup();
    let m0 = *levels.first().ok_or_else(|| config_error("no levels"))?;
    let addr: CellAddr = p.cell.as_deref().ok_or_else(|| config_error("resolution needs --cell"))?.parse()?;
    if addr.m != m0 || addr.is_on_ring() {
        return Err(config_error(format!("--cell must be a non-ring cell of level {m0}")));
    }
    let (a, b) = (p.a.unwrap_or(0.0), p.b.unwrap_or(1.0));
    let base = build_glued(m0, &IdentSequence::uniform(t, m0))?;
    let mut results: Vec<Vec<f64>> = Vec::new();
    for &m in &levels {
        let g = build_glued(m, &IdentSequence::uniform(t, m))?;
        let s = ctx.spectrum(&g, LaplacianKind::CombinatorialGlued)?;
        let mut f = vec![0.0; g.len()];
        f[g.index_of(addr.i, addr.j).ok_or_else(|| config_error("cell is in a hole"))?] = 1.0;
        let proj = spectral_projection(&s, &g, &f, a, b)?;
        results.push(base.cells().iter().map(|c| proj[g.index_of(c.i, c.j).expect("lower-left copy")]).collect());
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut rows = Vec::new();
    ctx.csv("resolution.csv", |w| {
        writeln!(w, "level,norm_on_base_window,diff_from_previous")?;
        for (k, &m) in levels.iter().enumerate() {
            let diff = (k > 0).then(|| {
                let d: Vec<f64> = results[k].iter().zip(&results[k - 1]).map(|(x, y)| x - y).collect();
                norm(&d)
            });
            writeln!(w, "{m},{:.12e},{}", norm(&results[k]), diff.map(|d| format!("{d:.12e}")).unwrap_or_default())?;
            rows.push(json!({ "level": m, "norm": norm(&results[k]), "diff_from_previous": diff }));
        }
        Ok(())
    })?;
    ctx.summary(json!({ "type": t.code(), "cell": addr.to_string(), "a": a, "b": b, "levels": rows }))
}

fn alphabet(s: &str) -> Result<Vec<IdentType>> {
    let seq: IdentSequence = s.parse()?;
    let mut out: Vec<IdentType> = Vec::new();
    for &t in seq.entries() {
        if !out.contains(&t) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Every sequence whose first m entries come from the alphabet; the last
/// entry repeats entry m-1 (it does not affect the level-m graph).
pub fn sweep_sequences(letters: &[IdentType], m: u32) -> Vec<IdentSequence> {
    let mut out = Vec::new();
    let total = letters.len().pow(m);
    for mut code in 0..total {
        let mut entries = vec![letters[0]; m as usize];
        for e in entries.iter_mut().rev() {
            *e = letters[code % letters.len()];
            code /= letters.len();
        }
        entries.push(entries[m as usize - 1]);
        out.push(IdentSequence::new(entries).expect("non-empty"));
    }
    out
}

pub fn weyl_sweep(ctx: &Ctx) -> Result<()> {
    let p = &ctx.params;
    let m = p.m.unwrap_or(4);
    if m < 2 {
        return Err(config_error("weyl-sweep needs m >= 2"));
    }
    let letters = alphabet(p.alphabet.as_deref().unwrap_or("TP"))?;
    let prefixes: Vec<usize> = Params::list(p.prefix.as_deref().unwrap_or("1,2,3"), "prefix")?;
    let samples = p.samples.unwrap_or(301);
    let seqs = sweep_sequences(&letters, m);
    eprintln!("sweeping {} sequences at level {m}", seqs.len());
    let curves = seqs
        .par_iter()
        .map(|seq| {
            let coarse = ctx.glued_eigenvalues(seq, m - 1)?;
            let fine = ctx.glued_eigenvalues(seq, m)?;
            let ratios = eigenvalue_ratios(&coarse, &fine, 10)?;
            WeylCurve::new(seq.clone(), ratios.iter().sum::<f64>() / ratios.len() as f64, fine)
        })
        .collect::<Result<Vec<_>>>()?;
    for c in &curves {
        let table = weyl_table(&c.eigenvalues, c.r)?;
        ctx.csv(&format!("weyl_{}.csv", c.seq), |w| table.write_csv(w))?;
    }
    ctx.csv("sweep.csv", |w| {
        writeln!(w, "seq,r,alpha")?;
        for c in &curves {
            writeln!(w, "{},{:.9},{:.9}", c.seq, c.r, c.alpha)?;
        }
        Ok(())
    })?;
    let reports: Vec<_> = prefixes.iter().map(|&k| segmentation(&curves, k, SEGMENT_WINDOW, samples)).collect();
    ctx.csv("segmentation.csv", |w| {
        writeln!(w, "prefix,within_mean,across_mean,within_max,across_max,within_pairs,across_pairs")?;
        for r in &reports {
            writeln!(
                w,
                "{},{:.9},{:.9},{:.9},{:.9},{},{}",
                r.prefix, r.within_mean, r.across_mean, r.within_max, r.across_max, r.within_pairs, r.across_pairs
            )?;
        }
        Ok(())
    })?;
    ctx.summary(
        json!({ "level": m, "sequences": curves.len(), "window_ln_t": SEGMENT_WINDOW, "segmentation": reports }),
    )
}
