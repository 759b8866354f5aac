//! Simple random walk on a blowup, stopped at the first return to the start
//! or after a fixed number of steps.

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CarpetError, Result};
use crate::oracle::{BlowupOracle, ExtAddr, MAX_BLOWUP_LEVEL};
use crate::topology::Dir;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkConfig {
    pub trials: u64,
    pub max_length: u64,
    pub master_seed: u64,
    pub start: ExtAddr,
}

impl WalkConfig {
    pub fn new(trials: u64, max_length: u64, master_seed: u64) -> Self {
        WalkConfig { trials, max_length, master_seed, start: ExtAddr::origin() }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(CarpetError::InvalidArgument("trials must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrialResult {
    Recurrent(u64),
    Transient,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index`: splitmix64(master_seed ^ splitmix64(index)).
pub fn trial_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

/// One walk. The generator is ChaCha8 seeded by `trial_seed`; each step uses
/// two bits of its output, low bits first, as an index into Left/Right/Up/Down.
pub fn run_trial(o: &BlowupOracle, config: &WalkConfig, index: u64) -> Result<TrialResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.master_seed, index));
    let mut start = config.start;
    let mut pos = start;
    let mut bits = 0u64;
    let mut left = 0u32;
    for step in 1..=config.max_length {
        if left == 0 {
            bits = rng.next_u64();
            left = 32;
        }
        let dir = Dir::ALL[(bits & 3) as usize];
        bits >>= 2;
        left -= 1;
        loop {
            if let Some((i, j)) = o.step_window(pos.level, pos.i, pos.j, dir) {
                pos.i = i;
                pos.j = j;
                break;
            }
            if pos.level >= MAX_BLOWUP_LEVEL - 1 {
                return Err(CarpetError::LevelTooLarge { m: pos.level + 1, max: MAX_BLOWUP_LEVEL - 1 });
            }
            pos = o.lift(pos, pos.level + 1)?;
            start = o.lift(start, pos.level)?;
        }
        if pos.i == start.i && pos.j == start.j && pos.level == start.level {
            return Ok(TrialResult::Recurrent(step));
        }
    }
    Ok(TrialResult::Transient)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkStats {
    pub trials: u64,
    pub recurrent_count: u64,
    pub transient_count: u64,
    /// (trial_index, return_length) for each recurrent trial, by index.
    pub return_lengths: Vec<(u64, u64)>,
    pub even_returns: u64,
    pub odd_returns: u64,
}

impl WalkStats {
    pub fn recurrent_fraction(&self) -> f64 {
        self.recurrent_count as f64 / self.trials as f64
    }

    /// Counts of return lengths per bin of log10(length), bins of `width`
    /// labelled by their lower edge.
    pub fn histogram(&self, width: f64) -> Vec<(f64, u64)> {
        let mut bins: Vec<(i64, u64)> = Vec::new();
        for &(_, len) in &self.return_lengths {
            let b = ((len as f64).log10() / width + 1e-9).floor() as i64;
            match bins.binary_search_by_key(&b, |e| e.0) {
                Ok(k) => bins[k].1 += 1,
                Err(k) => bins.insert(k, (b, 1)),
            }
        }
        bins.into_iter().map(|(b, c)| (b as f64 * width, c)).collect()
    }

    pub fn write_trials_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "trial_index,outcome,return_length")?;
        let mut returns = self.return_lengths.iter().peekable();
        for k in 0..self.trials {
            match returns.peek() {
                Some(&&(idx, len)) if idx == k => {
                    returns.next();
                    writeln!(w, "{k},recurrent,{len}")?;
                }
                _ => writeln!(w, "{k},transient,")?,
            }
        }
        Ok(())
    }

    pub fn write_histogram_csv<W: Write>(&self, mut w: W, width: f64) -> Result<()> {
        writeln!(w, "log10_length_bin,count")?;
        for (b, c) in self.histogram(width) {
            writeln!(w, "{b:.3},{c}")?;
        }
        Ok(())
    }
}

/// All trials, in parallel; the result does not depend on scheduling.
pub fn run_batch(o: &BlowupOracle, config: &WalkConfig) -> Result<WalkStats> {
    config.validate()?;
    let results: Vec<TrialResult> =
        (0..config.trials).into_par_iter().map(|k| run_trial(o, config, k)).collect::<Result<_>>()?;
    let return_lengths: Vec<(u64, u64)> = results
        .iter()
        .enumerate()
        .filter_map(|(k, r)| match r {
            TrialResult::Recurrent(len) => Some((k as u64, *len)),
            TrialResult::Transient => None,
        })
        .collect();
    let recurrent_count = return_lengths.len() as u64;
    let even_returns = return_lengths.iter().filter(|(_, l)| l % 2 == 0).count() as u64;
    Ok(WalkStats {
        trials: config.trials,
        recurrent_count,
        transient_count: config.trials - recurrent_count,
        even_returns,
        odd_returns: recurrent_count - even_returns,
        return_lengths,
    })
}
