use std::path::{Path, PathBuf};

use carpet_core::{CarpetError, IdentSequence, IdentType, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Every experiment parameter. The same struct is read from the JSON config
/// and from flags; flags win.
#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Identification sequence, e.g. TTTTT or TPKhKvT (length m+1)
    #[arg(long)]
    pub seq: Option<String>,
    /// Carpet level
    #[arg(long)]
    pub m: Option<u32>,
    /// Constant identification type: T, P, Kh or Kv
    #[arg(long = "type")]
    #[serde(rename = "type")]
    pub ident: Option<String>,
    /// Master seed for random walks
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Spectrum cache directory
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Graph or operator kind: glued, unglued or dirichlet
    #[arg(long)]
    pub kind: Option<String>,
    /// Largest ball radius
    #[arg(long)]
    pub r_max: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub max_length: Option<u64>,
    /// Histogram bin width in log10(length)
    #[arg(long)]
    pub hist_width: Option<f64>,
    /// Cell in base-3 form, e.g. (1000,0222)
    #[arg(long)]
    pub cell: Option<String>,
    /// Cells separated by ';'
    #[arg(long)]
    pub cells: Option<String>,
    /// Comma-separated times
    #[arg(long)]
    pub times: Option<String>,
    /// Heat slope procedure: reference or log10
    #[arg(long)]
    pub fit: Option<String>,
    /// Off-diagonal heat profile mode: line, shell or full
    #[arg(long)]
    pub profile: Option<String>,
    /// Wave frequency: linear or sqrt
    #[arg(long)]
    pub freq: Option<String>,
    /// Boundary band width for the Dirichlet scan
    #[arg(long)]
    pub width: Option<u32>,
    /// Number of eigenfunctions to scan
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Eigenvector index
    #[arg(long)]
    pub index: Option<usize>,
    /// Lower end of the spectral window
    #[arg(long)]
    pub a: Option<f64>,
    /// Upper end of the spectral window
    #[arg(long)]
    pub b: Option<f64>,
    /// Comma-separated levels
    #[arg(long)]
    pub levels: Option<String>,
    /// Identification types to sweep, e.g. TP or TPKhKv
    #[arg(long)]
    pub alphabet: Option<String>,
    /// Comma-separated prefix lengths for grouping
    #[arg(long)]
    pub prefix: Option<String>,
    /// Samples per gap comparison
    #[arg(long)]
    pub samples: Option<usize>,
}

fn config_error(msg: impl Into<String>) -> CarpetError {
    CarpetError::InvalidArgument(msg.into())
}

impl Params {
    pub fn load(path: &Path) -> Result<Params> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| config_error(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `flags` replace those in `self`.
    pub fn overlay(self, flags: &Params) -> Result<Params> {
        let mut base = serde_json::to_value(self)?;
        let over = serde_json::to_value(flags)?;
        if let (Some(b), Some(o)) = (base.as_object_mut(), over.as_object()) {
            for (k, v) in o {
                if !v.is_null() {
                    b.insert(k.clone(), v.clone());
                }
            }
        }
        Ok(serde_json::from_value(base)?)
    }

    /// sha256 of the command name and every parameter except the output
    /// and cache locations.
    pub fn hash(&self, command: &str) -> Result<String> {
        let mut p = self.clone();
        p.out = None;
        p.cache = None;
        let json = serde_json::to_string(&serde_json::json!({ "command": command, "params": p }))?;
        let digest = Sha256::digest(json.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache.clone().unwrap_or_else(|| PathBuf::from("cache"))
    }

    /// Constant type from --type, else from a constant --seq.
    pub fn ident_type(&self, default: Option<IdentType>) -> Result<IdentType> {
        if let Some(t) = &self.ident {
            return t.parse();
        }
        if let Some(s) = &self.seq {
            let seq: IdentSequence = s.parse()?;
            return seq.constant_type().ok_or_else(|| config_error(format!("sequence {s} is not constant")));
        }
        default.ok_or_else(|| config_error("give --type or a constant --seq"))
    }

    /// Sequence and level: --seq (its length fixes m unless --m is given and
    /// must then equal m+1), or --type with --m.
    pub fn sequence(&self, default_m: Option<u32>) -> Result<(IdentSequence, u32)> {
        if let Some(s) = &self.seq {
            let seq: IdentSequence = s.parse()?;
            let implied = seq.len() as u32 - 1;
            if let Some(m) = self.m.filter(|&m| m != implied) {
                return Err(config_error(format!("sequence {s} has length {}, level {m} needs {}", seq.len(), m + 1)));
            }
            return Ok((seq, implied));
        }
        let m = self.m.or(default_m).ok_or_else(|| config_error("give --seq, or --type with --m"))?;
        Ok((IdentSequence::uniform(self.ident_type(None)?, m), m))
    }

    pub fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
        s.split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| x.parse().map_err(|_| config_error(format!("bad {what} entry {x:?}"))))
            .collect()
    }
}
