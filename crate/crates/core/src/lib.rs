//! Magic-carpet cell graphs, their blowups, and the analysis run on them:
//! graph distances, random walks, discrete harmonic problems, glued
//! Laplacian spectra, heat and wave kernels, and multiscale operators.

// `!(x <= tol)` is deliberate: NaN must fail every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harmonic;
pub mod ident;
pub mod kernels;
pub mod metric;
pub mod multiscale;
pub mod oracle;
pub mod spectral;
pub mod topology;
pub mod walk;

pub use error::{CarpetError, Result};
pub use ident::{IdentSequence, IdentType, Reversal};
pub use oracle::{BlowupOracle, Embedding, ExtAddr, HoleRule};
pub use topology::{
    build_glued, build_unglued, cell_exists, resolve_step, CarpetGraph, CellAddr, Dir, GraphKind, Symmetry,
};
