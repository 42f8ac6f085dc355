//! Numerics for attractive-repulsive interaction energies: kernel families,
//! exact Cantor steady states, Fourier concavity witnesses, particle gradient
//! flow and fractal diagnostics of computed states.

pub mod cantor;
pub mod energy;
pub mod error;
pub mod fourier;
pub mod flow;
pub mod fractal;
mod lattice;
pub mod measure;
pub mod potential;
pub mod quad;
pub mod report;

pub use error::{Error, Result};
pub use measure::{CantorIterate, GridMeasure, Measure, ParticleEnsemble};
pub use potential::{Kernel, PotentialSpec, RadialKernel};
pub use report::DiagnosticsReport;
