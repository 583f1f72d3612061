//! Pseudospectral laboratory for the non-abelian Chern-Simons-Higgs system in
//! Lorenz gauge on a periodic two-dimensional torus.

pub mod error;
pub mod evolution;
pub mod knapp;
pub mod lie_kernel;
pub mod null_forms;
pub mod parallel;
pub mod snapshot;
pub mod spectral_grid;
pub mod stats;
pub mod xsb_analyzer;

pub use error::{CshError, Result};
pub use lie_kernel::{build_su_n_basis, GeneratorSet, LieElement, PhysicsParams};
pub use spectral_grid::{Grid2D, LieFieldGrid, Representation, ScalarField};
