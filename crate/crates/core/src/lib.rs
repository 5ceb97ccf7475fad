//! Numerical laboratory for boundary singularities of `−Δu + g(|∇u|) = 0`.

pub mod error;
pub mod geometry;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod measure;
pub mod ode;
pub mod profile;
pub mod singularity;
pub mod solver;
pub mod stencil;
pub mod trace;
pub mod weak_lp;

pub use error::{LabError, Result};
