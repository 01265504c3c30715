//! Spectral solver and diagnostics for a scaled Navier–Stokes–Korteweg
//! relaxation system on the periodic line, its large-friction gradient-flow
//! limit, and the relative-entropy machinery that compares the two.

pub mod constitutive;
pub mod darcy;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod io;

pub use constitutive::{BumpSpec, LameMode, Params, S2Scaling, StudyRange};
pub use error::{NskError, Result};
pub use grid::{Field, Grid};
