//! Numerical toolkit for Hamilton-Jacobi value functionals driven by
//! fractional-order dynamics: memory integrals and Caputo-type derivatives on
//! sampled paths, the metric space of time/path pairs, characteristic
//! differential inclusions, a tower of Lyapunov-Krasovskii functionals with
//! certified dissipation inequalities, and desk-scale upper/lower-solution
//! machinery with envelope brackets.

pub mod error;
pub mod gamma;
pub mod grid;
pub mod kernel;
pub mod path;

pub mod dynamics;
pub mod fixtures;
pub mod fraccalc;
pub mod lyapunov;
pub mod minimax;
pub mod pathspace;
pub mod seeded;

pub use error::{FhjError, Result};
pub use gamma::gamma_fn;
pub use grid::Grid;
pub use path::{AcPath, PathPoint, SampledPath};
