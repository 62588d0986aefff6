//! Normalized solutions of `-Lap u = lambda u + mu |u|^{q-2} u + |u|^{p-2} u`
//! with prescribed mass `|u|_2^2 = a` in `R^N`.
//!
//! The crate is organized bottom-up:
//!
//! * [`radial`]: radial grids, norms, dilations and the discrete calculus.
//! * [`functionals`]: energy, fiber map and Pohozaev classification on norm
//!   profiles.
//! * [`fibering`]: critical points of the fiber map and the threshold
//!   `mu_p(u)`.
//! * [`constants`]: sharp Sobolev and Gagliardo-Nirenberg constants.
//! * [`extremal`]: the extremal coupling `mu*_{a,p}`.
//! * [`solvers`]: ground states, mountain-pass solutions and the dual branch.
//! * [`verify`]: the inequality and identity checklist.

pub mod constants;
mod descent;
pub mod error;
pub mod extremal;
pub mod fibering;
pub mod functionals;
pub mod radial;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
