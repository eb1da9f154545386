//! Numerical toolkit for a two-dimensional free-boundary model of
//! contraction-driven cell motility.
//!
//! The model couples a Darcy/Hele-Shaw description of the actomyosin gel
//! with a Keller-Segel advection-diffusion equation for the myosin motor
//! density on a moving domain.  The toolkit covers, at desk scale:
//!
//! * construction of radially symmetric steady states and their
//!   classification (stable / critical / unstable),
//! * discretized spectra of the linearized operator, mode by mode,
//! * the bifurcation function `F(R)`, its root (the bifurcation radius),
//!   and asymptotic traveling-wave solutions to second order in the
//!   velocity,
//! * the linearized operator around a traveling wave and its kernel
//!   structure,
//! * nonlinear time stepping of the full free-boundary problem on a
//!   boundary-fitted reference disk.
//!
//! The crate is organized so that each physics layer builds on the one
//! below: `specfun` (Bessel machinery) -> `geometry` (shapes, transform)
//! -> `elliptic` (potential solvers) -> `stability` / `bifurcation` /
//! `twlin` (spectra and waves) -> `simulator` (time stepping).

pub mod bifurcation;
pub mod cli;
pub mod elliptic;
pub mod stability;
pub mod twlin;
pub mod verify;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod config;
pub mod presets;
pub mod report;
pub mod simulator;
pub mod specfun;

mod error;

pub use error::{Error, Result};
