//! Simulation and analysis of continuous-wave ODMR in ensembles of spin-3/2
//! silicon-vacancy (V2) defects under resonant and off-resonant excitation.
//!
//! The crate is organised bottom-up:
//!
//! * [`spin`]: ground-state Hamiltonian, eigenlevels and RF transition table.
//! * [`dynamics`]: nine-level rate equations for a single defect.
//! * [`ensemble`]: integration over the inhomogeneous optical line and the
//!   laser spectrum, giving spectra and contrast sweeps.
//! * [`sensing`]: slope extraction, lock-in synthesis, Welch spectra and
//!   magnetometric sensitivity.
//! * [`scenario`]: the validated experiment description everything runs from.

pub mod constants;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod scenario;
pub mod sensing;
pub mod spin;

pub use error::{Result, SimError};
