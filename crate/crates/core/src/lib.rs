//! Spectral objects of finite-dimensional linear random dynamical systems.
//!
//! The crate builds matrix cocycles over ergodic drivers (circle rotations,
//! Bernoulli shifts) and estimates three spectral objects at finite horizon:
//!
//! * finite-time Lyapunov exponents and QR Lyapunov spectra,
//! * per-Morse-set spectral intervals over the finest weak Morse
//!   decomposition of the projectivised system,
//! * the non-uniform dichotomy spectrum via a growth-rate scan with
//!   candidate invariant splittings.
//!
//! Everything is deterministic given a seed; batch runs are driven by the
//! `rds-spectra` binary (see the `config`, `runner` and `report` modules).

pub mod base;
pub mod cocycle;
pub mod config;
pub mod error;
pub mod extreal;
pub mod morse;
pub mod projective;
pub mod report;
pub mod rng;
pub mod runner;
pub mod scenarios;
pub mod spectra;
pub mod subspaces;

pub use error::{Result, SpectraError};
