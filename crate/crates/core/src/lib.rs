//! Koopman-operator analysis of dynamical systems from trajectory data.
//!
//! The crate is organised bottom-up:
//! * [`dynamics`] and [`observables`] generate trajectories and snapshot data;
//! * [`dmd`] and [`gla`] extract eigenvalues and modes;
//! * [`averaging`], [`quotient`] and [`indicators`] work with time averages
//!   and the empirical measures they define.

pub mod averaging;
pub mod dmd;
pub mod dynamics;
pub mod error;
pub mod gla;
pub mod indicators;
pub mod linalg;
pub mod observables;
pub mod quotient;
pub mod stats;

pub use error::{KoopmanError, Result};
