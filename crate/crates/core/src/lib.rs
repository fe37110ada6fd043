//! Simulation of spin-squeezed optical clock networks and EPR-entangled clock pairs.
//!
//! * [`spin`]: Gaussian collective-spin states, rotations, decoherence, squeezing metrics.
//! * [`optics`]: free-space and cavity QND probe physics.
//! * [`network`]: collective S/N of a clock chain read out through lossy channels.
//! * [`sequence`]: Monte Carlo of the squeezed Ramsey clock sequence.
//! * [`epr`]: dissipative two-clock EPR generation and the secret time-sharing protocol.
//! * [`scenario`]: scenario files, presets, and result export used by the CLI.

pub mod epr;
pub mod error;
pub mod network;
pub mod optics;
pub mod scenario;
pub mod sequence;
pub mod spin;
pub mod stats;

pub use error::{Error, Result};
pub use spin::{Axis, CollectiveSpin};
