//! Phase-modulated single-qubit gate synthesis for atom arrays.
//!
//! The crate builds phase-modulated drive programs, propagates them under
//! rotating-frame and lab-frame two-level models, and evaluates gate
//! fidelity and crosstalk over Gaussian-beam array geometries. A four-level
//! light-shift model and a multi-tone parallel planner cover the two
//! parallel-control schemes.
//!
//! All frequencies are angular, in rad/μs; times are in μs; lengths in μm.

pub mod array;
pub mod dynamics;
pub mod error;
pub mod lightshift;
pub mod parallel;
pub mod qcore;
pub mod sequence;
pub mod table;

pub use error::{Error, Result};
pub use qcore::{GateTarget, PauliCoefficients, PauliVector, Unitary2};
pub use sequence::{DriveSegment, GateLabel, GateProgram, ModulationTone};
