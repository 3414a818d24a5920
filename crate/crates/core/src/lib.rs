//! Simulation, tuning and evaluation of a macro-micro manipulator force
//! control stack.
//!
//! The crate models a coarse positioning stage carrying a fast short-stroke
//! actuator that presses against a stiff environment. It provides:
//!
//! - LTI plumbing: transfer functions, state-space algebra, Tustin
//!   discretization, frequency responses and the H-infinity norm
//!   ([`lti`]);
//! - surrogate plant models for the stages, the elastic suspension and the
//!   contact spring ([`plant`]);
//! - three controller architectures (combined force/position, force on the
//!   fine stage with the coarse stage following, and force on the coarse
//!   stage alone) plus their closed loops ([`control`]);
//! - fixed-structure weighted-sensitivity gain tuning with a bandwidth
//!   crossover search ([`synth`]);
//! - sine-sweep system identification with rational-fit model extraction
//!   ([`sysid`]);
//! - a fixed-step contact-switching simulator ([`sim`]) and the study
//!   harness built on it ([`experiments`]).

pub mod config;
pub mod control;
pub mod error;
pub mod experiments;
pub mod lti;
pub mod plant;
pub mod report;
pub mod sim;
pub mod synth;
pub mod sysid;

pub use error::{Error, Result};
