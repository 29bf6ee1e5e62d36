//! Single-sensor fault and cyber-attack diagnosis for four-inverter
//! microgrids.
//!
//! The pipeline, bottom up:
//!
//! * [`fracdiff`]: Caputo (L1) and Grünwald–Letnikov derivatives;
//! * [`sigsim`]: synthetic (V, P, Q) windows for 1 normal and 24 fault classes;
//! * [`attacks`]: bias, noise, replacement and replay injectors;
//! * [`features`]: dual fractional feature vectors and normalisation;
//! * [`model`]: dense classifiers and the gated two-stage model;
//! * [`pmrat`]: progressive memory-replay adversarial training;
//! * [`harness`]: evaluation reports, file formats, ablations and sweeps.
//!
//! Runnable walkthroughs of each capability live in the crate's `examples/`
//! directory.

pub mod attacks;
pub mod config;
pub mod error;
pub mod features;
pub mod fracdiff;
pub mod harness;
pub mod label;
pub mod model;
pub mod pmrat;
pub mod sigsim;

pub use error::{Error, Result};
pub use label::ClassLabel;
