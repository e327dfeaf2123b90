//! Numerical laboratory for invariance entropy of control-affine systems.
//!
//! The crate is layered bottom-up: [`system`] integrates state and variational
//! flows, [`sets`] abstracts the control flow into a transition graph and
//! extracts control and chain control sets, [`spectra`] evaluates cocycles and
//! Morse/Floquet spectra, [`entropy`] counts spanning sets, [`channel`]
//! simulates coder-controllers over a digital channel and [`robustness`]
//! sweeps parameters. [`pipeline`] chains the stages for one grid.

pub mod channel;
pub mod entropy;
pub mod error;
pub mod par;
pub mod pipeline;
pub mod robustness;
pub mod sets;
pub mod spectra;
pub mod system;

pub use error::{Error, Result};
pub use par::Execution;
