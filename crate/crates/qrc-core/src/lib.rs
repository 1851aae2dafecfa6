//! Simulator and benchmark harness for quantum reservoir computing with
//! tunable-strength indirect measurements.
//!
//! The crate models an N-spin transverse-field Ising reservoir processing a
//! time series. Three protocols are implemented:
//!
//! - **RSP** (restarting protocol): the disturbance-free reference,
//!   quadratic in experimental time.
//! - **OLP** (online protocol): continuous processing with an indirect
//!   measurement of strength `g` after every input; back-action acts as a
//!   dephasing channel along the measured axis.
//! - **Feedback-driven protocol**: reset per input with classical memory
//!   re-injected through a parameterized unitary layer.
//!
//! On top of the protocols sit linear-readout benchmarks (forward prediction
//! and short-term memory), finite-shot noise and time accounting, and
//! deterministic `(g, h)` grid sweeps that report the performance ratio of
//! the OLP against the best restarting baseline.

pub mod benchmark;
pub mod error;
pub mod measurement;
pub mod protocols;
pub mod reservoir;
pub mod resource;
pub mod rng;
pub mod state;
pub mod sweep;

pub use error::{QrcError, Result};
