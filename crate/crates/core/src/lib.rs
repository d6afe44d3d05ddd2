//! Simulation toolkit for over-the-air (OTA) computation on multiple-access
//! channels.
//!
//! The crate is organised by subsystem:
//!
//! - [`sources`]: correlated binary pairs and the Gaussian CEO sensing model.
//! - [`separation`]: Slepian–Wolf region vs. adder-MAC sum capacity, and the
//!   zero-error uncoded scheme that beats any separated design.
//! - [`nomographic`]: functions of the form `g(Σ h_n(s_n))` evaluated either
//!   centrally or through the channel.
//! - [`channels`]: coherent MAC with impairments, the noiseless adder MAC and
//!   the orthogonal parallel-access baseline.
//! - [`estimation`]: analog amplify-and-superpose vs. quantize-and-forward
//!   distributed estimation.
//! - [`detection`]: local tests, PSK voting and majority fusion.
//! - [`constellation`]: Walker-shell geometry, LoS statistics and the
//!   satellite OTA impairment study.
//! - [`experiments`]: scenario configs, validation and CSV tables.
//!
//! All Monte Carlo routines draw from [`mc::SeedStream`] substreams keyed by
//! trial index, so results do not depend on thread count.

// Parameter guards use `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod constellation;
pub mod detection;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod mc;
pub mod nomographic;
pub mod separation;
pub mod sources;

pub use error::{Error, Result};
pub use mc::{SeedStream, TrialRng};
pub use num_complex::Complex64;
