//! MUSIC-based joint communication and sensing over OFDM.
//!
//! Array and ramp steering vectors, scenario and channel synthesis, subspace
//! estimators with Newton refinement, an FFT periodogram baseline,
//! sensing-aided CSI enhancement, perturbation theory and Cramér-Rao bounds,
//! and a Monte-Carlo harness.

pub mod array;
pub mod channel;
pub mod config;
pub mod csi;
pub mod emit;
pub mod error;
pub mod fft_baseline;
pub mod linalg;
pub mod music;
pub mod newton;
pub mod par;
pub mod pipeline;
pub mod qam;
pub mod rng;
pub mod scenario;
pub mod spectrum;
pub mod sweep;
pub mod table;
pub mod theory;

pub use error::{Error, Result};
