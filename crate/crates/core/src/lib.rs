//! Waveform-level FBMC/OQAM link simulator with affine precoding.
//!
//! The transmit chain maps bits to QPSK, staggers them onto a real OQAM
//! grid, applies the affine precoder `Z = σ_s·X·P + σ_c·C` and synthesizes
//! the FBMC waveform with a PHYDYAS prototype filter. The receiver runs the
//! analysis filter bank, estimates the channel by projecting onto the
//! training subspace and detects data by projecting onto the data subspace.
//! [`harness`] drives Monte Carlo sweeps over SNR, training power and
//! redundancy.

pub mod affine;
pub mod channel;
pub mod config;
pub mod error;
pub mod filter;
pub mod harness;
pub mod modem;
pub mod oqam;
pub mod output;
pub mod receiver;

pub use error::{Error, Result};
