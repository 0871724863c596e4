//! Analog joint source-channel coding on top of an unmodified 802.11a-style
//! OFDM physical layer.
//!
//! The crate is organised bottom-up:
//!
//! - [`phy`]: the bit-exact digital transmitter and receiver chains.
//! - [`gf2`]: bit-packed GF(2) linear algebra and the per-symbol generator
//!   system of the punctured convolutional coder.
//! - [`link`]: transmitter inversion (which input bits make the PHY emit the
//!   constellation points we want), soft/hard recovery, AWGN and the
//!   baseline links.
//! - [`nn`]: a small reverse-mode differentiation core with the periodicity
//!   compensator, the link surrogate and a toy image codec.
//! - [`train`]: the staged training pipeline.
//! - [`harness`]: SNR sweeps, self-test and output files.

pub mod error;
pub mod gf2;
pub mod harness;
pub mod link;
pub mod nn;
pub mod phy;
pub mod train;

pub use error::{Error, Result};
pub use num_complex::Complex64;
