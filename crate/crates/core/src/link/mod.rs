//! Software-defined sender and receiver modules around the unmodified PHY,
//! the AWGN channel, and the baseline links.
//!
//! Target symbols live in a unit-power domain. The sender scales them onto
//! the constellation box, quantizes, and inverts the coded transmitter over
//! GF(2) to find input bits whose transmission reproduces the quantized
//! points on the chosen subcarriers. The receiver reads those subcarriers
//! back (soft) or re-encodes decoded bits (hard).

mod channel;
mod emulator;
mod record;
mod serial;
mod targets;
mod waveform;

pub use channel::{add_complex_noise, awgn, awgn_with, ideal_analog_link, noise_variance};
pub use emulator::{EmulationPlan, Emulator, RxHeader, SoftRecovery};
pub use record::{
    emulated_link, read_batch, write_batch, LinkOutput, LinkRecord, RecoveryMode,
    WaveformCompensator,
};
pub use serial::{float_serialization_link, FloatLinkOutput, DEFAULT_SATURATION_BOUND};
pub use targets::{default_scale, TargetSymbols};
pub use waveform::{Guard, WaveformMap};
