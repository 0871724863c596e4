use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::link::{emulated_link, Emulator, Guard, LinkRecord, RecoveryMode, TargetSymbols, WaveformMap};
use crate::nn::{complex_to_reals, Tensor};

/// Unit-power circular complex Gaussian symbols.
pub fn gaussian_symbols<R: Rng>(n: usize, rng: &mut R) -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(s * re, s * im)
        })
        .collect()
}

/// Soft-mode transmission through the real link, no compensation.
pub fn transmit_record(em: &Emulator, symbols: Vec<Complex64>, snr_db: f64, seed: u64) -> Result<LinkRecord> {
    let targets = TargetSymbols::with_default_scale(symbols, em.config().modulation)?;
    Ok(emulated_link(em, &targets, snr_db, seed, RecoveryMode::Soft, None)?.record)
}

/// A compensator training pair: the receiver-side waveform and the
/// reference waveform of the targets, both `[n, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompSample {
    pub input: Tensor,
    pub reference: Tensor,
    pub mask: Vec<f64>,
}

impl CompSample {
    pub fn from_record(record: &LinkRecord, map: &WaveformMap) -> Result<Self> {
        let k = record.targets.len();
        let reference = map.synthesize(&record.targets, Guard::Silent);
        let n = reference.len();
        Ok(CompSample {
            input: Tensor::new(&[n, 2], complex_to_reals(&record.reconstructed))?,
            reference: Tensor::new(&[n, 2], complex_to_reals(&reference))?,
            mask: map.guard_mask(k),
        })
    }

    pub fn samples(&self) -> usize {
        self.mask.len()
    }
}
