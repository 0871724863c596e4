use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::config::PhyConfig;
use super::scrambler::pilot_polarity;
use crate::error::{Error, Result};

/// One OFDM symbol in the frequency domain, indexed by FFT bin.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid {
    pub bins: Vec<Complex64>,
}

impl FreqGrid {
    pub fn zeros(fft_size: usize) -> Self {
        FreqGrid {
            bins: vec![Complex64::new(0.0, 0.0); fft_size],
        }
    }
}

/// Subcarrier mapping plus unitary (I)FFT with cyclic prefix.
///
/// Both transform directions are scaled by `1/sqrt(fft_size)`, so sample
/// energy equals bin energy.
#[derive(Clone)]
pub struct Ofdm {
    fft_size: usize,
    cp_len: usize,
    data_bins: Vec<usize>,
    pilot_bins: Vec<usize>,
    pilot_values: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Ofdm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ofdm")
            .field("fft_size", &self.fft_size)
            .field("cp_len", &self.cp_len)
            .finish()
    }
}

impl Ofdm {
    pub fn new(cfg: &PhyConfig) -> Self {
        let mut planner = FftPlanner::new();
        Ofdm {
            fft_size: cfg.fft_size,
            cp_len: cfg.cp_len,
            data_bins: cfg.subcarriers.data.iter().map(|&k| cfg.bin_of(k)).collect(),
            pilot_bins: cfg.subcarriers.pilots.iter().map(|&k| cfg.bin_of(k)).collect(),
            pilot_values: cfg.subcarriers.pilot_values.clone(),
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
            scale: 1.0 / (cfg.fft_size as f64).sqrt(),
        }
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.fft_size + self.cp_len
    }

    /// In-place unitary inverse FFT of one `fft_size` block.
    pub fn ifft(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.fft_size);
        self.inverse.process(buf);
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }

    /// In-place unitary forward FFT of one `fft_size` block.
    pub fn fft(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.fft_size);
        self.forward.process(buf);
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }

    /// FFT bin of each data subcarrier, in data order.
    pub fn data_bins(&self) -> &[usize] {
        &self.data_bins
    }

    pub fn pilot_bins(&self) -> &[usize] {
        &self.pilot_bins
    }

    /// Places data points and the polarity-signed pilots for `symbol_index`.
    pub fn assemble_grid(&self, data: &[Complex64], symbol_index: usize) -> Result<FreqGrid> {
        if data.len() != self.data_bins.len() {
            return Err(Error::framing(format!(
                "expected {} data points, got {}",
                self.data_bins.len(),
                data.len()
            )));
        }
        let mut grid = FreqGrid::zeros(self.fft_size);
        for (&bin, &d) in self.data_bins.iter().zip(data) {
            grid.bins[bin] = d;
        }
        let p = pilot_polarity(symbol_index);
        for (&bin, &v) in self.pilot_bins.iter().zip(&self.pilot_values) {
            grid.bins[bin] = Complex64::new(p * v, 0.0);
        }
        Ok(grid)
    }

    pub fn extract_data(&self, grid: &FreqGrid) -> Vec<Complex64> {
        self.data_bins.iter().map(|&b| grid.bins[b]).collect()
    }

    /// Unitary IFFT followed by cyclic-prefix insertion, appended to `out`.
    pub fn modulate_into(&self, grid: &FreqGrid, out: &mut Vec<Complex64>) -> Result<()> {
        if grid.bins.len() != self.fft_size {
            return Err(Error::framing(format!(
                "grid has {} bins, expected {}",
                grid.bins.len(),
                self.fft_size
            )));
        }
        let mut buf = grid.bins.clone();
        self.ifft(&mut buf);
        out.extend_from_slice(&buf[self.fft_size - self.cp_len..]);
        out.extend_from_slice(&buf);
        Ok(())
    }

    pub fn modulate(&self, grid: &FreqGrid) -> Result<Vec<Complex64>> {
        let mut out = Vec::with_capacity(self.samples_per_symbol());
        self.modulate_into(grid, &mut out)?;
        Ok(out)
    }

    /// Drops the cyclic prefix and applies the unitary FFT.
    pub fn demodulate(&self, segment: &[Complex64]) -> Result<FreqGrid> {
        if segment.len() != self.samples_per_symbol() {
            return Err(Error::framing(format!(
                "OFDM segment has {} samples, expected {}",
                segment.len(),
                self.samples_per_symbol()
            )));
        }
        let mut buf = segment[self.cp_len..].to_vec();
        self.fft(&mut buf);
        Ok(FreqGrid { bins: buf })
    }
}
