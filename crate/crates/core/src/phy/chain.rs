use num_complex::Complex64;

use super::config::PhyConfig;
use super::convolutional::{ConvEncoder, ConvState};
use super::frame::BasebandFrame;
use super::interleaver::Interleaver;
use super::ofdm::Ofdm;
use super::puncture::{depuncture, puncture};
use super::qam::Constellation;
use super::scrambler::scramble;
use super::viterbi::Viterbi;
use super::{BitBlock, BitRole};
use crate::error::{Error, Result};

/// A configured transmitter/receiver pair with precomputed tables.
///
/// Packets cover the data field only: the scrambler restarts from the seed
/// and the encoder from state 0 at packet start, and both run continuously
/// across OFDM symbols.
#[derive(Debug, Clone)]
pub struct Phy {
    cfg: PhyConfig,
    encoder: ConvEncoder,
    viterbi: Viterbi,
    interleaver: Interleaver,
    constellation: Constellation,
    ofdm: Ofdm,
    channel: Complex64,
}

impl Phy {
    pub fn new(cfg: &PhyConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Phy {
            encoder: ConvEncoder::new(cfg.generators),
            viterbi: Viterbi::new(cfg.generators),
            interleaver: Interleaver::new(cfg.n_cbps(), cfg.n_bpsc())?,
            constellation: Constellation::new(cfg.modulation),
            ofdm: Ofdm::new(cfg),
            channel: Complex64::new(1.0, 0.0),
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &PhyConfig {
        &self.cfg
    }

    pub fn ofdm(&self) -> &Ofdm {
        &self.ofdm
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn interleaver(&self) -> &Interleaver {
        &self.interleaver
    }

    /// Number of OFDM symbols a packet of `n_bits` information bits occupies.
    pub fn ofdm_symbols_for(&self, n_bits: usize) -> Result<usize> {
        let per = self.cfg.n_dbps();
        if n_bits % per != 0 {
            return Err(Error::framing(format!(
                "{n_bits} bits is not a whole number of OFDM symbols ({per} bits each)"
            )));
        }
        Ok(n_bits / per)
    }

    /// T1..T3: interleaved coded bits of every OFDM symbol.
    pub fn coded_blocks(&self, bits: &[u8]) -> Result<Vec<Vec<u8>>> {
        self.ofdm_symbols_for(bits.len())?;
        let scrambled = scramble(bits, self.cfg.scrambler_seed)?;
        let (mother, _) = self.encoder.encode(&scrambled, ConvState::ZERO);
        let punctured = puncture(&mother, self.cfg.code_rate)?;
        punctured
            .chunks(self.cfg.n_cbps())
            .map(|c| self.interleaver.interleave(c))
            .collect()
    }

    /// T1..T4: data-subcarrier points of every OFDM symbol.
    pub fn data_points(&self, bits: &[u8]) -> Result<Vec<Vec<Complex64>>> {
        let n_bpsc = self.cfg.n_bpsc();
        Ok(self
            .coded_blocks(bits)?
            .iter()
            .map(|block| {
                block
                    .chunks(n_bpsc)
                    .map(|label| self.constellation.map(label))
                    .collect()
            })
            .collect())
    }

    /// T5..T6 for data points that are already mapped.
    pub fn frame_from_points(&self, points: &[Vec<Complex64>]) -> Result<BasebandFrame> {
        let mut samples = Vec::with_capacity(points.len() * self.cfg.samples_per_ofdm());
        for (n, data) in points.iter().enumerate() {
            let grid = self.ofdm.assemble_grid(data, n)?;
            self.ofdm.modulate_into(&grid, &mut samples)?;
        }
        BasebandFrame::new(samples, self.cfg.samples_per_ofdm())
    }

    /// Full transmitter T1..T6.
    pub fn tx(&self, bits: &[u8]) -> Result<BasebandFrame> {
        self.frame_from_points(&self.data_points(bits)?)
    }

    /// R1..R2: equalised data-subcarrier observations of every OFDM symbol.
    pub fn rx_points(&self, frame: &BasebandFrame) -> Result<Vec<Vec<Complex64>>> {
        self.check_frame(frame)?;
        (0..frame.ofdm_symbol_count())
            .map(|n| {
                let grid = self.ofdm.demodulate(frame.symbol(n))?;
                Ok(self
                    .ofdm
                    .extract_data(&grid)
                    .into_iter()
                    .map(|z| z / self.channel)
                    .collect())
            })
            .collect()
    }

    /// R3..R6 starting from equalised data points.
    pub fn decode_points(&self, points: &[Vec<Complex64>]) -> Result<Vec<u8>> {
        let mut deinterleaved = Vec::with_capacity(points.len() * self.cfg.n_cbps());
        let mut labels = Vec::with_capacity(self.cfg.n_cbps());
        for symbol in points {
            labels.clear();
            for &z in symbol {
                labels.extend(self.constellation.hard_demap(z));
            }
            deinterleaved.extend(self.interleaver.deinterleave(&labels)?);
        }
        let mother = depuncture(&deinterleaved, self.cfg.code_rate)?;
        let scrambled = self.viterbi.decode(&mother);
        scramble(&scrambled, self.cfg.scrambler_seed)
    }

    /// Full receiver R1..R6.
    pub fn rx(&self, frame: &BasebandFrame) -> Result<Vec<u8>> {
        self.decode_points(&self.rx_points(frame)?)
    }

    fn check_frame(&self, frame: &BasebandFrame) -> Result<()> {
        if frame.samples_per_ofdm != self.cfg.samples_per_ofdm() {
            return Err(Error::framing(format!(
                "frame uses {}-sample symbols, config expects {}",
                frame.samples_per_ofdm,
                self.cfg.samples_per_ofdm()
            )));
        }
        Ok(())
    }
}

pub fn tx_chain(bits: &BitBlock, cfg: &PhyConfig) -> Result<BasebandFrame> {
    Phy::new(cfg)?.tx(&bits.bits)
}

pub fn rx_chain(frame: &BasebandFrame, cfg: &PhyConfig) -> Result<BitBlock> {
    Ok(BitBlock::new(Phy::new(cfg)?.rx(frame)?, BitRole::Raw))
}
