use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::targets::TargetSymbols;
use super::waveform::{Guard, WaveformMap};
use crate::error::{Error, Result};
use crate::gf2::{
    certify_subset, default_subset, max_usable_subcarriers, restrict_rows, Factorization,
    Gf2Vector, SubsetCertificate, SymbolSystem,
};
use crate::phy::{scrambler_sequence, BasebandFrame, ConvState, Constellation, Phy, PhyConfig};

/// Everything the sender decided for one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct EmulationPlan {
    pub chosen: Vec<i32>,
    pub dummies: Vec<i32>,
    pub scale: f64,
    /// Number of target symbols carried (the rest of the last OFDM symbol is padding).
    pub symbol_count: usize,
    /// Quantized points on the chosen subcarriers, per OFDM symbol.
    pub points: Vec<Vec<Complex64>>,
    /// Label bits of `points` in (subcarrier, bit) order, per OFDM symbol.
    pub labels: Vec<Vec<u8>>,
    /// Scrambled encoder input solved for each OFDM symbol.
    pub solved: Vec<Vec<u8>>,
    /// Transmitter input bits.
    pub bits: Vec<u8>,
    /// Targets that fell outside the constellation box before quantization.
    pub clipped: usize,
}

impl EmulationPlan {
    pub fn ofdm_symbol_count(&self) -> usize {
        self.points.len()
    }

    pub fn rx_header(&self) -> RxHeader {
        RxHeader {
            symbol_count: self.symbol_count,
            scale: self.scale,
        }
    }
}

/// What a receiver needs besides the frame: how many target symbols the
/// packet carries and the target scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RxHeader {
    pub symbol_count: usize,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftRecovery {
    pub estimates: Vec<Complex64>,
    /// Waveform rebuilt from the estimates with the cyclic prefix the PHY imposes
    /// and pilots/dummies removed.
    pub waveform: Vec<Complex64>,
}

/// Sender and receiver modules for one PHY configuration and a certified
/// subcarrier subset. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Emulator {
    cfg: PhyConfig,
    phy: Phy,
    sys: SymbolSystem,
    certificate: SubsetCertificate,
    chosen_positions: Vec<usize>,
    dummies: Vec<i32>,
    rows: Vec<usize>,
    factor: Factorization,
    map: WaveformMap,
    max_ofdm_symbols: usize,
    clip_soft: bool,
}

impl Emulator {
    /// Uses the certified version of the default (closest to DC) subset.
    pub fn new(cfg: &PhyConfig) -> Result<Self> {
        Self::with_subset(cfg, &default_subset(cfg))
    }

    pub fn with_subset(cfg: &PhyConfig, candidate: &[i32]) -> Result<Self> {
        let limit = max_usable_subcarriers(cfg);
        if candidate.len() > limit {
            return Err(Error::Selection(format!(
                "{} subcarriers requested, at most {limit} are solvable at rate {}",
                candidate.len(),
                cfg.code_rate
            )));
        }
        let phy = Phy::new(cfg)?;
        let sys = SymbolSystem::build(cfg)?;
        let certificate = certify_subset(&sys, candidate)?;
        let chosen = &certificate.chosen;
        let chosen_positions = chosen.iter().map(|&k| sys.data_position(k).unwrap()).collect();
        let dummies = cfg
            .subcarriers
            .data
            .iter()
            .copied()
            .filter(|k| !chosen.contains(k))
            .collect();
        let rows = sys.rows_for(chosen)?;
        let factor = Factorization::new(&restrict_rows(&sys, chosen)?);
        let map = WaveformMap::new(cfg, chosen)?;
        Ok(Emulator {
            cfg: cfg.clone(),
            phy,
            max_ofdm_symbols: cfg.max_packet_ofdm_symbols(),
            sys,
            chosen_positions,
            dummies,
            rows,
            factor,
            map,
            certificate,
            clip_soft: true,
        })
    }

    /// Whether soft estimates are clipped to the constellation box (default on).
    pub fn with_soft_clipping(mut self, on: bool) -> Self {
        self.clip_soft = on;
        self
    }

    pub fn with_max_ofdm_symbols(mut self, n: usize) -> Self {
        self.max_ofdm_symbols = n.max(1);
        self
    }

    pub fn config(&self) -> &PhyConfig {
        &self.cfg
    }

    pub fn phy(&self) -> &Phy {
        &self.phy
    }

    pub fn system(&self) -> &SymbolSystem {
        &self.sys
    }

    pub fn certificate(&self) -> &SubsetCertificate {
        &self.certificate
    }

    pub fn chosen(&self) -> &[i32] {
        &self.certificate.chosen
    }

    pub fn dummies(&self) -> &[i32] {
        &self.dummies
    }

    pub fn n_prime(&self) -> usize {
        self.chosen_positions.len()
    }

    pub fn waveform_map(&self) -> &WaveformMap {
        &self.map
    }

    pub fn constellation(&self) -> &Constellation {
        self.phy.constellation()
    }

    /// Largest number of target symbols one packet can carry.
    pub fn packet_capacity(&self) -> usize {
        self.max_ofdm_symbols * self.n_prime()
    }

    /// Sender-side inversion for one packet.
    pub fn sender_invert(&self, targets: &TargetSymbols) -> Result<EmulationPlan> {
        let n_prime = self.n_prime();
        let k = targets.len();
        let n_sym = k.div_ceil(n_prime);
        if n_sym > self.max_ofdm_symbols {
            return Err(Error::Capacity {
                needed: k,
                needed_ofdm: n_sym,
                capacity: self.max_ofdm_symbols,
            });
        }
        let beta = self.sys.beta();
        let n_bpsc = self.cfg.n_bpsc();
        let constellation = self.phy.constellation();
        let scrambler = scrambler_sequence(self.cfg.scrambler_seed, n_sym * beta)?;

        let mut plan = EmulationPlan {
            chosen: self.chosen().to_vec(),
            dummies: self.dummies.clone(),
            scale: targets.scale,
            symbol_count: k,
            points: Vec::with_capacity(n_sym),
            labels: Vec::with_capacity(n_sym),
            solved: Vec::with_capacity(n_sym),
            bits: Vec::with_capacity(n_sym * beta),
            clipped: 0,
        };
        let mut state = ConvState::ZERO;
        for n in 0..n_sym {
            let mut labels = vec![0u8; n_prime * n_bpsc];
            let mut points = Vec::with_capacity(n_prime);
            for j in 0..n_prime {
                let z = targets
                    .symbols
                    .get(n * n_prime + j)
                    .map_or(Complex64::new(0.0, 0.0), |s| s * targets.scale);
                if constellation.clip_to_box(z) != z {
                    plan.clipped += 1;
                }
                points.push(constellation.quantize_into(z, &mut labels[j * n_bpsc..(j + 1) * n_bpsc]));
            }
            let mut y = Gf2Vector::from_bits(&labels);
            y.xor_assign(&self.sys.state_offset(state).select(&self.rows));
            let x = self.factor.solve(&y)?.to_bits();
            state = state.after(&x);
            plan.bits.extend(x.iter().zip(&scrambler[n * beta..]).map(|(a, b)| a ^ b));
            plan.points.push(points);
            plan.labels.push(labels);
            plan.solved.push(x);
        }
        self.check_replay(&plan)?;
        Ok(plan)
    }

    /// Splits a long target sequence into packets of at most
    /// [`Emulator::packet_capacity`] symbols and inverts each.
    pub fn plan_packets(&self, targets: &TargetSymbols) -> Result<Vec<EmulationPlan>> {
        targets
            .symbols
            .chunks(self.packet_capacity())
            .map(|chunk| self.sender_invert(&TargetSymbols::new(chunk.to_vec(), targets.scale)?))
            .collect()
    }

    /// Re-runs the transmitter on `plan.bits` and checks the chosen
    /// subcarriers carry exactly the planned points.
    pub fn check_replay(&self, plan: &EmulationPlan) -> Result<()> {
        let replay = self.phy.data_points(&plan.bits)?;
        if replay.len() != plan.points.len() {
            return Err(Error::Replay(format!(
                "{} OFDM symbols replayed, {} planned",
                replay.len(),
                plan.points.len()
            )));
        }
        for (n, (got, want)) in replay.iter().zip(&plan.points).enumerate() {
            for (j, &pos) in self.chosen_positions.iter().enumerate() {
                if got[pos] != want[j] {
                    return Err(Error::Replay(format!(
                        "OFDM symbol {n}, subcarrier {}: sent {} but planned {}",
                        self.chosen()[j],
                        got[pos],
                        want[j]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn transmit(&self, plan: &EmulationPlan) -> Result<BasebandFrame> {
        self.phy.tx(&plan.bits)
    }

    fn check_frame(&self, frame: &BasebandFrame, rx: &RxHeader) -> Result<()> {
        let needed = rx.symbol_count.div_ceil(self.map.n_prime());
        if frame.samples_per_ofdm != self.cfg.samples_per_ofdm() || frame.ofdm_symbol_count() != needed {
            return Err(Error::Shape(format!(
                "received {} samples, expected {} OFDM symbols of {}",
                frame.samples.len(),
                needed,
                self.cfg.samples_per_ofdm()
            )));
        }
        Ok(())
    }

    fn read_chosen(&self, points: &[Vec<Complex64>], rx: &RxHeader, clip: bool) -> Vec<Complex64> {
        let c = self.phy.constellation();
        let mut out: Vec<Complex64> = points
            .iter()
            .flat_map(|sym| self.chosen_positions.iter().map(move |&p| sym[p]))
            .map(|z| if clip { c.clip_to_box(z) } else { z } / rx.scale)
            .collect();
        out.truncate(rx.symbol_count);
        out
    }

    /// Soft receiver: demodulate, equalize, read the chosen subcarriers,
    /// unscale. Dummy subcarriers are ignored.
    pub fn recover_soft(&self, frame: &BasebandFrame, plan: &EmulationPlan) -> Result<SoftRecovery> {
        let estimates = self.receive_soft(frame, &plan.rx_header())?;
        let waveform = self.map.synthesize(&estimates, Guard::Cyclic);
        Ok(SoftRecovery {
            estimates,
            waveform,
        })
    }

    /// Hard receiver: decode to bits, re-run the transmitter mapping and read
    /// the chosen subcarriers. Returns the estimates and the decoded bits.
    pub fn recover_hard(&self, frame: &BasebandFrame, plan: &EmulationPlan) -> Result<(Vec<Complex64>, Vec<u8>)> {
        self.receive_hard(frame, &plan.rx_header())
    }

    /// Soft estimates from a frame, knowing only what the receiver is told.
    pub fn receive_soft(&self, frame: &BasebandFrame, rx: &RxHeader) -> Result<Vec<Complex64>> {
        self.check_frame(frame, rx)?;
        Ok(self.read_chosen(&self.phy.rx_points(frame)?, rx, self.clip_soft))
    }

    pub fn receive_hard(&self, frame: &BasebandFrame, rx: &RxHeader) -> Result<(Vec<Complex64>, Vec<u8>)> {
        self.check_frame(frame, rx)?;
        let bits = self.phy.rx(frame)?;
        let estimates = self.read_chosen(&self.phy.data_points(&bits)?, rx, false);
        Ok((estimates, bits))
    }
}
