use std::fmt;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::channel::awgn_with;
use super::emulator::Emulator;
use super::targets::TargetSymbols;
use super::waveform::Guard;
use crate::error::{Error, Result};
use crate::phy::{read_frame, write_frame, BasebandFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryMode {
    Soft,
    Hard,
}

impl fmt::Display for RecoveryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecoveryMode::Soft => "soft",
            RecoveryMode::Hard => "hard",
        })
    }
}

impl FromStr for RecoveryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(RecoveryMode::Soft),
            "hard" => Ok(RecoveryMode::Hard),
            other => Err(Error::config(format!("unknown recovery mode {other:?}"))),
        }
    }
}

/// A learned correction applied to the receiver's reconstructed waveform.
pub trait WaveformCompensator {
    /// `mask` is 0 on cyclic-prefix samples and 1 elsewhere.
    fn compensate(&self, waveform: &[Complex64], mask: &[f64]) -> Result<Vec<Complex64>>;
}

/// One transmission through the real link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRecord {
    pub targets: Vec<Complex64>,
    pub scale: f64,
    /// Transmitted samples of all packets, back to back.
    pub tx: BasebandFrame,
    pub estimates: Vec<Complex64>,
    /// Receiver-side waveform before any compensation.
    pub reconstructed: Vec<Complex64>,
    pub snr_db: f64,
    pub seed: u64,
    pub fingerprint: String,
    pub mode: RecoveryMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutput {
    /// Final estimates (after compensation, when a compensator was given).
    pub estimates: Vec<Complex64>,
    pub record: LinkRecord,
    /// Decoded-bit errors against the transmitted bits (hard mode only).
    pub bit_errors: Option<usize>,
    pub bits_sent: usize,
    pub clipped: usize,
}

/// sender_invert → transmit → AWGN → receiver → optional compensation.
/// Targets longer than one packet are split; noise for all packets comes
/// from one generator seeded with `seed`.
pub fn emulated_link(
    em: &Emulator,
    targets: &TargetSymbols,
    snr_db: f64,
    seed: u64,
    mode: RecoveryMode,
    compensator: Option<&dyn WaveformCompensator>,
) -> Result<LinkOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sps = em.config().samples_per_ofdm();
    let mut tx = Vec::new();
    let mut estimates = Vec::with_capacity(targets.len());
    let mut bit_errors = 0;
    let mut bits_sent = 0;
    let mut clipped = 0;
    for plan in em.plan_packets(targets)? {
        let frame = em.transmit(&plan)?;
        let rx = awgn_with(&frame, snr_db, &mut rng);
        match mode {
            RecoveryMode::Soft => estimates.extend(em.recover_soft(&rx, &plan)?.estimates),
            RecoveryMode::Hard => {
                let (est, bits) = em.recover_hard(&rx, &plan)?;
                bit_errors += bits.iter().zip(&plan.bits).filter(|(a, b)| a != b).count();
                estimates.extend(est);
            }
        }
        bits_sent += plan.bits.len();
        clipped += plan.clipped;
        tx.extend(frame.samples);
    }
    let map = em.waveform_map();
    let reconstructed = map.synthesize(&estimates, Guard::Cyclic);
    let final_estimates = match compensator {
        Some(c) => {
            let out = c.compensate(&reconstructed, &map.guard_mask(estimates.len()))?;
            map.analyze(&out, estimates.len())?
        }
        None => estimates.clone(),
    };
    Ok(LinkOutput {
        estimates: final_estimates,
        record: LinkRecord {
            targets: targets.symbols.clone(),
            scale: targets.scale,
            tx: BasebandFrame::new(tx, sps)?,
            estimates,
            reconstructed,
            snr_db,
            seed,
            fingerprint: em.config().fingerprint(),
            mode,
        },
        bit_errors: (mode == RecoveryMode::Hard).then_some(bit_errors),
        bits_sent,
        clipped,
    })
}

const MANIFEST: &str = "manifest.txt";
const MANIFEST_HEADER: &str = "# index snr_db seed fingerprint mode scale samples_per_ofdm";

fn write_seq(path: &Path, samples: &[Complex64]) -> Result<()> {
    write_frame(BufWriter::new(fs::File::create(path)?), samples)
}

fn read_seq(path: &Path) -> Result<Vec<Complex64>> {
    read_frame(BufReader::new(fs::File::open(path)?))
}

fn stem(dir: &Path, index: usize, part: &str) -> std::path::PathBuf {
    dir.join(format!("record{index:05}.{part}.bbf"))
}

/// Writes each record as four sample files plus one manifest line.
pub fn write_batch(dir: &Path, records: &[LinkRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::from(MANIFEST_HEADER);
    manifest.push('\n');
    for (i, r) in records.iter().enumerate() {
        write_seq(&stem(dir, i, "targets"), &r.targets)?;
        write_seq(&stem(dir, i, "tx"), &r.tx.samples)?;
        write_seq(&stem(dir, i, "estimates"), &r.estimates)?;
        write_seq(&stem(dir, i, "reconstructed"), &r.reconstructed)?;
        manifest.push_str(&format!(
            "{i} {} {} {} {} {} {}\n",
            r.snr_db, r.seed, r.fingerprint, r.mode, r.scale, r.tx.samples_per_ofdm
        ));
    }
    fs::write(dir.join(MANIFEST), manifest)?;
    Ok(())
}

pub fn read_batch(dir: &Path) -> Result<Vec<LinkRecord>> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let bad = |line: &str| Error::Format(format!("bad manifest line {line:?}"));
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 7 {
            return Err(bad(line));
        }
        let index: usize = f[0].parse().map_err(|_| bad(line))?;
        let sps: usize = f[6].parse().map_err(|_| bad(line))?;
        out.push(LinkRecord {
            targets: read_seq(&stem(dir, index, "targets"))?,
            tx: BasebandFrame::new(read_seq(&stem(dir, index, "tx"))?, sps)?,
            estimates: read_seq(&stem(dir, index, "estimates"))?,
            reconstructed: read_seq(&stem(dir, index, "reconstructed"))?,
            snr_db: f[1].parse().map_err(|_| bad(line))?,
            seed: f[2].parse().map_err(|_| bad(line))?,
            fingerprint: f[3].to_string(),
            mode: f[4].parse()?,
            scale: f[5].parse().map_err(|_| bad(line))?,
        });
    }
    Ok(out)
}
