//! Browser bindings: run the emulated link on random symbols, sweep SNR for
//! the model-free systems, and run the self-test.

use std::fmt::Write as _;

use jscc_ofdm::harness::{selftest, sweep_rows, ExperimentSpec, SweepModels, SystemId};
use jscc_ofdm::link::{emulated_link, ideal_analog_link, Emulator, RecoveryMode, TargetSymbols};
use jscc_ofdm::phy::PhyConfig;
use jscc_ofdm::train::gaussian_symbols;
use jscc_ofdm::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

const MAX_SYMBOLS: usize = 20_000;

fn phy(modulation: &str, rate: &str) -> Result<PhyConfig, String> {
    let cfg = PhyConfig {
        modulation: modulation.parse().map_err(|e| format!("{e}"))?,
        code_rate: rate.parse().map_err(|e| format!("{e}"))?,
        ..PhyConfig::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn check_count(n: usize) -> Result<(), String> {
    if n == 0 || n > MAX_SYMBOLS {
        return Err(format!("symbol count must be between 1 and {MAX_SYMBOLS}"));
    }
    Ok(())
}

fn mse(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len() as f64
}

fn flatten(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Outcome of one transmission of random symbols.
#[wasm_bindgen]
pub struct LinkRun {
    symbol_mse: f64,
    ideal_mse: f64,
    evm_percent: f64,
    ber: f64,
    chosen: usize,
    samples: usize,
    targets: Vec<f64>,
    estimates: Vec<f64>,
}

#[wasm_bindgen]
impl LinkRun {
    /// Symbol MSE through the emulated OFDM link.
    #[wasm_bindgen(getter)]
    pub fn symbol_mse(&self) -> f64 {
        self.symbol_mse
    }

    /// Symbol MSE of the same symbols over a plain AWGN channel.
    #[wasm_bindgen(getter)]
    pub fn ideal_mse(&self) -> f64 {
        self.ideal_mse
    }

    #[wasm_bindgen(getter)]
    pub fn evm_percent(&self) -> f64 {
        self.evm_percent
    }

    /// Decoded bit error rate; NaN for soft recovery.
    #[wasm_bindgen(getter)]
    pub fn ber(&self) -> f64 {
        self.ber
    }

    /// Subcarriers per OFDM symbol that carry target symbols.
    #[wasm_bindgen(getter)]
    pub fn chosen(&self) -> usize {
        self.chosen
    }

    #[wasm_bindgen(getter)]
    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Interleaved re/im of the sent symbols.
    pub fn targets(&self) -> Vec<f64> {
        self.targets.clone()
    }

    /// Interleaved re/im of the received symbols.
    pub fn estimates(&self) -> Vec<f64> {
        self.estimates.clone()
    }
}

/// Sends `n` unit-power Gaussian symbols through the emulated link.
#[wasm_bindgen]
pub fn emulate(modulation: &str, rate: &str, n: usize, snr_db: f64, seed: u64, hard: bool) -> Result<LinkRun, String> {
    check_count(n)?;
    let cfg = phy(modulation, rate)?;
    let em = Emulator::new(&cfg).map_err(|e| e.to_string())?;
    let symbols = gaussian_symbols(n, &mut ChaCha8Rng::seed_from_u64(seed));
    let targets = TargetSymbols::with_default_scale(symbols, cfg.modulation).map_err(|e| e.to_string())?;
    let mode = if hard { RecoveryMode::Hard } else { RecoveryMode::Soft };
    let out = emulated_link(&em, &targets, snr_db, seed ^ 1, mode, None).map_err(|e| e.to_string())?;
    let s = &targets.symbols;
    let symbol_mse = mse(s, &out.estimates);
    let power = s.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
    Ok(LinkRun {
        symbol_mse,
        ideal_mse: mse(s, &ideal_analog_link(s, snr_db, seed ^ 1)),
        evm_percent: 100.0 * (symbol_mse / power).sqrt(),
        ber: out.bit_errors.map_or(f64::NAN, |e| e as f64 / out.bits_sent as f64),
        chosen: em.n_prime(),
        samples: out.record.tx.samples.len(),
        targets: flatten(s),
        estimates: flatten(&out.estimates),
    })
}

/// Symbol MSE against SNR for the ideal analog channel, the emulated link and
/// float serialization, as CSV `system,snr_db,symbol_mse,ber`.
#[wasm_bindgen]
pub fn sweep(modulation: &str, rate: &str, snr_from: f64, snr_to: f64, step: f64, n: usize, seed: u64) -> Result<String, String> {
    check_count(n)?;
    if !(step > 0.0) || !(snr_to >= snr_from) || (snr_to - snr_from) / step > 40.0 {
        return Err("need from <= to, step > 0 and at most 41 points".into());
    }
    let points = ((snr_to - snr_from) / step + 1e-9).floor() as usize + 1;
    let spec = ExperimentSpec {
        snrs: (0..points).map(|i| snr_from + step * i as f64).collect(),
        symbols: n,
        images: 1,
        systems: vec![SystemId::IdealAnalog, SystemId::Emulated, SystemId::FloatSerialization],
        seed,
        ..ExperimentSpec::default()
    };
    let rows = sweep_rows(&spec, &phy(modulation, rate)?, &SweepModels::default()).map_err(|e| e.to_string())?;
    let mut csv = String::from("system,snr_db,symbol_mse,ber\n");
    for r in rows {
        let ber = r.ber.map(|b| b.to_string()).unwrap_or_default();
        writeln!(csv, "{},{},{},{}", r.system, r.snr_db, r.symbol_mse, ber).expect("writing to a String");
    }
    Ok(csv)
}

/// Self-test report for one PHY configuration, one check per line.
#[wasm_bindgen]
pub fn selftest_report(modulation: &str, rate: &str) -> Result<String, String> {
    let report = selftest(&phy(modulation, rate)?).map_err(|e| e.to_string())?;
    Ok(report.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emulate_reports_consistent_metrics() {
        let r = emulate("64qam", "3/4", 2000, 30.0, 5, false).unwrap();
        assert_eq!(r.targets().len(), 4000);
        assert_eq!(r.estimates().len(), 4000);
        assert!(r.ber().is_nan());
        assert!(r.symbol_mse() > r.ideal_mse(), "quantization adds error at high SNR");
        assert!(r.symbol_mse() < 0.2, "{}", r.symbol_mse());
        let h = emulate("64qam", "3/4", 2000, 30.0, 5, true).unwrap();
        assert!(h.ber() >= 0.0 && h.ber() < 1e-2, "{}", h.ber());
    }

    #[test]
    fn emulate_is_deterministic_and_validates_input() {
        let a = emulate("16qam", "1/2", 300, 10.0, 2, false).unwrap();
        let b = emulate("16qam", "1/2", 300, 10.0, 2, false).unwrap();
        assert_eq!(a.estimates(), b.estimates());
        assert!(emulate("8psk", "1/2", 300, 10.0, 2, false).is_err());
        assert!(emulate("16qam", "1/2", 0, 10.0, 2, false).is_err());
    }

    #[test]
    fn sweep_csv_has_a_row_per_cell() {
        let csv = sweep("64qam", "3/4", 0.0, 20.0, 10.0, 200, 1).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "system,snr_db,symbol_mse,ber");
        assert_eq!(lines.len(), 1 + 3 * 3);
        assert!(lines[1].starts_with("ideal-analog,0,"));
        assert!(sweep("64qam", "3/4", 10.0, 0.0, 5.0, 200, 1).is_err());
    }

    #[test]
    fn selftest_lists_every_check() {
        let text = selftest_report("qpsk", "1/2").unwrap();
        assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 7, "{text}");
    }
}
