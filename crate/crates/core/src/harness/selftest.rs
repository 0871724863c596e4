use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::gf2::SymbolSystem;
use crate::link::{default_scale, emulated_link, Emulator, RecoveryMode, TargetSymbols};
use crate::nn::{evaluate, glyph_images, grad_check, Compensator, ModelConfig, ParamSet, PeriodSpec, ProxyModel, Tensor, ToyJscc};
use crate::phy::{interleave, puncture, scrambler_sequence, CodeRate, Constellation, Modulation, Phy, PhyConfig, STANDARD_GENERATORS};

const VECTORS: usize = 1000;
const GRAD_TOLERANCE: f64 = 1e-4;

/// Outcome of one self-test invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestReport {
    pub checks: Vec<Check>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for SelfTestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {:<22} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2)).collect()
}

/// Scrambler as seven explicit delay cells `x1..x7`, output `x7 ^ x4`.
fn scrambler_oracle(seed: u8, len: usize) -> Vec<u8> {
    let mut x = [0u8; 8];
    for (i, cell) in x.iter_mut().enumerate().skip(1) {
        *cell = (seed >> (i - 1)) & 1;
    }
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let b = x[7] ^ x[4];
        for i in (2..=7).rev() {
            x[i] = x[i - 1];
        }
        x[1] = b;
        out.push(b);
    }
    out
}

fn check_scrambler(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut bad = 0;
    for _ in 0..VECTORS {
        let seed = rng.random_range(1..128u8);
        let len = rng.random_range(1..400);
        if scrambler_sequence(seed, len)? != scrambler_oracle(seed, len) {
            bad += 1;
        }
    }
    let head: String = scrambler_sequence(0x7f, 16)?.iter().map(|b| (b'0' + b) as char).collect();
    let known = head == "0000111011110010";
    Ok(Check {
        name: "scrambler-oracle",
        passed: bad == 0 && known,
        detail: format!("{bad}/{VECTORS} vectors differ; all-ones seed starts {head}"),
    })
}

/// Mother-code outputs kept per rate, written out index by index.
fn puncture_oracle(bits: &[u8], rate: CodeRate) -> Vec<u8> {
    let mut out = Vec::new();
    match rate {
        CodeRate::Half => out.extend_from_slice(bits),
        CodeRate::TwoThirds => {
            for c in bits.chunks(4) {
                out.extend_from_slice(&[c[0], c[1], c[2]]);
            }
        }
        CodeRate::ThreeQuarters => {
            for c in bits.chunks(6) {
                out.extend_from_slice(&[c[0], c[1], c[2], c[5]]);
            }
        }
        CodeRate::FiveSixths => {
            for c in bits.chunks(10) {
                out.extend_from_slice(&[c[0], c[1], c[2], c[5], c[6], c[9]]);
            }
        }
    }
    out
}

fn check_puncturer(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut bad = 0;
    for i in 0..VECTORS {
        let rate = CodeRate::ALL[i % CodeRate::ALL.len()];
        let period = 2 * rate.numerator();
        let blocks = rng.random_range(1..60);
        let bits = random_bits(rng, period * blocks);
        if puncture(&bits, rate)? != puncture_oracle(&bits, rate) {
            bad += 1;
        }
    }
    Ok(Check {
        name: "puncturer-oracle",
        passed: bad == 0,
        detail: format!("{bad}/{VECTORS} vectors differ"),
    })
}

/// Two-permutation block interleaver, straight from its index formulas.
fn interleave_oracle(bits: &[u8], n_cbps: usize, n_bpsc: usize) -> Vec<u8> {
    let s = (n_bpsc / 2).max(1);
    let mut out = vec![0; bits.len()];
    for (block, chunk) in bits.chunks(n_cbps).enumerate() {
        for (k, &b) in chunk.iter().enumerate() {
            let i = (n_cbps / 16) * (k % 16) + k / 16;
            let j = s * (i / s) + (i + n_cbps - (16 * i / n_cbps)) % s;
            out[block * n_cbps + j] = b;
        }
    }
    out
}

fn check_interleaver(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut bad = 0;
    for i in 0..VECTORS {
        let m = Modulation::ALL[i % Modulation::ALL.len()];
        let n_bpsc = m.bits_per_symbol();
        let n_cbps = 48 * n_bpsc;
        let bits = random_bits(rng, n_cbps);
        if interleave(&bits, n_cbps, n_bpsc)? != interleave_oracle(&bits, n_cbps, n_bpsc) {
            bad += 1;
        }
    }
    Ok(Check {
        name: "interleaver-oracle",
        passed: bad == 0,
        detail: format!("{bad}/{VECTORS} vectors differ"),
    })
}

fn check_loopback(base: &PhyConfig, rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut configs = 0;
    let mut errors = 0;
    for m in Modulation::ALL {
        for r in CodeRate::ALL {
            let cfg = PhyConfig {
                modulation: m,
                code_rate: r,
                ..base.clone()
            };
            if cfg.validate().is_err() {
                continue;
            }
            configs += 1;
            let phy = Phy::new(&cfg)?;
            let bits = random_bits(rng, 3 * cfg.n_dbps());
            let back = phy.rx(&phy.tx(&bits)?)?;
            errors += bits.iter().zip(&back).filter(|(a, b)| a != b).count();
        }
    }
    Ok(Check {
        name: "noiseless-loopback",
        passed: errors == 0 && configs > 0,
        detail: format!("{errors} bit errors over {configs} (modulation, rate) configs"),
    })
}

/// The GF(2) model of the standard coder against the bit pipeline `cfg`
/// actually configures.
fn check_gf2(cfg: &PhyConfig) -> Result<Check> {
    let sys = SymbolSystem::build(cfg)?;
    let bad = sys.probe_mismatches(cfg, VECTORS, 0x5e1f)?;
    let standard = cfg.generators == STANDARD_GENERATORS;
    Ok(Check {
        name: "gf2-probe",
        passed: bad == 0,
        detail: format!(
            "{bad}/{VECTORS} probes disagree with the configured coder (generators {:o}/{:o}{})",
            cfg.generators[0],
            cfg.generators[1],
            if standard { "" } else { ", non-standard" }
        ),
    })
}

fn check_quantization(cfg: &PhyConfig, rng: &mut ChaCha8Rng) -> Result<Check> {
    let em = Emulator::new(cfg)?;
    let m = cfg.modulation;
    let scale = default_scale(m);
    let c = Constellation::new(m);
    let a = c.max_amplitude() / scale;
    let bpsk = m == Modulation::Bpsk;
    let n = 10_000;
    let targets: Vec<Complex64> = (0..n)
        .map(|_| {
            let im = if bpsk { 0.0 } else { rng.random_range(-a..a) };
            Complex64::new(rng.random_range(-a..a), im)
        })
        .collect();
    let t = TargetSymbols::new(targets.clone(), scale)?;
    let out = emulated_link(&em, &t, f64::INFINITY, 0, RecoveryMode::Soft, None)?;
    let half_step = c.step() / (2.0 * scale);
    let mut worst: f64 = 0.0;
    let mut sq = 0.0;
    for (e, t) in out.estimates.iter().zip(&targets) {
        let d = e - t;
        worst = worst.max(d.re.abs()).max(d.im.abs());
        sq += d.norm_sqr();
    }
    let rms = (sq / n as f64).sqrt();
    let axes = if bpsk { 1.0f64 } else { 2.0 };
    let expected = axes.sqrt() * (2.0 * half_step) / 12f64.sqrt();
    let ratio = rms / expected;
    Ok(Check {
        name: "quantization-bound",
        passed: worst <= half_step * (1.0 + 1e-9) && (ratio - 1.0).abs() < 0.05,
        detail: format!("max axis error {worst:.4} <= {half_step:.4}; rms {rms:.4} vs {expected:.4}"),
    })
}

fn randomized(p: &ParamSet, rng: &mut ChaCha8Rng, amp: f64) -> ParamSet {
    let mut p = p.clone();
    for t in p.tensors.iter_mut() {
        t.data.iter_mut().for_each(|v| *v = rng.random_range(-amp..amp));
    }
    p
}

fn check_gradients(cfg: &PhyConfig, rng: &mut ChaCha8Rng) -> Result<Check> {
    let em = Emulator::new(cfg)?;
    let mc = ModelConfig::default();
    let map = em.waveform_map();
    let k = 2 * map.n_prime();
    let n = map.samples_for(k);
    let x = Tensor::new(&[n, 2], (0..2 * n).map(|_| rng.random_range(-0.5..0.5)).collect())?;
    let t = Tensor::new(&[n, 2], (0..2 * n).map(|_| rng.random_range(-0.5..0.5)).collect())?;
    let mask = map.guard_mask(k);
    let mut reports = Vec::new();

    let comp = Compensator::new(&mc, PeriodSpec::for_link(map, None)?, 1);
    let params = randomized(&comp.params, rng, 0.4);
    reports.push((
        "compensator",
        grad_check(
            &params,
            |p| {
                evaluate(p, |g, v| {
                    let xv = g.input(x.clone());
                    let y = comp.forward(g, v, xv, &mask);
                    let tv = g.input(t.clone());
                    g.mse(y, tv)
                })
            },
            GRAD_TOLERANCE,
        )?,
    ));

    let proxy = ProxyModel::for_link(&mc, &em, 2);
    let params = randomized(&proxy.params, rng, 0.3);
    let noise = proxy.sample_noise(n, 5.0, 3);
    reports.push((
        "proxy",
        grad_check(
            &params,
            |p| {
                evaluate(p, |g, v| {
                    let xv = g.input(x.clone());
                    let y = proxy.forward(g, v, xv, Some(&noise));
                    let tv = g.input(t.clone());
                    g.mse(y, tv)
                })
            },
            GRAD_TOLERANCE,
        )?,
    ));

    let jscc = ToyJscc::new(&mc, 4);
    let params = randomized(&jscc.params, rng, 0.3);
    let imgs = jscc.batch(&glyph_images(3, 8, 5))?;
    reports.push((
        "toy codec",
        grad_check(
            &params,
            |p| {
                evaluate(p, |g, v| {
                    let xv = g.input(imgs.clone());
                    let z = jscc.encode_graph(g, v, xv);
                    let y = jscc.decode_graph(g, v, z);
                    g.mse(y, xv)
                })
            },
            GRAD_TOLERANCE,
        )?,
    ));
    let passed = reports.iter().all(|(_, r)| r.passed);
    let detail = reports
        .iter()
        .map(|(name, r)| format!("{name} {:.1e}", r.max_relative_error))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Check {
        name: "gradient-check",
        passed,
        detail: format!("max relative error: {detail} (tolerance {GRAD_TOLERANCE:.0e})"),
    })
}

/// Runs every conformance and consistency check against `cfg`. Errors are
/// only returned when a check cannot run at all (e.g. an invalid config).
pub fn selftest(cfg: &PhyConfig) -> Result<SelfTestReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f_7e57);
    let runs: [(&'static str, Box<dyn Fn(&mut ChaCha8Rng) -> Result<Check>>); 7] = [
        ("scrambler-oracle", Box::new(check_scrambler)),
        ("puncturer-oracle", Box::new(check_puncturer)),
        ("interleaver-oracle", Box::new(check_interleaver)),
        ("noiseless-loopback", Box::new(|r| check_loopback(cfg, r))),
        ("gf2-probe", Box::new(|_| check_gf2(cfg))),
        ("quantization-bound", Box::new(|r| check_quantization(cfg, r))),
        ("gradient-check", Box::new(|r| check_gradients(cfg, r))),
    ];
    let checks = runs
        .iter()
        .map(|(name, run)| {
            run(&mut rng).unwrap_or_else(|e| Check {
                name,
                passed: false,
                detail: e.to_string(),
            })
        })
        .collect();
    Ok(SelfTestReport { checks })
}
