use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use jscc_ofdm::harness::{emit_plotdata, run_sweep, selftest, RunConfig, SWEEP_CSV, EXIT_INVARIANT, EXIT_OK};
use jscc_ofdm::link::{awgn, emulated_link, write_batch, Emulator, RecoveryMode, RxHeader, TargetSymbols};
use jscc_ofdm::phy::{read_frame, write_frame, BasebandFrame};
use jscc_ofdm::train::{
    derive_seed, gaussian_symbols, init_models, pretrain_codec_awgn, proxy_dataset, stage1_train_compensator,
    stage2_train_proxy, stage3_alternate, write_trace, Checkpoints, LossRow, Slot, StageReport,
};
use jscc_ofdm::{Complex64, Error, Result};

use crate::symbols::{read_symbols, write_symbols};
use crate::{Command, Common, SymbolSource};

pub const TX_MANIFEST: &str = "tx.toml";
pub const TX_TARGETS: &str = "targets.txt";
pub const ESTIMATES: &str = "estimates.txt";
pub const COMP_TRACE: &str = "comp_trace.csv";
pub const PROXY_TRACE: &str = "proxy_trace.csv";
pub const E2E_TRACE: &str = "e2e_trace.csv";

const DEFAULT_RANDOM: usize = 1024;
const TAG_TX: u64 = 1;
const TAG_RX: u64 = 2;
const TAG_EMULATE: u64 = 3;

/// What `rx` needs to know about the packets `tx` wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxManifest {
    /// PHY fingerprint the frames were produced for.
    pub phy: String,
    pub packets: Vec<TxPacket>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxPacket {
    pub file: String,
    pub symbol_count: usize,
    pub scale: f64,
}

pub fn run(command: Command) -> Result<i32> {
    match command {
        Command::Selftest { common } => cmd_selftest(&common),
        Command::Tx { common, source } => cmd_tx(&common, &source),
        Command::Rx {
            common,
            input,
            snr,
            mode,
        } => cmd_rx(&common, &input, snr, mode.into()),
        Command::Emulate {
            common,
            source,
            snr,
            mode,
            records,
        } => cmd_emulate(&common, &source, snr, mode.into(), records),
        Command::Sweep {
            common,
            checkpoints,
            systems,
            snrs,
            symbols,
            images,
        } => {
            let (mut cfg, out) = common.load()?;
            let e = &mut cfg.experiment;
            e.out = out;
            e.checkpoints = checkpoints.or(e.checkpoints.take());
            e.systems = systems.unwrap_or(std::mem::take(&mut e.systems));
            e.snrs = snrs.unwrap_or(std::mem::take(&mut e.snrs));
            e.symbols = symbols.unwrap_or(e.symbols);
            e.images = images.unwrap_or(e.images);
            cmd_sweep(&cfg)
        }
        Command::TrainComp { common } => cmd_train_comp(&common),
        Command::TrainProxy { common } => cmd_train_proxy(&common),
        Command::TrainE2e { common } => cmd_train_e2e(&common),
    }
}

fn symbol_mse(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len().max(1) as f64
}

fn evm_percent(reference: &[Complex64], estimate: &[Complex64]) -> f64 {
    let p = reference.iter().map(|z| z.norm_sqr()).sum::<f64>() / reference.len().max(1) as f64;
    100.0 * (symbol_mse(reference, estimate) / p).sqrt()
}

fn source_symbols(source: &SymbolSource, seed: u64) -> Result<Vec<Complex64>> {
    match (&source.symbols, source.random) {
        (Some(path), _) => read_symbols(path),
        (None, Some(0)) => Err(Error::Config("--random needs at least one symbol".into())),
        (None, n) => Ok(gaussian_symbols(
            n.unwrap_or(DEFAULT_RANDOM),
            &mut ChaCha8Rng::seed_from_u64(seed),
        )),
    }
}

fn cmd_selftest(common: &Common) -> Result<i32> {
    let (cfg, _) = common.load()?;
    let report = selftest(&cfg.phy)?;
    println!("{report}");
    Ok(if report.passed() { EXIT_OK } else { EXIT_INVARIANT })
}

fn cmd_tx(common: &Common, source: &SymbolSource) -> Result<i32> {
    let (cfg, out) = common.load()?;
    let em = Emulator::new(&cfg.phy)?;
    let symbols = source_symbols(source, derive_seed(cfg.experiment.seed, TAG_TX))?;
    let targets = TargetSymbols::with_default_scale(symbols, cfg.phy.modulation)?;
    fs::create_dir_all(&out)?;
    let mut manifest = TxManifest {
        phy: cfg.phy.fingerprint(),
        packets: Vec::new(),
    };
    let mut samples = 0;
    let mut clipped = 0;
    for (i, plan) in em.plan_packets(&targets)?.iter().enumerate() {
        let frame = em.transmit(plan)?;
        let file = format!("packet{i:04}.bbf");
        write_frame(fs::File::create(out.join(&file))?, &frame.samples)?;
        samples += frame.samples.len();
        clipped += plan.clipped;
        let rx = plan.rx_header();
        manifest.packets.push(TxPacket {
            file,
            symbol_count: rx.symbol_count,
            scale: rx.scale,
        });
    }
    let text = toml::to_string(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(out.join(TX_MANIFEST), text)?;
    write_symbols(&out.join(TX_TARGETS), &targets.symbols)?;
    println!(
        "{} symbols in {} packets, {} samples, {} clipped, chosen subcarriers {:?} -> {}",
        targets.len(),
        manifest.packets.len(),
        samples,
        clipped,
        em.chosen(),
        out.display()
    );
    Ok(EXIT_OK)
}

fn cmd_rx(common: &Common, input: &Path, snr: Option<f64>, mode: RecoveryMode) -> Result<i32> {
    let (cfg, out) = common.load()?;
    let em = Emulator::new(&cfg.phy)?;
    let path = input.join(TX_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let manifest: TxManifest = toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if manifest.phy != cfg.phy.fingerprint() {
        return Err(Error::Config(format!(
            "frames in {} were made for PHY {}, the config describes {}",
            input.display(),
            manifest.phy,
            cfg.phy.fingerprint()
        )));
    }
    let sps = cfg.phy.samples_per_ofdm();
    let base = derive_seed(cfg.experiment.seed, TAG_RX);
    let mut estimates = Vec::new();
    for (i, p) in manifest.packets.iter().enumerate() {
        let samples = read_frame(fs::File::open(input.join(&p.file))?)?;
        let mut frame = BasebandFrame::new(samples, sps)?;
        if let Some(snr) = snr {
            frame = awgn(&frame, snr, derive_seed(base, i as u64));
        }
        let header = RxHeader {
            symbol_count: p.symbol_count,
            scale: p.scale,
        };
        match mode {
            RecoveryMode::Soft => estimates.extend(em.receive_soft(&frame, &header)?),
            RecoveryMode::Hard => estimates.extend(em.receive_hard(&frame, &header)?.0),
        }
    }
    fs::create_dir_all(&out)?;
    write_symbols(&out.join(ESTIMATES), &estimates)?;
    print!("{} symbols from {} packets ({mode})", estimates.len(), manifest.packets.len());
    let reference = input.join(TX_TARGETS);
    if reference.exists() {
        let targets = read_symbols(&reference)?;
        print!(
            ", symbol MSE {:.6e}, EVM {:.3}%",
            symbol_mse(&targets, &estimates),
            evm_percent(&targets, &estimates)
        );
    }
    println!(" -> {}", out.join(ESTIMATES).display());
    Ok(EXIT_OK)
}

fn cmd_emulate(common: &Common, source: &SymbolSource, snr: f64, mode: RecoveryMode, records: usize) -> Result<i32> {
    if records == 0 {
        return Err(Error::Config("--records must be at least 1".into()));
    }
    let (cfg, out) = common.load()?;
    let em = Emulator::new(&cfg.phy)?;
    let base = derive_seed(cfg.experiment.seed, TAG_EMULATE);
    let mut batch = Vec::with_capacity(records);
    for i in 0..records as u64 {
        let symbols = source_symbols(source, derive_seed(base, 2 * i))?;
        let targets = TargetSymbols::with_default_scale(symbols, cfg.phy.modulation)?;
        let link = emulated_link(&em, &targets, snr, derive_seed(base, 2 * i + 1), mode, None)?;
        print!(
            "record {i}: {} symbols, symbol MSE {:.6e}, EVM {:.3}%",
            targets.len(),
            symbol_mse(&targets.symbols, &link.estimates),
            evm_percent(&targets.symbols, &link.estimates)
        );
        if let Some(errors) = link.bit_errors {
            print!(", BER {:.3e}", errors as f64 / link.bits_sent as f64);
        }
        println!();
        batch.push(link.record);
    }
    write_batch(&out, &batch)?;
    println!("{} records at {snr} dB ({mode}) -> {}", batch.len(), out.display());
    Ok(EXIT_OK)
}

fn cmd_sweep(cfg: &RunConfig) -> Result<i32> {
    let rows = run_sweep(&cfg.experiment, &cfg.phy)?;
    emit_plotdata(&rows, &cfg.experiment.out)?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4e}"));
    println!("{:<20} {:>6} {:>12} {:>12} {:>9} {:>10}", "system", "snr", "symbol_mse", "image_mse", "evm%", "ber");
    for r in &rows {
        println!(
            "{:<20} {:>6} {:>12.4e} {:>12} {:>9.3} {:>10}",
            r.system,
            r.snr_db,
            r.symbol_mse,
            fmt(r.image_mse),
            r.evm_percent,
            fmt(r.ber)
        );
    }
    println!("{} rows -> {}", rows.len(), cfg.experiment.out.join(SWEEP_CSV).display());
    Ok(EXIT_OK)
}

fn stage_rows(phase: &str, report: &StageReport, set: fn(&mut LossRow, f64)) -> Vec<LossRow> {
    std::iter::once(report.initial_loss)
        .chain(report.trace.iter().copied())
        .enumerate()
        .map(|(i, l)| {
            let mut row = LossRow::new(i, phase);
            set(&mut row, l);
            row
        })
        .collect()
}

fn cmd_train_comp(common: &Common) -> Result<i32> {
    let (cfg, out) = common.load()?;
    let em = Emulator::new(&cfg.phy)?;
    let (_, mut comp, _) = init_models(&em, &cfg.train, &cfg.model)?;
    let report = stage1_train_compensator(&em, &mut comp, &cfg.train)?;
    let ck = Checkpoints::new(&out);
    ck.save((&cfg.phy, &cfg.train, &cfg.model), &[(Slot::Comp, &comp)])?;
    write_trace(&out.join(COMP_TRACE), &stage_rows("stage1", &report, |r, l| r.l_comp = Some(l)))?;
    println!(
        "compensator loss {:.6e} -> {:.6e} ({:.1}% lower) -> {}",
        report.initial_loss,
        report.final_loss(),
        100.0 * (1.0 - report.final_loss() / report.initial_loss),
        out.join(Slot::Comp.file()).display()
    );
    Ok(EXIT_OK)
}

fn cmd_train_proxy(common: &Common) -> Result<i32> {
    let (cfg, out) = common.load()?;
    let em = Emulator::new(&cfg.phy)?;
    let (mut jscc, _, mut proxy) = init_models(&em, &cfg.train, &cfg.model)?;
    // Surrogate records carry codec outputs, so the codec is pretrained
    // first exactly as `train-e2e` will.
    pretrain_codec_awgn(&mut jscc, &cfg.train)?;
    let records = proxy_dataset(&em, &cfg.train, Some(&jscc), cfg.train.proxy_records, 0)?;
    let fit = stage2_train_proxy(&records, &em, &mut proxy, &cfg.train)?;
    let ck = Checkpoints::new(&out);
    ck.save((&cfg.phy, &cfg.train, &cfg.model), &[(Slot::Proxy, &proxy)])?;
    let report = StageReport {
        initial_loss: fit.initial_loss,
        trace: fit.trace.clone(),
    };
    write_trace(&out.join(PROXY_TRACE), &stage_rows("stage2", &report, |r, l| r.l_proxy = Some(l)))?;
    println!(
        "surrogate held-out MSE {:.6e} (bound 2σ²+floor = {:.6e}, {} train / {} held-out records) -> {}",
        fit.held_out_mse,
        fit.bound(),
        fit.train_records,
        fit.held_out_records,
        out.join(Slot::Proxy.file()).display()
    );
    Ok(EXIT_OK)
}

fn cmd_train_e2e(common: &Common) -> Result<i32> {
    let (cfg, out) = common.load()?;
    let em = Emulator::new(&cfg.phy)?;
    let (mut jscc, mut comp, mut proxy) = init_models(&em, &cfg.train, &cfg.model)?;
    let ck = Checkpoints::new(&out);
    ck.load(Slot::Comp, &cfg.phy, &mut comp)?;
    ck.load(Slot::Proxy, &cfg.phy, &mut proxy)?;
    let codec = pretrain_codec_awgn(&mut jscc, &cfg.train)?;
    let jscc_awgn = jscc.clone();
    let report = stage3_alternate(&mut jscc, &mut comp, &mut proxy, &em, &cfg.train)?;
    ck.save(
        (&cfg.phy, &cfg.train, &cfg.model),
        &[
            (Slot::JsccAwgn, &jscc_awgn),
            (Slot::Jscc, &jscc),
            (Slot::CompJoint, &comp),
            (Slot::ProxyJoint, &proxy),
        ],
    )?;
    let mut rows = stage_rows("codec", &codec, |r, l| r.l_jscc = Some(l));
    rows.extend(report.rows.iter().cloned());
    write_trace(&out.join(E2E_TRACE), &rows)?;
    let first = report.validation.first().copied().unwrap_or(f64::NAN);
    let last = report.validation.last().copied().unwrap_or(f64::NAN);
    println!(
        "joint validation loss {first:.6e} -> {last:.6e} after {} cycles ({}) -> {}",
        report.cycles,
        if report.converged { "converged" } else { "cycle cap reached" },
        out.display()
    );
    Ok(EXIT_OK)
}
