use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::spec::{ExperimentSpec, SystemId};
use crate::error::{Error, Result};
use crate::link::{
    emulated_link, float_serialization_link, ideal_analog_link, Emulator, RecoveryMode, TargetSymbols,
    WaveformCompensator, DEFAULT_SATURATION_BOUND,
};
use crate::nn::{glyph_images, Compensator, ToyJscc};
use crate::phy::PhyConfig;
use crate::train::{derive_seed, gaussian_symbols, init_models, Checkpoints, Slot};

pub const SWEEP_CSV: &str = "sweep.csv";
pub const CSV_HEADER: &str = "system,snr_db,symbol_mse,image_mse,evm_percent,ber,n,seed";

const TAG_SYMBOLS: u64 = 1;
const TAG_IMAGES: u64 = 2;

/// One (system, SNR) cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub system: String,
    pub snr_db: f64,
    pub symbol_mse: f64,
    pub image_mse: Option<f64>,
    pub evm_percent: f64,
    pub ber: Option<f64>,
    /// Symbols the symbol-level metrics average over.
    pub n: usize,
    pub seed: u64,
    /// Standard error of `symbol_mse`.
    #[serde(skip)]
    pub stderr: f64,
}

/// Trained models a sweep can use. Missing ones leave image metrics empty.
#[derive(Debug, Clone, Default)]
pub struct SweepModels {
    /// Codec trained on the analog channel only.
    pub jscc_awgn: Option<ToyJscc>,
    /// Jointly trained codec and compensator.
    pub jscc: Option<ToyJscc>,
    pub comp: Option<Compensator>,
}

impl SweepModels {
    /// Whatever models `ck` holds for this PHY.
    pub fn load(ck: &Checkpoints, em: &Emulator) -> Result<Self> {
        let Some(manifest) = ck.manifest()? else {
            return Ok(SweepModels::default());
        };
        let phy = em.config();
        let (jscc, comp, _) = init_models(em, &manifest.train, &manifest.model)?;
        let try_load = |slot: Slot, mut m: ToyJscc| -> Result<Option<ToyJscc>> {
            match ck.load(slot, phy, &mut m) {
                Ok(()) => Ok(Some(m)),
                Err(Error::MissingCheckpoint { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        };
        let mut c = comp;
        let comp = match ck.load(Slot::CompJoint, phy, &mut c) {
            Ok(()) => Some(c),
            Err(Error::MissingCheckpoint { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(SweepModels {
            jscc_awgn: try_load(Slot::JsccAwgn, jscc.clone())?,
            jscc: try_load(Slot::Jscc, jscc)?,
            comp,
        })
    }
}

struct Workload {
    symbols: Vec<Complex64>,
    images: Vec<Vec<f64>>,
}

/// Mean, standard error (sample deviation over √n).
fn mean_stderr(errors: &[f64]) -> (f64, f64) {
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    if errors.len() < 2 {
        return (mean, 0.0);
    }
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn symbol_errors(est: &[Complex64], reference: &[Complex64]) -> Vec<f64> {
    est.iter().zip(reference).map(|(a, b)| (a - b).norm_sqr()).collect()
}

fn image_mse(images: &[Vec<f64>], decoded: &[Vec<f64>]) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for (a, b) in images.iter().zip(decoded) {
        sum += a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        count += a.len();
    }
    sum / count as f64
}

fn row(system: SystemId, snr_db: f64, errors: &[f64], reference: &[Complex64], seed: u64) -> MetricRow {
    let (mse, stderr) = mean_stderr(errors);
    let power = reference.iter().map(|z| z.norm_sqr()).sum::<f64>() / reference.len() as f64;
    MetricRow {
        system: system.name().to_string(),
        snr_db,
        symbol_mse: mse,
        image_mse: None,
        evm_percent: 100.0 * (mse / power).sqrt(),
        ber: None,
        n: errors.len(),
        seed,
        stderr,
    }
}

fn zero_shot_codec(models: &SweepModels, spec: &ExperimentSpec) -> Result<ToyJscc> {
    models.jscc_awgn.clone().ok_or_else(|| Error::MissingCheckpoint {
        path: match &spec.checkpoints {
            Some(dir) => dir.join(Slot::JsccAwgn.file()).display().to_string(),
            None => format!("{} (no checkpoint directory configured)", Slot::JsccAwgn.file()),
        },
        command: Slot::JsccAwgn.command(),
    })
}

fn run_cell(
    system: SystemId,
    snr: f64,
    seed: u64,
    em: &Emulator,
    models: &SweepModels,
    work: &Workload,
) -> Result<MetricRow> {
    let phy = em.config();
    let m = phy.modulation;
    match system {
        SystemId::IdealAnalog => {
            let est = ideal_analog_link(&work.symbols, snr, seed);
            let mut r = row(system, snr, &symbol_errors(&est, &work.symbols), &work.symbols, seed);
            if let Some(j) = &models.jscc_awgn {
                let z = j.encode(&work.images)?;
                let y = ideal_analog_link(&z, snr, derive_seed(seed, 1));
                r.image_mse = Some(image_mse(&work.images, &j.decode(&y)?));
            }
            Ok(r)
        }
        SystemId::Emulated => {
            let targets = TargetSymbols::with_default_scale(work.symbols.clone(), m)?;
            let out = emulated_link(em, &targets, snr, seed, RecoveryMode::Soft, None)?;
            let mut r = row(system, snr, &symbol_errors(&out.estimates, &work.symbols), &work.symbols, seed);
            if let (Some(j), Some(c)) = (&models.jscc, &models.comp) {
                let t = TargetSymbols::with_default_scale(j.encode(&work.images)?, m)?;
                let comp: &dyn WaveformCompensator = c;
                let out = emulated_link(em, &t, snr, derive_seed(seed, 1), RecoveryMode::Soft, Some(comp))?;
                r.image_mse = Some(image_mse(&work.images, &j.decode(&out.estimates)?));
            }
            Ok(r)
        }
        SystemId::FloatSerialization => {
            let values: Vec<f64> = work.symbols.iter().flat_map(|z| [z.re, z.im]).collect();
            let out = float_serialization_link(&values, snr, seed, phy, DEFAULT_SATURATION_BOUND)?;
            let est: Vec<Complex64> = out.values.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
            let mut r = row(system, snr, &symbol_errors(&est, &work.symbols), &work.symbols, seed);
            r.ber = Some(out.bit_errors as f64 / out.bits_sent as f64);
            Ok(r)
        }
        SystemId::ZeroShot => {
            let j = models.jscc_awgn.as_ref().expect("checked before the sweep");
            let z = j.encode(&work.images)?;
            let targets = TargetSymbols::with_default_scale(z.clone(), m)?;
            let out = emulated_link(em, &targets, snr, seed, RecoveryMode::Hard, None)?;
            let mut r = row(system, snr, &symbol_errors(&out.estimates, &z), &z, seed);
            r.ber = Some(out.bit_errors.unwrap_or(0) as f64 / out.bits_sent as f64);
            r.image_mse = Some(image_mse(&work.images, &j.decode(&out.estimates)?));
            Ok(r)
        }
    }
}

/// Evaluates every (system, SNR) cell. Cell `i` (systems outer, SNRs
/// inner) draws its noise from seed `spec.seed ^ i`; the workload is shared
/// by all cells. Cells run in parallel; the result does not depend on
/// scheduling.
pub fn sweep_rows(spec: &ExperimentSpec, phy: &PhyConfig, models: &SweepModels) -> Result<Vec<MetricRow>> {
    spec.validate()?;
    let em = Emulator::new(phy)?;
    if spec.systems.contains(&SystemId::ZeroShot) {
        zero_shot_codec(models, spec)?;
    }
    let side = models
        .jscc_awgn
        .as_ref()
        .or(models.jscc.as_ref())
        .map_or(8, |j| (j.pixels() as f64).sqrt().round() as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, TAG_SYMBOLS));
    let work = Workload {
        symbols: gaussian_symbols(spec.symbols, &mut rng),
        images: glyph_images(spec.images, side, derive_seed(spec.seed, TAG_IMAGES)),
    };
    let cells: Vec<(SystemId, f64)> = spec
        .systems
        .iter()
        .flat_map(|&s| spec.snrs.iter().map(move |&snr| (s, snr)))
        .collect();
    let cell = |i: usize| {
        let (system, snr) = cells[i];
        run_cell(system, snr, spec.seed ^ i as u64, &em, models, &work)
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len());
    if workers <= 1 {
        // Also the path on targets without threads.
        return (0..cells.len()).map(cell).collect();
    }
    let results: Mutex<Vec<Option<Result<MetricRow>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cells.len() {
                    break;
                }
                let r = cell(i);
                results.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}

pub fn write_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// Loads any checkpointed models, runs the sweep and writes
/// `<out>/sweep.csv`.
pub fn run_sweep(spec: &ExperimentSpec, phy: &PhyConfig) -> Result<Vec<MetricRow>> {
    spec.validate()?;
    let models = match &spec.checkpoints {
        Some(dir) => SweepModels::load(&Checkpoints::new(dir), &Emulator::new(phy)?)?,
        None => SweepModels::default(),
    };
    let rows = sweep_rows(spec, phy, &models)?;
    write_csv(&spec.out.join(SWEEP_CSV), &rows)?;
    Ok(rows)
}
