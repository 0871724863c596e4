mod commands;
mod symbols;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jscc_ofdm::harness::{exit_code, RunConfig, SystemId};
use jscc_ofdm::link::RecoveryMode;

#[derive(Parser, Debug)]
#[command(name = "jscc-ofdm", version, about = "Analog symbol emulation over an 802.11a-style OFDM link")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options every subcommand accepts.
#[derive(Args, Debug, Clone)]
struct Common {
    /// Plain-text config with optional [phy], [experiment], [train] and [model] tables.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; overrides the seeds in the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory (default: `out` from the [experiment] table).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> jscc_ofdm::Result<(RunConfig, PathBuf)> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        let out = self.out.clone().unwrap_or_else(|| cfg.experiment.out.clone());
        Ok((cfg, out))
    }
}

#[derive(Args, Debug, Clone)]
struct SymbolSource {
    /// Text file of complex symbols, one `re im` pair per line.
    #[arg(long, value_name = "FILE", conflicts_with = "random")]
    symbols: Option<PathBuf>,
    /// Draw this many unit-power complex Gaussian symbols instead.
    #[arg(long, value_name = "N")]
    random: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Mode {
    Soft,
    Hard,
}

impl From<Mode> for RecoveryMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Soft => RecoveryMode::Soft,
            Mode::Hard => RecoveryMode::Hard,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the conformance and invariant checks; exits 1 if any fails.
    Selftest {
        #[command(flatten)]
        common: Common,
    },
    /// Invert target symbols into standard PHY packets and write the baseband frames.
    Tx {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SymbolSource,
    },
    /// Receive frames written by `tx` and recover the target symbols.
    Rx {
        #[command(flatten)]
        common: Common,
        /// Directory written by `tx`.
        #[arg(long, value_name = "DIR")]
        input: PathBuf,
        /// Add white Gaussian noise at this SNR before receiving.
        #[arg(long, value_name = "DB")]
        snr: Option<f64>,
        #[arg(long, value_enum, default_value = "soft")]
        mode: Mode,
    },
    /// Full link loop (invert, transmit, AWGN, receive); writes link records.
    Emulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SymbolSource,
        #[arg(long, value_name = "DB", default_value_t = 10.0)]
        snr: f64,
        #[arg(long, value_enum, default_value = "soft")]
        mode: Mode,
        /// Independent transmissions to record.
        #[arg(long, default_value_t = 1)]
        records: usize,
    },
    /// SNR sweep over the configured systems; writes sweep.csv and plot data.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Checkpoint directory with trained models.
        #[arg(long, value_name = "DIR")]
        checkpoints: Option<PathBuf>,
        /// Systems to run (default: the [experiment] list).
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        systems: Option<Vec<SystemId>>,
        /// SNR points in dB (default: the [experiment] list).
        #[arg(long, value_delimiter = ',', value_name = "LIST", allow_hyphen_values = true)]
        snrs: Option<Vec<f64>>,
        /// Symbols per cell.
        #[arg(long, value_name = "N")]
        symbols: Option<usize>,
        /// Images per cell.
        #[arg(long, value_name = "N")]
        images: Option<usize>,
    },
    /// Stage 1: train the waveform compensator on known transmissions.
    TrainComp {
        #[command(flatten)]
        common: Common,
    },
    /// Stage 2: fit the differentiable link surrogate to recorded transmissions.
    TrainProxy {
        #[command(flatten)]
        common: Common,
    },
    /// Stage 3: joint codec/compensator training through the surrogate.
    /// Needs the checkpoints of `train-comp` and `train-proxy` in --out.
    TrainE2e {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
