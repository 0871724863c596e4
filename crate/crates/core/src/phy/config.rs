use std::fmt;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Generator polynomials of the 802.11 rate-1/2, K=7 mother code (octal 133, 171).
pub const MAX_PSDU_BYTES: usize = 4095;
pub const STANDARD_GENERATORS: [u8; 2] = [0o133, 0o171];

/// Scrambler seed used when none is configured (`1011101`).
pub const DEFAULT_SCRAMBLER_SEED: u8 = 0b101_1101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn order(self) -> usize {
        1 << self.bits_per_symbol()
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }

    /// Amplitude levels per axis (the I axis for BPSK).
    pub fn levels_per_axis(self) -> usize {
        match self {
            Modulation::Bpsk | Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 8,
        }
    }

    /// Normalisation factor `1/sqrt(K_MOD)` giving unit average power.
    pub fn normalization(self) -> f64 {
        let kmod: f64 = match self {
            Modulation::Bpsk => 1.0,
            Modulation::Qpsk => 2.0,
            Modulation::Qam16 => 10.0,
            Modulation::Qam64 => 42.0,
        };
        1.0 / kmod.sqrt()
    }

    pub fn from_order(order: usize) -> Option<Self> {
        match order {
            2 => Some(Modulation::Bpsk),
            4 => Some(Modulation::Qpsk),
            16 => Some(Modulation::Qam16),
            64 => Some(Modulation::Qam64),
            _ => None,
        }
    }

    pub const ALL: [Modulation; 4] = [
        Modulation::Bpsk,
        Modulation::Qpsk,
        Modulation::Qam16,
        Modulation::Qam64,
    ];
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "16qam",
            Modulation::Qam64 => "64qam",
        })
    }
}

impl std::str::FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "bpsk" | "2" => Ok(Modulation::Bpsk),
            "qpsk" | "4qam" | "4" => Ok(Modulation::Qpsk),
            "16qam" | "qam16" | "16" => Ok(Modulation::Qam16),
            "64qam" | "qam64" | "64" => Ok(Modulation::Qam64),
            other => Err(Error::config(format!("unknown modulation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeRate {
    Half,
    TwoThirds,
    ThreeQuarters,
    FiveSixths,
}

impl CodeRate {
    pub fn numerator(self) -> usize {
        match self {
            CodeRate::Half => 1,
            CodeRate::TwoThirds => 2,
            CodeRate::ThreeQuarters => 3,
            CodeRate::FiveSixths => 5,
        }
    }

    pub fn denominator(self) -> usize {
        match self {
            CodeRate::Half => 2,
            CodeRate::TwoThirds => 3,
            CodeRate::ThreeQuarters => 4,
            CodeRate::FiveSixths => 6,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.numerator() as f64 / self.denominator() as f64
    }

    pub const ALL: [CodeRate; 4] = [
        CodeRate::Half,
        CodeRate::TwoThirds,
        CodeRate::ThreeQuarters,
        CodeRate::FiveSixths,
    ];
}

impl fmt::Display for CodeRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator(), self.denominator())
    }
}

impl std::str::FromStr for CodeRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace(' ', "").as_str() {
            "1/2" => Ok(CodeRate::Half),
            "2/3" => Ok(CodeRate::TwoThirds),
            "3/4" => Ok(CodeRate::ThreeQuarters),
            "5/6" => Ok(CodeRate::FiveSixths),
            other => Err(Error::config(format!("unsupported coding rate `{other}`"))),
        }
    }
}

/// Logical subcarrier layout. Indices are signed offsets from DC, in the range
/// `-fft_size/2 .. fft_size/2`; everything not listed is a null bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierMap {
    /// Data subcarriers in the order coded bits are loaded onto them.
    pub data: Vec<i32>,
    pub pilots: Vec<i32>,
    /// Pilot values before the per-symbol polarity is applied.
    pub pilot_values: Vec<f64>,
}

impl SubcarrierMap {
    /// The 48 data / 4 pilot layout of a 20 MHz 802.11a channel.
    pub fn standard() -> Self {
        let pilots = vec![-21, -7, 7, 21];
        let data = (-26..=26)
            .filter(|k| *k != 0 && !pilots.contains(k))
            .collect();
        SubcarrierMap {
            data,
            pilots,
            pilot_values: vec![1.0, 1.0, 1.0, -1.0],
        }
    }
}

/// All constants of the digital PHY in one validated record.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyConfig {
    pub fft_size: usize,
    pub cp_len: usize,
    pub subcarriers: SubcarrierMap,
    pub modulation: Modulation,
    pub code_rate: CodeRate,
    pub scrambler_seed: u8,
    /// Generator taps of the mother code. Only ever changed to exercise the
    /// self-test; the inversion model always assumes the standard code.
    pub generators: [u8; 2],
}

impl Default for PhyConfig {
    fn default() -> Self {
        PhyConfig {
            fft_size: 64,
            cp_len: 16,
            subcarriers: SubcarrierMap::standard(),
            modulation: Modulation::Qam64,
            code_rate: CodeRate::ThreeQuarters,
            scrambler_seed: DEFAULT_SCRAMBLER_SEED,
            generators: STANDARD_GENERATORS,
        }
    }
}

impl PhyConfig {
    pub fn new(modulation: Modulation, code_rate: CodeRate) -> Result<Self> {
        let cfg = PhyConfig {
            modulation,
            code_rate,
            ..PhyConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of data subcarriers `N`.
    pub fn n_data(&self) -> usize {
        self.subcarriers.data.len()
    }

    /// Coded bits per subcarrier.
    pub fn n_bpsc(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    /// Coded bits per OFDM symbol, `N log2 M`.
    pub fn n_cbps(&self) -> usize {
        self.n_data() * self.n_bpsc()
    }

    /// Information bits per OFDM symbol, `R N log2 M`.
    pub fn n_dbps(&self) -> usize {
        self.n_cbps() * self.code_rate.numerator() / self.code_rate.denominator()
    }

    pub fn samples_per_ofdm(&self) -> usize {
        self.fft_size + self.cp_len
    }

    /// OFDM symbols in the longest packet (4095-byte PSDU limit).
    pub fn max_packet_ofdm_symbols(&self) -> usize {
        (MAX_PSDU_BYTES * 8 / self.n_dbps()).max(1)
    }

    /// FFT bin holding logical subcarrier `k`.
    pub fn bin_of(&self, k: i32) -> usize {
        k.rem_euclid(self.fft_size as i32) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 2 || !self.fft_size.is_power_of_two() {
            return Err(Error::config(format!(
                "fft_size must be a power of two >= 2, got {}",
                self.fft_size
            )));
        }
        if self.cp_len > self.fft_size {
            return Err(Error::config("cp_len exceeds fft_size"));
        }
        if self.scrambler_seed == 0 || self.scrambler_seed > 0x7f {
            return Err(Error::config(format!(
                "scrambler_seed must be a nonzero 7-bit word, got {:#x}",
                self.scrambler_seed
            )));
        }
        for g in self.generators {
            if g == 0 || g > 0x7f {
                return Err(Error::config(format!(
                    "generator {g:#o} is not a nonzero 7-bit tap mask"
                )));
            }
        }
        let map = &self.subcarriers;
        if map.data.is_empty() {
            return Err(Error::config("no data subcarriers"));
        }
        if map.pilot_values.len() != map.pilots.len() {
            return Err(Error::config("pilot_values and pilots differ in length"));
        }
        let half = (self.fft_size / 2) as i32;
        let mut used = vec![false; self.fft_size];
        for &k in map.data.iter().chain(map.pilots.iter()) {
            if k < -half || k >= half {
                return Err(Error::config(format!(
                    "subcarrier {k} outside [-{half}, {half})"
                )));
            }
            let bin = self.bin_of(k);
            if used[bin] {
                return Err(Error::config(format!(
                    "subcarrier {k} listed twice (data and pilot sets must be disjoint)"
                )));
            }
            used[bin] = true;
        }
        let n_cbps = self.n_cbps();
        let (num, den) = (self.code_rate.numerator(), self.code_rate.denominator());
        if (n_cbps * num) % den != 0 {
            return Err(Error::config(format!(
                "R*N*log2(M) = {n_cbps}*{num}/{den} is not an integer"
            )));
        }
        if n_cbps % 16 != 0 {
            return Err(Error::config(format!(
                "coded bits per symbol ({n_cbps}) must be a multiple of 16 for the interleaver"
            )));
        }
        let period = super::puncture::pattern(self.code_rate).len();
        if (2 * self.n_dbps()) % period != 0 {
            return Err(Error::config(format!(
                "puncturing period {period} does not divide the {} mother bits of one OFDM symbol",
                2 * self.n_dbps()
            )));
        }
        Ok(())
    }

    /// Parses the `[phy]` table of a plain-text config file. Missing keys keep
    /// their defaults; a file without a `[phy]` table yields the default config.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        match table.get("phy") {
            Some(value) => {
                let raw: RawPhy = value
                    .clone()
                    .try_into()
                    .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
                raw.into_config()
            }
            None => Ok(PhyConfig::default()),
        }
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::from_config_str(&text)
    }

    /// Canonical `[phy]` table; parsing it back yields an identical config.
    pub fn to_config_string(&self) -> String {
        let join_i = |v: &[i32]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let join_f = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!(
            "[phy]\nfft_size = {}\ncp_len = {}\nmodulation = \"{}\"\ncoding_rate = \"{}\"\n\
             scrambler_seed = \"{:07b}\"\ngenerators = [{:#o}, {:#o}]\n\
             subcarrier_map = {{ data = [{}], pilots = [{}], pilot_values = [{}] }}\n",
            self.fft_size,
            self.cp_len,
            self.modulation,
            self.code_rate,
            self.scrambler_seed,
            self.generators[0],
            self.generators[1],
            join_i(&self.subcarriers.data),
            join_i(&self.subcarriers.pilots),
            join_f(&self.subcarriers.pilot_values),
        )
    }

    /// Short stable hash of the canonical config text.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_config_string().as_bytes());
        hex::encode(&digest[..8])
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhy {
    fft_size: Option<usize>,
    cp_len: Option<usize>,
    modulation: Option<IntOrString>,
    coding_rate: Option<String>,
    scrambler_seed: Option<IntOrString>,
    subcarrier_map: Option<RawMap>,
    generators: Option<[u32; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum IntOrString {
    Int(i64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawMap {
    Named(String),
    Explicit {
        data: Vec<i32>,
        pilots: Vec<i32>,
        pilot_values: Option<Vec<f64>>,
    },
}

impl RawPhy {
    fn into_config(self) -> Result<PhyConfig> {
        let mut cfg = PhyConfig::default();
        if let Some(n) = self.fft_size {
            cfg.fft_size = n;
        }
        if let Some(n) = self.cp_len {
            cfg.cp_len = n;
        }
        if let Some(m) = self.modulation {
            cfg.modulation = match m {
                IntOrString::Int(order) => Modulation::from_order(order as usize)
                    .ok_or_else(|| Error::config(format!("unsupported modulation order {order}")))?,
                IntOrString::Text(s) => s.parse()?,
            };
        }
        if let Some(r) = self.coding_rate {
            cfg.code_rate = r.parse()?;
        }
        if let Some(seed) = self.scrambler_seed {
            let value = match seed {
                IntOrString::Int(v) => v,
                IntOrString::Text(s) => {
                    let s = s.trim();
                    let digits = s.strip_prefix("0b").unwrap_or(s);
                    i64::from_str_radix(digits, 2)
                        .map_err(|_| Error::config(format!("scrambler_seed `{s}` is not binary")))?
                }
            };
            if !(1..=0x7f).contains(&value) {
                return Err(Error::config(format!(
                    "scrambler_seed must be a nonzero 7-bit word, got {value}"
                )));
            }
            cfg.scrambler_seed = value as u8;
        }
        if let Some(g) = self.generators {
            if g.iter().any(|&x| x == 0 || x > 0x7f) {
                return Err(Error::config("generators must be nonzero 7-bit tap masks"));
            }
            cfg.generators = [g[0] as u8, g[1] as u8];
        }
        if let Some(map) = self.subcarrier_map {
            cfg.subcarriers = match map {
                RawMap::Named(name) => match name.as_str() {
                    "standard" | "802.11a" => SubcarrierMap::standard(),
                    other => {
                        return Err(Error::config(format!("unknown subcarrier_map `{other}`")))
                    }
                },
                RawMap::Explicit {
                    data,
                    pilots,
                    pilot_values,
                } => {
                    let pilot_values = pilot_values.unwrap_or_else(|| vec![1.0; pilots.len()]);
                    SubcarrierMap {
                        data,
                        pilots,
                        pilot_values,
                    }
                }
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_is_802_11a() {
        let cfg = PhyConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_data(), 48);
        assert_eq!(cfg.n_cbps(), 288);
        assert_eq!(cfg.n_dbps(), 216);
        assert_eq!(cfg.samples_per_ofdm(), 80);
        // data + pilots + nulls cover the 64 bins exactly
        let nulls = 64 - cfg.n_data() - cfg.subcarriers.pilots.len();
        assert_eq!(nulls, 12);
    }

    #[test]
    fn every_rate_modulation_pair_validates() {
        for m in Modulation::ALL {
            for r in CodeRate::ALL {
                PhyConfig::new(m, r).unwrap();
            }
        }
    }

    #[test]
    fn zero_seed_rejected() {
        let cfg = PhyConfig {
            scrambler_seed: 0,
            ..PhyConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(PhyConfig::from_config_str("[phy]\nscrambler_seed = 0\n").is_err());
    }

    #[test]
    fn overlapping_subcarriers_rejected() {
        let mut cfg = PhyConfig::default();
        cfg.subcarriers.pilots[0] = cfg.subcarriers.data[0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn parse_config_file() {
        let cfg = PhyConfig::from_config_str(
            "# link settings\n[phy]\nfft_size = 64\ncp_len = 16\nmodulation = \"16qam\"\n\
             coding_rate = \"1/2\"\nscrambler_seed = \"1011101\"\nsubcarrier_map = \"standard\"\n",
        )
        .unwrap();
        assert_eq!(cfg.modulation, Modulation::Qam16);
        assert_eq!(cfg.code_rate, CodeRate::Half);
        assert_eq!(cfg.scrambler_seed, 0b1011101);
    }

    #[test]
    fn unknown_key_is_config_error() {
        let err = PhyConfig::from_config_str("[phy]\nfft_sise = 64\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn canonical_text_round_trips() {
        let cfg = PhyConfig::new(Modulation::Qpsk, CodeRate::FiveSixths).unwrap();
        let back = PhyConfig::from_config_str(&cfg.to_config_string()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.fingerprint(), back.fingerprint());
        assert_ne!(cfg.fingerprint(), PhyConfig::default().fingerprint());
    }
}
