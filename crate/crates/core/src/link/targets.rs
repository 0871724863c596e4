use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phy::{Constellation, Modulation};

/// Scale putting ±3 per-axis standard deviations of a unit-power complex
/// symbol on the outermost constellation level.
pub fn default_scale(modulation: Modulation) -> f64 {
    Constellation::new(modulation).max_amplitude() * std::f64::consts::SQRT_2 / 3.0
}

/// Continuous complex symbols to emulate, in the unit-power domain, with the
/// factor mapping them onto the constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSymbols {
    pub symbols: Vec<Complex64>,
    pub scale: f64,
}

impl TargetSymbols {
    pub fn new(symbols: Vec<Complex64>, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::config(format!("scale must be positive and finite, got {scale}")));
        }
        if let Some(i) = symbols.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Shape(format!("target symbol {i} is not finite")));
        }
        Ok(TargetSymbols { symbols, scale })
    }

    pub fn with_default_scale(symbols: Vec<Complex64>, modulation: Modulation) -> Result<Self> {
        Self::new(symbols, default_scale(modulation))
    }

    /// Pairs consecutive reals into complex symbols: `(z0 + j z1, z2 + j z3, ...)`.
    pub fn pair_reals(z: &[f64]) -> Result<Vec<Complex64>> {
        if z.len() % 2 != 0 {
            return Err(Error::Shape(format!("odd latent length {}", z.len())));
        }
        Ok(z.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.symbols)
    }
}

pub(crate) fn mean_power(z: &[Complex64]) -> f64 {
    if z.is_empty() {
        0.0
    } else {
        z.iter().map(|v| v.norm_sqr()).sum::<f64>() / z.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing() {
        let s = TargetSymbols::pair_reals(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s, vec![Complex64::new(1.0, 2.0), Complex64::new(3.0, 4.0)]);
        assert!(TargetSymbols::pair_reals(&[1.0]).is_err());
    }

    #[test]
    fn default_scale_64qam() {
        // Outer level 7/sqrt(42) equals 3/sqrt(2) after scaling.
        let s = default_scale(Modulation::Qam64);
        assert!((s * 3.0 / 2f64.sqrt() - 7.0 / 42f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(TargetSymbols::new(vec![], 0.0).is_err());
        assert!(TargetSymbols::new(vec![Complex64::new(f64::NAN, 0.0)], 1.0).is_err());
    }
}
