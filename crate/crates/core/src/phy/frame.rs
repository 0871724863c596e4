use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const FRAME_MAGIC: [u8; 4] = *b"BBFR";
pub const FRAME_VERSION: u32 = 1;

/// Complex baseband samples of a whole packet.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandFrame {
    pub samples: Vec<Complex64>,
    pub samples_per_ofdm: usize,
}

impl BasebandFrame {
    pub fn new(samples: Vec<Complex64>, samples_per_ofdm: usize) -> Result<Self> {
        if samples_per_ofdm == 0 || samples.len() % samples_per_ofdm != 0 {
            return Err(Error::framing(format!(
                "{} samples is not a whole number of {samples_per_ofdm}-sample OFDM symbols",
                samples.len()
            )));
        }
        Ok(BasebandFrame {
            samples,
            samples_per_ofdm,
        })
    }

    pub fn ofdm_symbol_count(&self) -> usize {
        self.samples.len() / self.samples_per_ofdm
    }

    pub fn symbol(&self, n: usize) -> &[Complex64] {
        &self.samples[n * self.samples_per_ofdm..(n + 1) * self.samples_per_ofdm]
    }

    /// Mean of `|x|^2` over all samples (0 for an empty frame).
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// Writes `magic | version u32 | count u64 | (re f64, im f64)*`, little-endian.
pub fn write_frame<W: Write>(mut w: W, samples: &[Complex64]) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 16 * samples.len());
    buf.extend_from_slice(&FRAME_MAGIC);
    buf.extend_from_slice(&FRAME_VERSION.to_le_bytes());
    buf.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for z in samples {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_frame<R: Read>(mut r: R) -> Result<Vec<Complex64>> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| Error::Format("frame header truncated".into()))?;
    if header[..4] != FRAME_MAGIC {
        return Err(Error::Format("bad frame magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FRAME_VERSION {
        return Err(Error::Format(format!("unsupported frame version {version}")));
    }
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != count * 16 {
        return Err(Error::Format(format!(
            "frame declares {count} samples but carries {} bytes",
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mut buf = vec![];
        write_frame(&mut buf, &[Complex64::new(1.0, -2.0)]).unwrap();
        assert_eq!(&buf[..4], b"BBFR");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), -2.0);
        assert_eq!(buf.len(), 32);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let mut buf = vec![];
        write_frame(&mut buf, &[Complex64::new(1.0, 0.0); 3]).unwrap();
        assert!(read_frame(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_frame(&bad[..]).is_err());
        assert!(read_frame(&buf[..10]).is_err());
    }

    #[test]
    fn frame_length_must_be_whole_symbols() {
        assert!(BasebandFrame::new(vec![Complex64::new(0.0, 0.0); 159], 80).is_err());
        let f = BasebandFrame::new(vec![Complex64::new(0.0, 0.0); 240], 80).unwrap();
        assert_eq!(f.ofdm_symbol_count(), 3);
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(v in proptest::collection::vec((any::<f64>(), any::<f64>()), 0..50)) {
            let samples: Vec<Complex64> = v.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let mut buf = vec![];
            write_frame(&mut buf, &samples).unwrap();
            let back = read_frame(&buf[..]).unwrap();
            prop_assert_eq!(back.len(), samples.len());
            for (x, y) in back.iter().zip(&samples) {
                prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
                prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }
}
