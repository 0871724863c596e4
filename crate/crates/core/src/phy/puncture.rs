//! Puncturing of the rate-1/2 mother code up to rates 2/3, 3/4 and 5/6.

use super::config::CodeRate;
use crate::error::{Error, Result};

/// Keep-mask over one puncturing period of the mother stream `A0 B0 A1 B1 ...`.
pub fn pattern(rate: CodeRate) -> &'static [bool] {
    const T: bool = true;
    const F: bool = false;
    match rate {
        CodeRate::Half => &[T, T],
        // A0 B0 A1 (B1 stolen)
        CodeRate::TwoThirds => &[T, T, T, F],
        // A0 B0 A1 B2 (B1, A2 stolen)
        CodeRate::ThreeQuarters => &[T, T, T, F, F, T],
        // A0 B0 A1 B2 A3 B4
        CodeRate::FiveSixths => &[T, T, T, F, F, T, T, F, F, T],
    }
}

/// Positions within `len` mother bits that survive puncturing, in order.
pub fn kept_positions(rate: CodeRate, len: usize) -> Vec<usize> {
    let pat = pattern(rate);
    (0..len).filter(|i| pat[i % pat.len()]).collect()
}

fn check_len(rate: CodeRate, len: usize) -> Result<()> {
    let period = pattern(rate).len();
    if len % period != 0 {
        return Err(Error::framing(format!(
            "{len} mother bits is not a multiple of the rate {rate} puncturing period {period}"
        )));
    }
    Ok(())
}

pub fn puncture(coded: &[u8], rate: CodeRate) -> Result<Vec<u8>> {
    check_len(rate, coded.len())?;
    let pat = pattern(rate);
    Ok(coded
        .iter()
        .zip(pat.iter().cycle())
        .filter_map(|(&b, &keep)| keep.then_some(b))
        .collect())
}

/// Re-inserts erasures (`None`) where bits were removed.
pub fn depuncture(punctured: &[u8], rate: CodeRate) -> Result<Vec<Option<u8>>> {
    let pat = pattern(rate);
    let kept_per_period = pat.iter().filter(|&&k| k).count();
    if punctured.len() % kept_per_period != 0 {
        return Err(Error::framing(format!(
            "{} punctured bits is not a multiple of {kept_per_period} for rate {rate}",
            punctured.len()
        )));
    }
    let periods = punctured.len() / kept_per_period;
    let mut out = Vec::with_capacity(periods * pat.len());
    let mut it = punctured.iter();
    for _ in 0..periods {
        for &keep in pat {
            out.push(if keep { it.next().copied() } else { None });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn half_rate_is_identity() {
        let c = [1, 0, 1, 1, 0, 0];
        assert_eq!(puncture(&c, CodeRate::Half).unwrap(), c);
    }

    #[test]
    fn three_quarters_keeps_four_of_six() {
        let c: Vec<u8> = (0..18).map(|i| (i % 2) as u8).collect();
        assert_eq!(puncture(&c, CodeRate::ThreeQuarters).unwrap().len(), 12);
    }

    #[test]
    fn rates_match_kept_fraction() {
        for r in CodeRate::ALL {
            let pat = pattern(r);
            let kept = pat.iter().filter(|&&k| k).count();
            // info bits per period = period / 2; kept coded bits = info / R
            assert_eq!(kept * r.numerator(), pat.len() / 2 * r.denominator());
        }
    }

    #[test]
    fn bad_length_is_framing_error() {
        assert!(matches!(
            puncture(&[0; 7], CodeRate::ThreeQuarters),
            Err(Error::Framing(_))
        ));
    }

    #[test]
    fn erasures_exactly_at_removed_indices() {
        let c: Vec<u8> = (0..18).map(|i| ((i * 7) % 3 == 0) as u8).collect();
        let d = depuncture(&puncture(&c, CodeRate::ThreeQuarters).unwrap(), CodeRate::ThreeQuarters)
            .unwrap();
        assert_eq!(d.len(), 18);
        for (i, v) in d.iter().enumerate() {
            match i % 6 {
                3 | 4 => assert_eq!(*v, None),
                _ => assert_eq!(*v, Some(c[i])),
            }
        }
    }

    proptest! {
        #[test]
        fn depuncture_restores_kept_bits(periods in 1usize..40, seed in any::<u64>(), ri in 0usize..4) {
            let rate = CodeRate::ALL[ri];
            let len = periods * pattern(rate).len();
            let c: Vec<u8> = (0..len).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
            let d = depuncture(&puncture(&c, rate).unwrap(), rate).unwrap();
            prop_assert_eq!(d.len(), c.len());
            for (i, v) in d.iter().enumerate() {
                if let Some(b) = v { prop_assert_eq!(*b, c[i]); }
            }
        }
    }
}
