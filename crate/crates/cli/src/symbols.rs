use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use jscc_ofdm::{Complex64, Error, Result};

/// Reads `re im` pairs, one per line. Blank lines and `#` comments are skipped.
pub fn read_symbols(path: &Path) -> Result<Vec<Complex64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_symbols(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn parse_symbols(text: &str) -> std::result::Result<Vec<Complex64>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", i + 1))?;
        match v[..] {
            [re, im] if re.is_finite() && im.is_finite() => out.push(Complex64::new(re, im)),
            _ => return Err(format!("line {}: expected two finite numbers", i + 1)),
        }
    }
    if out.is_empty() {
        return Err("no symbols".into());
    }
    Ok(out)
}

pub fn write_symbols(path: &Path, symbols: &[Complex64]) -> Result<()> {
    let mut text = String::with_capacity(symbols.len() * 48);
    for z in symbols {
        writeln!(text, "{:.17e} {:.17e}", z.re, z.im).expect("writing to a String");
    }
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.txt");
        let z = vec![Complex64::new(0.1, -1.0 / 3.0), Complex64::new(-2.5e-9, 7.0)];
        write_symbols(&p, &z).unwrap();
        assert_eq!(read_symbols(&p).unwrap(), z);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_symbols("1 2\n# note\n\n3 4 # tail\n").is_ok());
        assert!(parse_symbols("1\n").is_err());
        assert!(parse_symbols("1 x\n").is_err());
        assert!(parse_symbols("nan 0\n").is_err());
        assert!(parse_symbols("# only\n").is_err());
    }
}
