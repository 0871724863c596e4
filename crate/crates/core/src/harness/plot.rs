use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::sweep::MetricRow;
use crate::error::{Error, Result};

pub const PLOT_CSV: &str = "plotdata.csv";

/// Writes `<system>.dat` per system (lines of `snr mse stderr`, in table
/// order) and a combined `plotdata.csv`. Returns the files written.
pub fn emit_plotdata(rows: &[MetricRow], dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::config("no rows to plot"));
    }
    fs::create_dir_all(dir)?;
    let mut systems: Vec<&str> = Vec::new();
    for r in rows {
        if !systems.contains(&r.system.as_str()) {
            systems.push(&r.system);
        }
    }
    let mut written = Vec::new();
    let mut combined = String::from("system,snr_db,mse,stderr\n");
    for system in systems {
        let mut series = String::new();
        for r in rows.iter().filter(|r| r.system == system) {
            writeln!(series, "{} {} {}", r.snr_db, r.symbol_mse, r.stderr).expect("string write");
            writeln!(combined, "{},{},{},{}", system, r.snr_db, r.symbol_mse, r.stderr).expect("string write");
        }
        let path = dir.join(format!("{system}.dat"));
        fs::write(&path, series)?;
        written.push(path);
    }
    let path = dir.join(PLOT_CSV);
    fs::write(&path, combined)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<MetricRow> {
        let mut out = Vec::new();
        for system in ["ideal-analog", "emulated", "float-serialization", "zero-shot"] {
            for i in 0..9 {
                out.push(MetricRow {
                    system: system.into(),
                    snr_db: -5.0 + 5.0 * i as f64,
                    symbol_mse: 1.0 / (i + 1) as f64,
                    image_mse: None,
                    evm_percent: 1.0,
                    ber: None,
                    n: 10,
                    seed: i,
                    stderr: 0.01,
                });
            }
        }
        out
    }

    #[test]
    fn one_series_per_system() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plotdata(&rows(), dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        for f in &files[..4] {
            let text = fs::read_to_string(f).unwrap();
            assert_eq!(text.lines().count(), 9);
            assert!(text.lines().all(|l| l.split_whitespace().count() == 3));
        }
        let first: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();
        emit_plotdata(&rows(), dir.path()).unwrap();
        let again: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();
        assert_eq!(first, again);
        assert_eq!(fs::read_to_string(&files[4]).unwrap().lines().count(), 37);
    }

    #[test]
    fn empty_table_and_unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_plotdata(&[], dir.path()).is_err());
        let file = dir.path().join("plain");
        fs::write(&file, b"x").unwrap();
        assert!(matches!(emit_plotdata(&rows(), &file), Err(Error::Io(_))));
    }
}
