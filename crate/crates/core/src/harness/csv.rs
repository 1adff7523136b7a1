//! CSV output of sweep results: one row per SNR point, byte-deterministic
//! for a given record list.

use super::MetricRecord;
use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

pub const CSV_HEADER: &str = "snr_db,ber,ser,spectral_efficiency,bits,trials,seed";

/// Writes records to any sink.
pub fn write_csv(records: &[MetricRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.snr_db, r.ber, r.ser, r.spectral_efficiency, r.counts.bits, r.trials_run, r.seed
        )?;
    }
    Ok(())
}

/// Writes records to a file, creating or truncating it.
pub fn emit_csv(records: &[MetricRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_csv(records, &mut buf).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, buf).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
