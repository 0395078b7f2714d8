//! File writers: CSV with fixed 17-significant-digit formatting, binary PGM
//! heatmaps, and JSON manifests.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Shortest fixed form of a real with 17 significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Streaming CSV table with CRLF line endings.
pub struct CsvTable {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
    rows: usize,
}

impl CsvTable {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(BufWriter::new(file));
        writer.write_record(header).map_err(|e| csv_error(path, e))?;
        Ok(CsvTable {
            path: path.to_owned(),
            writer,
            rows: 0,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.rows += 1;
        self.writer.write_record(fields).map_err(|e| csv_error(&self.path, e))
    }

    /// Flushes and returns the number of data rows written.
    pub fn finish(mut self) -> Result<usize> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.rows)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// 8-bit binary PGM of a row-major `width × height` field, scaled so the
/// maximum maps to 255. Row 0 is the top of the image.
pub fn write_pgm(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    assert_eq!(values.len(), width * height, "PGM buffer size mismatch");
    let max = values.iter().copied().fold(0.0, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend(values.iter().map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8));
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_carry_seventeen_digits() {
        assert_eq!(real(1.0), "1.0000000000000000e0");
        assert_eq!(real(0.1), "1.0000000000000001e-1");
        assert_eq!(real(-2.5e-300), "-2.5000000000000000e-300");
        for x in [std::f64::consts::PI, 1.0 / 3.0, 6.02214076e23, -1e-17] {
            assert_eq!(real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_uses_crlf() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = CsvTable::create(&path, &["a", "b"]).unwrap();
        t.row([real(1.5), "x".to_string()]).unwrap();
        assert_eq!(t.finish().unwrap(), 1);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\r\n1.5000000000000000e0,x\r\n");
    }

    #[test]
    fn pgm_header_and_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        write_pgm(&path, 3, 1, &[0.0, 0.5, 2.0]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..11], b"P5\n3 1\n255\n");
        assert_eq!(&bytes[11..], &[0, 64, 255]);
    }
}
