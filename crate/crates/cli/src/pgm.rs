//! Binary PGM (P5) image output for spectrogram previews.

use std::fs;
use std::path::Path;

use crate::CliError;

/// Write a matrix as an 8-bit grayscale PGM, min-max scaled per image.
/// Row 0 (mel bin 0) is the top image row; a constant matrix maps to black.
pub fn write_pgm(path: &Path, rows: usize, cols: usize, values: &[f64]) -> Result<(), CliError> {
    assert_eq!(rows * cols, values.len());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    let mut bytes = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    bytes.reserve(values.len());
    for &v in values {
        let px = if span > 0.0 {
            ((v - lo) / span * 255.0).round() as u8
        } else {
            0
        };
        bytes.push(px);
    }
    fs::write(path, bytes)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// Parse a P5 PGM back into (rows, cols, pixels); test and tooling helper.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>), CliError> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let header_err = || CliError::Input(format!("{}: malformed PGM header", path.display()));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| header_err())?);
    }
    if fields.len() != 4 || fields[0] != "P5" || fields[3] != "255" {
        return Err(header_err());
    }
    let cols: usize = fields[1].parse().map_err(|_| header_err())?;
    let rows: usize = fields[2].parse().map_err(|_| header_err())?;
    pos += 1; // single whitespace after maxval
    let pixels = bytes[pos..].to_vec();
    if pixels.len() != rows * cols {
        return Err(CliError::Input(format!(
            "{}: expected {} pixels, found {}",
            path.display(),
            rows * cols,
            pixels.len()
        )));
    }
    Ok((rows, cols, pixels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        write_pgm(&path, 2, 3, &[0.0, 0.5, 1.0, 1.0, 0.25, 0.75]).unwrap();
        let (rows, cols, px) = read_pgm(&path).unwrap();
        assert_eq!((rows, cols), (2, 3));
        assert_eq!(px, vec![0, 128, 255, 255, 64, 191]);
    }

    #[test]
    fn constant_image_is_black() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        write_pgm(&path, 1, 4, &[3.0; 4]).unwrap();
        let (_, _, px) = read_pgm(&path).unwrap();
        assert_eq!(px, vec![0; 4]);
    }
}
