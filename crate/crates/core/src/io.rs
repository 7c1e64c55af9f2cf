//! File ingestion: PGM images (P2 ASCII and P5 binary, maxval up to
//! 65535) and CSV point clouds with columns `x1..xD[,w]`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, GrayscaleImage};
use crate::real::Real;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Reads a PGM image and scales gray levels to [0, 1].
pub fn read_pgm<T: Real>(path: impl AsRef<Path>) -> Result<GrayscaleImage<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    parse_pgm(&bytes).map_err(|msg| parse_err(path, msg))
}

/// Parses PGM bytes (P2 or P5). Exposed for tests and in-memory use.
pub fn parse_pgm<T: Real>(bytes: &[u8]) -> std::result::Result<GrayscaleImage<T>, String> {
    let mut pos = 0usize;

    // Header tokens are whitespace-separated; '#' starts a comment that
    // runs to end of line.
    let next_token = |pos: &mut usize| -> std::result::Result<String, String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err("unexpected end of file in header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };

    let magic = next_token(&mut pos)?;
    if magic != "P2" && magic != "P5" {
        return Err(format!("unsupported PGM magic '{magic}' (want P2 or P5)"));
    }
    let cols: usize = next_token(&mut pos)?
        .parse()
        .map_err(|_| "bad width".to_string())?;
    let rows: usize = next_token(&mut pos)?
        .parse()
        .map_err(|_| "bad height".to_string())?;
    let maxval: u32 = next_token(&mut pos)?
        .parse()
        .map_err(|_| "bad maxval".to_string())?;
    if maxval == 0 || maxval > 65_535 {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    let npix = rows
        .checked_mul(cols)
        .ok_or_else(|| "image size overflow".to_string())?;

    let scale = T::one() / T::of(maxval);
    let mut pixels = Vec::with_capacity(npix);
    if magic == "P2" {
        for _ in 0..npix {
            let v: u32 = next_token(&mut pos)?
                .parse()
                .map_err(|_| "bad pixel value".to_string())?;
            if v > maxval {
                return Err(format!("pixel value {v} exceeds maxval {maxval}"));
            }
            pixels.push(T::of(v) * scale);
        }
    } else {
        // P5: exactly one whitespace byte after maxval, then raster data.
        pos += 1;
        let bytes_per = if maxval < 256 { 1 } else { 2 };
        let need = npix * bytes_per;
        if bytes.len() < pos + need {
            return Err(format!(
                "raster truncated: need {need} bytes, have {}",
                bytes.len().saturating_sub(pos)
            ));
        }
        for i in 0..npix {
            let v = if bytes_per == 1 {
                bytes[pos + i] as u32
            } else {
                // two-byte samples are big-endian
                u32::from(bytes[pos + 2 * i]) << 8 | u32::from(bytes[pos + 2 * i + 1])
            };
            if v > maxval {
                return Err(format!("pixel value {v} exceeds maxval {maxval}"));
            }
            pixels.push(T::of(v) * scale);
        }
    }

    GrayscaleImage::new(rows, cols, pixels).map_err(|e| e.to_string())
}

/// Reads a PGM image and normalizes it to a measure on [0, 1]^2.
pub fn measure_from_pgm_path<T: Real>(path: impl AsRef<Path>) -> Result<DiscreteMeasure<T>> {
    let img = read_pgm(path)?;
    crate::measures::measure_from_image(&img)
}

/// Reads a CSV point cloud as a discrete measure.
///
/// One row per atom. An optional header names the columns; a column named
/// `w` or `weight` supplies weights, otherwise atoms are uniform. Without
/// a header every column is a coordinate (1 to 3 of them) and weights are
/// uniform, so weighted files need the header.
pub fn read_csv_measure<T: Real>(path: impl AsRef<Path>) -> Result<DiscreteMeasure<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_csv_measure(&text).map_err(|msg| parse_err(path, msg))
}

/// Parses CSV text; see [`read_csv_measure`].
pub fn parse_csv_measure<T: Real>(text: &str) -> std::result::Result<DiscreteMeasure<T>, String> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .peekable();

    let first = *lines.peek().ok_or("no data rows")?;
    let first_fields: Vec<&str> = first.split(',').map(str::trim).collect();
    let is_header = first_fields.iter().any(|f| f.parse::<f64>().is_err());

    let (dim, weight_col) = if is_header {
        let names: Vec<String> = first_fields.iter().map(|f| f.to_lowercase()).collect();
        lines.next();
        let weight_col = names
            .iter()
            .position(|n| n == "w" || n == "weight" || n == "p");
        let dim = names.len() - usize::from(weight_col.is_some());
        (dim, weight_col)
    } else {
        (first_fields.len(), None)
    };
    if !(1..=3).contains(&dim) {
        return Err(format!("{dim} coordinate columns; supported dimensions are 1..=3"));
    }

    let expected_cols = dim + usize::from(weight_col.is_some());
    let mut coords: Vec<T> = Vec::new();
    let mut weights: Vec<T> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != expected_cols {
            return Err(format!(
                "row {}: expected {expected_cols} columns, found {}",
                idx + 1,
                fields.len()
            ));
        }
        for (col, field) in fields.iter().enumerate() {
            let value: f64 = field
                .parse()
                .map_err(|_| format!("row {}: bad number '{field}'", idx + 1))?;
            if Some(col) == weight_col {
                weights.push(T::of(value));
            } else {
                coords.push(T::of(value));
            }
        }
    }
    if coords.is_empty() {
        return Err("no data rows".into());
    }

    let n = coords.len() / dim;
    if weight_col.is_some() {
        DiscreteMeasure::new(dim, coords, weights).map_err(|e| e.to_string())
    } else {
        let w = T::one() / T::of(n);
        DiscreteMeasure::new(dim, coords, vec![w; n]).map_err(|e| e.to_string())
    }
}

/// Serializes a measure back to CSV with a header, for round trips and
/// tooling.
pub fn measure_to_csv<T: Real>(m: &DiscreteMeasure<T>) -> String {
    let mut out = String::new();
    for d in 0..m.dim() {
        out.push_str(&format!("x{},", d + 1));
    }
    out.push_str("w\n");
    for i in 0..m.len() {
        for &c in m.point(i) {
            out.push_str(&format!("{c:.17e},"));
        }
        out.push_str(&format!("{:.17e}\n", m.weights()[i]));
    }
    out
}
