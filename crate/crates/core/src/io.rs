//! File formats: plain-text matrices and vectors, raw little-endian `f64`, PGM images.
//!
//! The text matrix format is a `rows cols` header followed by one line per
//! row of whitespace-separated values. Blank lines and lines starting with
//! `#` are ignored. Values are written in Rust's shortest round-trip form so a
//! read-back is bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn data_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .flat_map(str::split_whitespace)
}

fn parse_f64(tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: {tok:?}")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite value {tok:?}")));
    }
    Ok(v)
}

pub fn parse_matrix_text(text: &str) -> Result<DMatrix<f64>> {
    let mut toks = data_tokens(text);
    let mut dim = |what: &str| -> Result<usize> {
        toks.next()
            .ok_or_else(|| Error::Parse(format!("missing {what} in matrix header")))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad {what} in matrix header")))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let values: Vec<f64> = toks.map(parse_f64).collect::<Result<_>>()?;
    if values.len() != rows * cols {
        return Err(Error::Parse(format!(
            "matrix header says {rows}x{cols} but {} values follow",
            values.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn format_matrix_text(a: &DMatrix<f64>) -> String {
    let mut s = format!("{} {}\n", a.nrows(), a.ncols());
    for row in a.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn read_matrix_text(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix_text(&fs::read_to_string(path)?)
}

pub fn write_matrix_text(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    fs::write(path, format_matrix_text(a))?;
    Ok(())
}

/// Reads a vector: raw little-endian `f64` for `.f64`/`.raw`/`.bin` files,
/// whitespace-separated text otherwise.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    if is_raw(path) {
        read_raw_f64(path)
    } else {
        let text = fs::read_to_string(path)?;
        let v: Vec<f64> = data_tokens(&text).map(parse_f64).collect::<Result<_>>()?;
        Ok(DVector::from_vec(v))
    }
}

/// Writes a vector in the format implied by the extension (see [`read_vector`]).
pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    if is_raw(path) {
        write_raw_f64(path, v.as_slice())
    } else {
        let mut s = String::with_capacity(v.len() * 20);
        for x in v.iter() {
            s.push_str(&x.to_string());
            s.push('\n');
        }
        fs::write(path, s)?;
        Ok(())
    }
}

fn is_raw(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("f64") | Some("raw") | Some("bin")
    )
}

pub fn f64_to_le_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn f64_from_le_bytes(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse(format!(
            "raw f64 data length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    let v: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parse("non-finite value in raw f64 data".into()));
    }
    Ok(v)
}

pub fn read_raw_f64(path: &Path) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(f64_from_le_bytes(&fs::read(path)?)?))
}

pub fn write_raw_f64(path: &Path, values: &[f64]) -> Result<()> {
    fs::write(path, f64_to_le_bytes(values))?;
    Ok(())
}

/// Binary PGM (`P5`) of a row-major `width × height` image, mapping
/// `[lo, hi]` linearly onto the full grey range and clamping outside it.
pub fn write_pgm(
    path: &Path,
    pixels: &[f64],
    width: usize,
    height: usize,
    range: (f64, f64),
    sixteen_bit: bool,
) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::InvalidArgument(format!(
            "image has {} pixels, expected {width}x{height}",
            pixels.len()
        )));
    }
    let maxval: u32 = if sixteen_bit { 65535 } else { 255 };
    let (lo, hi) = range;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = Vec::with_capacity(pixels.len() * 2 + 32);
    write!(out, "P5\n{width} {height}\n{maxval}\n")?;
    for &p in pixels {
        let q = (((p - lo) / span).clamp(0.0, 1.0) * maxval as f64).round() as u32;
        if sixteen_bit {
            out.extend_from_slice(&(q as u16).to_be_bytes());
        } else {
            out.push(q as u8);
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a binary PGM, returning `(width, height, maxval, samples)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, u32, Vec<u32>)> {
    let bytes = fs::read(path)?;
    let mut pos = 0;
    let mut header = Vec::new();
    while header.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if header[0] != "P5" {
        return Err(Error::Parse(format!("unsupported PGM magic {:?}", header[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad PGM field {s:?}")));
    let (w, h, maxval) = (num(&header[1])?, num(&header[2])?, num(&header[3])? as u32);
    let wide = maxval > 255;
    let need = w * h * if wide { 2 } else { 1 };
    let data = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::Parse("truncated PGM data".into()))?;
    let samples = if wide {
        data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).collect()
    } else {
        data.iter().map(|&b| b as u32).collect()
    };
    Ok((w, h, maxval, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_text_round_trip_is_exact() {
        let a = DMatrix::from_fn(3, 4, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0));
        let back = parse_matrix_text(&format_matrix_text(&a)).unwrap();
        assert_eq!(a, back);
        let with_comments = "# a comment\n2 2\n1 2\n\n3 4\n";
        assert_eq!(parse_matrix_text(with_comments).unwrap(), nalgebra::dmatrix![1.0, 2.0; 3.0, 4.0]);
        assert!(parse_matrix_text("2 2\n1 2 3\n").is_err());
        assert!(parse_matrix_text("1 1\nnan\n").is_err());
    }

    #[test]
    fn vectors_and_images_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let v = DVector::from_vec(vec![0.1, -2.5, 1e-300, 3.0]);
        for name in ["v.txt", "v.f64"] {
            let p = dir.path().join(name);
            write_vector(&p, &v).unwrap();
            assert_eq!(read_vector(&p).unwrap(), v);
        }
        let img = [0.0, 0.5, 1.0, 2.0, -1.0, 0.25];
        for sixteen in [false, true] {
            let p = dir.path().join("i.pgm");
            write_pgm(&p, &img, 3, 2, (0.0, 1.0), sixteen).unwrap();
            let (w, h, maxval, s) = read_pgm(&p).unwrap();
            assert_eq!((w, h), (3, 2));
            assert_eq!(s[2], maxval);
            assert_eq!(s[3], maxval);
            assert_eq!(s[4], 0);
        }
    }
}
