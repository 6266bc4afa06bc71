//! Raw tensor files and PNM previews.
//!
//! Tensors are stored as little-endian `f32` in row-major `(d0, d1, d2, d3)`
//! order. The shape lives in a one-line sidecar next to the data file
//! (`<path>.shape`) holding the four dimensions separated by spaces.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array4, ArrayView3};

use crate::error::{Error, Result};

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".shape");
    PathBuf::from(s)
}

pub fn encode_f32(data: &Array4<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * 4);
    for v in data.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn shape_line(shape: &[usize]) -> String {
    let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
    format!("{}\n", dims.join(" "))
}

pub fn parse_shape_line(line: &str) -> Result<[usize; 4]> {
    let dims: Vec<usize> = line
        .split_whitespace()
        .map(|d| d.parse().map_err(|_| Error::Format(format!("bad shape entry {d:?}"))))
        .collect::<Result<_>>()?;
    <[usize; 4]>::try_from(dims).map_err(|d| Error::Format(format!("expected 4 dimensions, found {}", d.len())))
}

pub fn decode_f32(bytes: &[u8], shape: [usize; 4]) -> Result<Array4<f64>> {
    let n: usize = shape.iter().product();
    if bytes.len() != n * 4 {
        return Err(Error::Format(format!("expected {} bytes for shape {shape:?}, found {}", n * 4, bytes.len())));
    }
    let values: Vec<f64> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    Array4::from_shape_vec(shape, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_tensor(path: &Path, data: &Array4<f64>) -> Result<()> {
    fs::write(path, encode_f32(data))?;
    fs::write(sidecar_path(path), shape_line(data.shape()))?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Array4<f64>> {
    let header = fs::read_to_string(sidecar_path(path))?;
    let shape = parse_shape_line(header.lines().next().unwrap_or(""))?;
    decode_f32(&fs::read(path)?, shape)
}

/// Binary PGM (one channel) or PPM (three channels) of a `C x H x W` frame,
/// clamped to `[0, 1]`.
pub fn encode_pnm(frame: ArrayView3<'_, f64>) -> Result<Vec<u8>> {
    let (c, h, w) = frame.dim();
    let magic = match c {
        1 => "P5",
        3 => "P6",
        _ => return Err(Error::Shape(format!("PNM needs 1 or 3 channels, got {c}"))),
    };
    let mut out = Vec::with_capacity(h * w * c + 20);
    write!(out, "{magic}\n{w} {h}\n255\n")?;
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                out.push((frame[[ch, y, x]].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    Ok(out)
}
