//! `E2FM` parameter container: the magic bytes followed by named `f64`
//! arrays, each stored as
//! `u32 name_len | name (utf-8) | u32 rank | u64 dims[rank] | f64 data[..]`,
//! all little-endian, until end of file.

use std::io::{Read, Write};

use super::toy::{Arch, ToyDenoiser};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"E2FM";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedArray {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if dims.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!("array {name}: dims {dims:?} do not match {} values", data.len())));
        }
        Ok(Self { name, dims, data })
    }

    pub fn scalar(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), dims: vec![1], data: vec![value] }
    }
}

pub fn write_container<W: Write>(arrays: &[NamedArray], mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    for a in arrays {
        let name = a.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(a.dims.len() as u32).to_le_bytes())?;
        for d in &a.dims {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in &a.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format(format!("container truncated at byte {}", self.pos)));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_container<R: Read>(mut r: R) -> Result<Vec<NamedArray>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < 4 || &buf[..4] != MAGIC {
        return Err(Error::Format("missing E2FM magic".into()));
    }
    let mut cur = Cursor { buf: &buf, pos: 4 };
    let mut arrays = Vec::new();
    while cur.pos < buf.len() {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?).map_err(|e| Error::Format(e.to_string()))?.to_string();
        let rank = cur.u32()? as usize;
        let dims = (0..rank).map(|_| cur.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let data = cur.take(n.checked_mul(8).ok_or_else(|| Error::Format("array too large".into()))?)?;
        let data = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        arrays.push(NamedArray { name, dims, data });
    }
    Ok(arrays)
}

fn find<'a>(arrays: &'a [NamedArray], name: &str) -> Result<&'a NamedArray> {
    arrays.iter().find(|a| a.name == name).ok_or_else(|| Error::Format(format!("missing array {name}")))
}

impl ToyDenoiser {
    pub fn to_arrays(&self) -> Vec<NamedArray> {
        let hidden = match self.arch() {
            Arch::Affine => 0,
            Arch::Mlp { hidden } => hidden,
        };
        let mut out = vec![
            NamedArray::scalar("meta.channels", self.channels() as f64),
            NamedArray::scalar("meta.hidden", hidden as f64),
            NamedArray::scalar("meta.sigma_data", self.sigma_data()),
            NamedArray::scalar("meta.event_scale", self.event_scale()),
        ];
        for (name, dims, data) in self.param_blocks() {
            out.push(NamedArray { name: format!("denoiser.{name}"), dims, data });
        }
        out
    }

    pub fn from_arrays(arrays: &[NamedArray]) -> Result<Self> {
        let scalar = |name: &str| -> Result<f64> { Ok(find(arrays, name)?.data.first().copied().unwrap_or(f64::NAN)) };
        let channels = scalar("meta.channels")? as usize;
        let hidden = scalar("meta.hidden")? as usize;
        let arch = if hidden == 0 { Arch::Affine } else { Arch::Mlp { hidden } };
        let mut params = find(arrays, "denoiser.linear")?.data.clone();
        if hidden > 0 {
            for name in ["denoiser.hidden.weight", "denoiser.hidden.bias", "denoiser.output.weight"] {
                params.extend_from_slice(&find(arrays, name)?.data);
            }
        }
        ToyDenoiser::from_params(arch, channels, scalar("meta.sigma_data")?, scalar("meta.event_scale")?, params)
    }
}
