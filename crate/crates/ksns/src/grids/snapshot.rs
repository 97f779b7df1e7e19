//! Binary field snapshots.
//!
//! Layout, all little-endian:
//! `b"BLLB"`, version `u32`, grid kind `u8`, dimension count `u32`, dimensions
//! `u64 × count`, parameter count `u32`, parameters `f64 × count`, then the
//! samples as row-major `f64`.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BLLB";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Radial = 0,
    Box = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub kind: GridKind,
    pub dims: Vec<u64>,
    /// Radial: `[map_scale, r_max, tau]`. Box: `[half_width, tau]`.
    pub params: Vec<f64>,
    pub data: Vec<f64>,
}

impl Snapshot {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let expected: u64 = self.dims.iter().product();
        if expected != self.data.len() as u64 {
            return Err(Error::InvalidArgument(format!(
                "snapshot dims {:?} do not match {} samples",
                self.dims,
                self.data.len()
            )));
        }
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.kind as u8])?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for d in &self.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        w.write_all(&(self.params.len() as u32).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::InvalidArgument("not a BLLB snapshot".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::InvalidArgument(format!("unsupported snapshot version {version}")));
        }
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind)?;
        let kind = match kind[0] {
            0 => GridKind::Radial,
            1 => GridKind::Box,
            k => return Err(Error::InvalidArgument(format!("unknown grid kind {k}"))),
        };
        let nd = read_u32(r)? as usize;
        let dims = (0..nd).map(|_| read_u64(r)).collect::<Result<Vec<_>>>()?;
        let np = read_u32(r)? as usize;
        let params = (0..np).map(|_| read_u64(r).map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
        let len: u64 = dims.iter().product();
        let data = (0..len).map(|_| read_u64(r).map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, dims, params, data })
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
