//! Full-field binary dump.
//!
//! Little-endian layout:
//!
//! ```text
//! b"RBDS"  u32 version  u64 N  u64 P  u64 d  u64 l
//! Y   f64 [P][N+1]
//! Z   f64 [P][N+1][d]
//! dK  f64 [P][N+1]
//! ```

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::solver::SolutionField;

pub const MAGIC: &[u8; 4] = b"RBDS";
pub const VERSION: u32 = 1;

pub fn write_field<W: Write>(out: &mut W, field: &SolutionField, dim_b: usize) -> Result<()> {
    let (n, paths, d) = (field.steps(), field.paths(), field.dim_w());
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    for v in [n, paths, d, dim_b] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity((n + 1) * 8 * (d + 2));
    for p in 0..paths {
        buf.clear();
        for i in 0..=n {
            buf.extend_from_slice(&field.y(i, p).to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    for p in 0..paths {
        buf.clear();
        for i in 0..=n {
            for v in field.z(i, p) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.write_all(&buf)?;
    }
    for p in 0..paths {
        buf.clear();
        for i in 0..=n {
            buf.extend_from_slice(&field.dk(i, p).to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

/// Contents of a dump, path-major as stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub steps: usize,
    pub paths: usize,
    pub dim_w: usize,
    pub dim_b: usize,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub dk: Vec<f64>,
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> io::Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

pub fn read_field<R: Read>(r: &mut R) -> Result<FieldDump> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Shape("not an RBDS dump".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != VERSION {
        return Err(Error::Shape(format!("unsupported dump version {version}")));
    }
    let to_usize = |v: u64| usize::try_from(v).map_err(|_| Error::Shape("dimension overflows usize".into()));
    let steps = to_usize(read_u64(r)?)?;
    let paths = to_usize(read_u64(r)?)?;
    let dim_w = to_usize(read_u64(r)?)?;
    let dim_b = to_usize(read_u64(r)?)?;
    let nodes = (steps + 1)
        .checked_mul(paths)
        .ok_or_else(|| Error::Shape("dump dimensions overflow".into()))?;
    let y = read_f64s(r, nodes)?;
    let z = read_f64s(r, nodes * dim_w)?;
    let dk = read_f64s(r, nodes)?;
    Ok(FieldDump { steps, paths, dim_w, dim_b, y, z, dk })
}
