//! Raw sample dump.
//!
//! Layout, all little-endian:
//!
//! ```text
//! header (32 bytes)
//!   0  [u8; 8]  magic "NHSSBRAW"
//!   8  u32      format version (1)
//!  12  u32      L
//!  16  u64      number of records
//!  24  f64      beta
//! record (56 bytes)
//!   0  f64 m
//!   8  f64 E_J
//!  16  f64 E_f
//!  24  f64 dE_f/dβ
//!  32  f64 Re⟨v⟩
//!  40  f64 Im⟨v⟩
//!  48  i8  sector
//!  49  [u8; 7] zero padding
//! ```
//!
//! Correlation accumulators are not dumped.

use std::io::{Read, Write};

use num_complex::Complex;

use super::SampleRecord;
use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};

pub const MAGIC: &[u8; 8] = b"NHSSBRAW";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 32;
pub const RECORD_BYTES: usize = 56;

pub fn write_raw<T: Real, W: Write>(mut w: W, l: usize, beta: T, records: &[SampleRecord<T>]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(l as u32).to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    w.write_all(&to_f64(beta).to_le_bytes())?;
    for r in records {
        for x in [r.m, r.e_j, r.e_f, r.def_dbeta, r.v.re, r.v.im] {
            w.write_all(&to_f64(x).to_le_bytes())?;
        }
        w.write_all(&[r.sector as u8, 0, 0, 0, 0, 0, 0, 0])?;
    }
    Ok(())
}

/// Reads a dump back; correlation vectors come back empty.
pub fn read_raw<R: Read>(mut r: R) -> Result<(usize, f64, Vec<SampleRecord<f64>>)> {
    let mut head = [0u8; HEADER_BYTES];
    r.read_exact(&mut head)?;
    if &head[..8] != MAGIC {
        return Err(Error::InvalidParams("not a raw sample dump".into()));
    }
    let version = u32::from_le_bytes(head[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::InvalidParams(format!("unsupported dump version {version}")));
    }
    let l = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(head[16..24].try_into().unwrap()) as usize;
    let beta = f64::from_le_bytes(head[24..32].try_into().unwrap());
    let mut out = Vec::with_capacity(n);
    let mut buf = [0u8; RECORD_BYTES];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        let f = |i: usize| f64::from_le_bytes(buf[8 * i..8 * i + 8].try_into().unwrap());
        let m = f(0);
        out.push(SampleRecord {
            m,
            abs_m: m.abs(),
            e_j: f(1),
            e_f: f(2),
            def_dbeta: f(3),
            v: Complex::new(f(4), f(5)),
            sector: buf[48] as i8,
            corr_x: Vec::new(),
            corr_v: Vec::new(),
        });
    }
    Ok((l, beta, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let rec = SampleRecord {
            m: -0.25,
            abs_m: 0.25,
            e_j: -1.5,
            e_f: -10.125,
            def_dbeta: -0.5,
            v: Complex::new(1e-3, -2.75),
            sector: -1,
            corr_x: vec![1.0],
            corr_v: vec![0.0],
        };
        let mut buf = Vec::new();
        write_raw(&mut buf, 8, 3.5, &[rec.clone(), rec.clone()]).unwrap();
        assert_eq!(buf.len(), HEADER_BYTES + 2 * RECORD_BYTES);
        let (l, beta, back) = read_raw(buf.as_slice()).unwrap();
        assert_eq!((l, beta), (8, 3.5));
        assert_eq!(back[1].v, rec.v);
        assert_eq!(back[0].sector, -1);
        assert!(read_raw(&b"garbage-garbage-garbage-garbage-"[..]).is_err());
    }
}
