//! Binary snapshots and CSV slices.
//!
//! Snapshot layout, little-endian: magic `NSKF`, `u32` dim, `u32` n, `f64` box
//! length, `u32` rank, then `rank * n^dim` doubles, component-major and row-major
//! within each component.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid;

const MAGIC: &[u8; 4] = b"NSKF";

pub fn write_snapshot(path: &Path, fields: &[&SpectralField]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_snapshot(&mut w, fields)?;
    w.flush()?;
    Ok(())
}

pub fn encode_snapshot(w: &mut impl Write, fields: &[&SpectralField]) -> Result<()> {
    let first = fields.first().ok_or_else(|| Error::Format("snapshot needs at least one component".into()))?;
    let grid = first.grid();
    if fields.iter().any(|f| f.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    w.write_all(MAGIC)?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(grid.n() as u32).to_le_bytes())?;
    w.write_all(&grid.length().to_le_bytes())?;
    w.write_all(&(fields.len() as u32).to_le_bytes())?;
    for f in fields {
        for v in f.samples() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Vec<SpectralField>> {
    decode_snapshot(&mut BufReader::new(File::open(path)?))
}

pub fn decode_snapshot(r: &mut impl Read) -> Result<Vec<SpectralField>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad snapshot magic".into()));
    }
    let dim = read_u32(r)? as usize;
    let n = read_u32(r)? as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let length = f64::from_le_bytes(b8);
    let rank = read_u32(r)? as usize;
    let grid = Grid::new(dim, n, length)?;
    (0..rank)
        .map(|_| {
            let mut s = Vec::with_capacity(grid.len());
            for _ in 0..grid.len() {
                r.read_exact(&mut b8)?;
                s.push(f64::from_le_bytes(b8));
            }
            SpectralField::from_samples(&grid, s)
        })
        .collect()
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Writes the line through the first grid point along axis 0 as `x,name1,name2,...`.
pub fn write_slice_csv(path: &Path, names: &[&str], fields: &[&SpectralField]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_slice_csv(&mut w, names, fields)?;
    w.flush()?;
    Ok(())
}

pub fn encode_slice_csv(w: &mut impl Write, names: &[&str], fields: &[&SpectralField]) -> Result<()> {
    if names.len() != fields.len() || fields.is_empty() {
        return Err(Error::Format("one column name per field required".into()));
    }
    let grid = fields[0].grid();
    let stride = grid.n().pow(grid.dim() as u32 - 1);
    writeln!(w, "x,{}", names.join(","))?;
    for i in 0..grid.n() {
        let idx = i * stride;
        write!(w, "{:.17e}", grid.point(idx)[0])?;
        for f in fields {
            write!(w, ",{:.17e}", f.samples()[idx])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip() {
        let g = Grid::new(2, 8, 1.5).unwrap();
        let a = SpectralField::from_fn(&g, |x| x[0] + 2.0 * x[1]).unwrap();
        let b = SpectralField::from_fn(&g, |x| (x[0] * x[1]).sin()).unwrap();
        let mut buf = Vec::new();
        encode_snapshot(&mut buf, &[&a, &b]).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 4 + 2 * 64 * 8);
        let back = decode_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].samples(), a.samples());
        assert_eq!(back[1].samples(), b.samples());
        assert_eq!(back[0].grid().length(), 1.5);
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"XXXX".to_vec();
        assert!(matches!(decode_snapshot(&mut buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn csv_slice_has_header_and_rows() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let a = SpectralField::from_fn(&g, |x| x[0]).unwrap();
        let mut buf = Vec::new();
        encode_slice_csv(&mut buf, &["rho"], &[&a]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,rho");
        assert_eq!(lines.len(), 9);
    }
}
