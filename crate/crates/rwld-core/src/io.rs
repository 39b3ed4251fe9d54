//! On-disk formats: a raw binary field container and CSV export.
//!
//! The binary container is an 80-byte header, the magic bytes `RWLD1`
//! followed by a compact JSON record of the grid and payload kind padded
//! with spaces, then the samples as little-endian 64-bit floats in row-major
//! order. CSV output is for plotting: one metadata header row, then a wide
//! matrix with one row per time slice.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::grid::{Field, Grid, GridFunction};

const MAGIC: &[u8; 5] = b"RWLD1";
const HEADER_LEN: usize = 80;

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    l: f64,
    nx: usize,
    t: f64,
    nt: usize,
}

fn write_header(w: &mut impl Write, kind: &str, grid: &Grid) -> Result<(), CoreError> {
    let header = Header {
        kind: kind.to_string(),
        l: grid.l,
        nx: grid.nx,
        t: grid.t,
        nt: grid.nt,
    };
    let json = serde_json::to_string(&header)
        .map_err(|e| CoreError::Format(format!("header encode: {e}")))?;
    let mut buf = Vec::with_capacity(HEADER_LEN);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(json.as_bytes());
    if buf.len() > HEADER_LEN {
        return Err(CoreError::Format(format!(
            "header too long: {} bytes for fixed {HEADER_LEN}-byte slot",
            buf.len()
        )));
    }
    buf.resize(HEADER_LEN, b' ');
    w.write_all(&buf)?;
    Ok(())
}

fn read_header(r: &mut impl Read) -> Result<(String, Grid), CoreError> {
    let mut buf = [0u8; HEADER_LEN];
    r.read_exact(&mut buf)
        .map_err(|_| CoreError::Format("file shorter than the fixed header".into()))?;
    if &buf[..5] != MAGIC {
        return Err(CoreError::Format("bad magic, not an RWLD1 file".into()));
    }
    let json = std::str::from_utf8(&buf[5..])
        .map_err(|_| CoreError::Format("header is not UTF-8".into()))?
        .trim_end();
    let header: Header = serde_json::from_str(json)
        .map_err(|e| CoreError::Format(format!("header decode: {e}")))?;
    let grid = Grid::new(header.l, header.nx, header.t, header.nt)?;
    Ok((header.kind, grid))
}

fn write_payload(w: &mut impl Write, data: &[f64]) -> Result<(), CoreError> {
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_payload(r: &mut impl Read, len: usize) -> Result<Vec<f64>, CoreError> {
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes).map_err(|_| {
        CoreError::Format(format!("payload truncated, expected {len} samples"))
    })?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(CoreError::Format("trailing bytes after payload".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Write a raw sample block under an arbitrary kind tag. Used by noise
/// fields, whose slab-indexed shape differs from node-indexed fields.
pub(crate) fn write_raw(
    path: &Path,
    kind: &str,
    grid: &Grid,
    data: &[f64],
) -> Result<(), CoreError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, kind, grid)?;
    write_payload(&mut w, data)?;
    w.flush()?;
    Ok(())
}

/// Read a raw sample block, checking the kind tag and the payload length
/// implied by the grid.
pub(crate) fn read_raw(
    path: &Path,
    kind: &str,
    len_of: impl Fn(&Grid) -> usize,
) -> Result<(Vec<f64>, Grid), CoreError> {
    let mut r = BufReader::new(File::open(path)?);
    let (found, grid) = read_header(&mut r)?;
    if found != kind {
        return Err(CoreError::Format(format!(
            "expected kind \"{kind}\", found \"{found}\""
        )));
    }
    let data = read_payload(&mut r, len_of(&grid))?;
    Ok((data, grid))
}

/// Write a space-time field with its grid.
pub fn write_field(path: &Path, field: &Field, grid: &Grid) -> Result<(), CoreError> {
    assert_eq!(field.nx, grid.nx);
    assert_eq!(field.nt, grid.nt);
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, "field", grid)?;
    write_payload(&mut w, &field.data)?;
    w.flush()?;
    Ok(())
}

/// Read a space-time field and its grid.
pub fn read_field(path: &Path) -> Result<(Field, Grid), CoreError> {
    let mut r = BufReader::new(File::open(path)?);
    let (kind, grid) = read_header(&mut r)?;
    if kind != "field" {
        return Err(CoreError::Format(format!(
            "expected kind \"field\", found \"{kind}\""
        )));
    }
    let data = read_payload(&mut r, (grid.nt + 1) * (grid.nx + 1))?;
    Ok((
        Field {
            nt: grid.nt,
            nx: grid.nx,
            data,
        },
        grid,
    ))
}

/// Write a single spatial profile with its grid.
pub fn write_grid_function(
    path: &Path,
    f: &GridFunction,
    grid: &Grid,
) -> Result<(), CoreError> {
    assert_eq!(f.len(), grid.nx + 1);
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, "gridfn", grid)?;
    write_payload(&mut w, &f.values)?;
    w.flush()?;
    Ok(())
}

/// Read a spatial profile and its grid.
pub fn read_grid_function(path: &Path) -> Result<(GridFunction, Grid), CoreError> {
    let mut r = BufReader::new(File::open(path)?);
    let (kind, grid) = read_header(&mut r)?;
    if kind != "gridfn" {
        return Err(CoreError::Format(format!(
            "expected kind \"gridfn\", found \"{kind}\""
        )));
    }
    let values = read_payload(&mut r, grid.nx + 1)?;
    Ok((GridFunction { values }, grid))
}

/// CSV export of a field: metadata header row, an x-coordinate row, then
/// one row per time slice led by its time stamp.
pub fn write_field_csv(path: &Path, field: &Field, grid: &Grid) -> Result<(), CoreError> {
    assert_eq!(field.nx, grid.nx);
    assert_eq!(field.nt, grid.nt);
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "l,nx,t,nt")?;
    writeln!(w, "{},{},{},{}", grid.l, grid.nx, grid.t, grid.nt)?;
    let xs: Vec<String> = (0..=grid.nx).map(|j| format!("{}", grid.node(j))).collect();
    writeln!(w, "t\\x,{}", xs.join(","))?;
    for i in 0..=grid.nt {
        let row: Vec<String> = field.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{},{}", grid.time(i), row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// CSV export of a spatial profile: metadata header row, then `x,value` rows.
pub fn write_grid_function_csv(
    path: &Path,
    f: &GridFunction,
    grid: &Grid,
) -> Result<(), CoreError> {
    assert_eq!(f.len(), grid.nx + 1);
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "l,nx,t,nt")?;
    writeln!(w, "{},{},{},{}", grid.l, grid.nx, grid.t, grid.nt)?;
    writeln!(w, "x,value")?;
    for j in 0..=grid.nx {
        writeln!(w, "{},{}", grid.node(j), f.values[j])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("rwld_io_test_{}_{name}", std::process::id()));
        p
    }

    #[test]
    fn field_round_trip() {
        let grid = Grid::new(2.0, 16, 1.0, 8).unwrap();
        let field = Field::from_fn(&grid, |t, x| (t + 1.0) * x.sin() + 0.125);
        let path = tmp("field.bin");
        write_field(&path, &field, &grid).unwrap();
        let bytes = std::fs::metadata(&path).unwrap().len();
        assert_eq!(bytes as usize, 80 + 8 * (grid.nt + 1) * (grid.nx + 1));
        let (back, back_grid) = read_field(&path).unwrap();
        assert_eq!(back, field);
        assert_eq!(back_grid, grid);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn grid_function_round_trip() {
        let grid = Grid::new(2.0, 32, 1.0, 16).unwrap();
        let f = GridFunction::from_fn(&grid, |x| x * x - 0.5);
        let path = tmp("profile.bin");
        write_grid_function(&path, &f, &grid).unwrap();
        let (back, back_grid) = read_grid_function(&path).unwrap();
        assert_eq!(back, f);
        assert_eq!(back_grid, grid);
        // the field reader must refuse a profile file
        assert!(matches!(read_field(&path), Err(CoreError::Format(_))));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let path = tmp("corrupt.bin");
        std::fs::write(&path, b"NOPE1 not a real header").unwrap();
        assert!(matches!(read_field(&path), Err(CoreError::Format(_))));

        let grid = Grid::new(2.0, 16, 1.0, 8).unwrap();
        let field = Field::zeros(&grid);
        write_field(&path, &field, &grid).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 9);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_field(&path), Err(CoreError::Format(_))));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn csv_has_metadata_header() {
        let grid = Grid::new(2.0, 8, 1.0, 8).unwrap();
        let field = Field::from_fn(&grid, |t, x| t * x);
        let path = tmp("field.csv");
        write_field_csv(&path, &field, &grid).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("l,nx,t,nt"));
        assert_eq!(lines.next(), Some("2,8,1,8"));
        assert!(lines.next().unwrap().starts_with("t\\x,"));
        assert_eq!(lines.count(), grid.nt + 1);
        std::fs::remove_file(&path).ok();
    }
}
