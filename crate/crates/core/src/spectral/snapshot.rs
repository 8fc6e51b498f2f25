//! Binary snapshot format for complex lattice fields.
//!
//! Layout (little-endian):
//!
//! | bytes  | content                         |
//! |--------|---------------------------------|
//! | 0..4   | magic `"FNLS"`                  |
//! | 4..8   | format version `u32` (= 1)      |
//! | 8..12  | spatial dimension `n` as `u32`  |
//! | 12..16 | points per axis `N` as `u32`    |
//! | 16..24 | box length `L` as `f64`         |
//! | 24..32 | reserved, zero                  |
//!
//! followed by `N^n` interleaved `(re, im)` `f64` pairs in row-major order.
//! Snapshots always store physical-space samples; readers get a
//! physical-tagged field back.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};
use crate::spectral::{Grid, SpaceTag, SpectralField};

/// File magic.
pub const SNAPSHOT_MAGIC: [u8; 4] = *b"FNLS";
/// Current format version.
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_LEN: usize = 32;

/// Write a physical-space field to `path` in the snapshot format.
pub fn write_snapshot<T: Real>(field: &SpectralField<T>, path: &Path) -> Result<()> {
    if field.tag() != SpaceTag::Physical {
        return Err(Error::SpaceMismatch {
            expected: SpaceTag::Physical.name(),
            found: field.tag().name(),
        });
    }
    let grid = field.grid();
    let mut w = BufWriter::new(File::create(path)?);
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(&SNAPSHOT_MAGIC);
    header[4..8].copy_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    header[8..12].copy_from_slice(&(grid.dim() as u32).to_le_bytes());
    header[12..16].copy_from_slice(&(grid.points_per_dim() as u32).to_le_bytes());
    header[16..24].copy_from_slice(&grid.box_length().as_f64().to_le_bytes());
    w.write_all(&header)?;
    for v in field.values() {
        w.write_all(&v.re.as_f64().to_le_bytes())?;
        w.write_all(&v.im.as_f64().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a snapshot file back into a physical-space field.
pub fn read_snapshot<T: Real>(path: &Path) -> Result<SpectralField<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| Error::SnapshotFormat("file shorter than the 32-byte header".into()))?;
    if header[0..4] != SNAPSHOT_MAGIC {
        return Err(Error::SnapshotFormat("bad magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != SNAPSHOT_VERSION {
        return Err(Error::SnapshotFormat(format!(
            "unsupported version {version}"
        )));
    }
    let n = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let pts = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let l = f64::from_le_bytes(header[16..24].try_into().unwrap());
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::SnapshotFormat(format!("bad box length {l}")));
    }
    let grid = Grid::<T>::new(n, pts, T::from_f64_lit(l))?;
    let total = grid.total_points();
    let mut payload = vec![0u8; total * 16];
    r.read_exact(&mut payload)
        .map_err(|_| Error::SnapshotFormat("payload shorter than N^n complex values".into()))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::SnapshotFormat("trailing bytes after payload".into()));
    }
    let mut values = Vec::with_capacity(total);
    for chunk in payload.chunks_exact(16) {
        let re = f64::from_le_bytes(chunk[0..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..16].try_into().unwrap());
        values.push(Cplx::new(T::from_f64_lit(re), T::from_f64_lit(im)));
    }
    SpectralField::from_values(grid, SpaceTag::Physical, values)
}
