//! Flat binary container for Lie-valued field snapshots.
//!
//! Layout (all little-endian): magic `CSHSNAP1`, `u64 M`, `f64 box_length`,
//! `u64 n`, `u8 representation`, `u64 field_count`, then for every field and
//! every su(n) component the M² samples as interleaved `f64` re/im pairs.
//! Field names and the time stamp live in a JSON sidecar next to the binary.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CshError, Result};
use crate::spectral_grid::{Grid2D, LieFieldGrid, Representation, ScalarField};

const MAGIC: &[u8; 8] = b"CSHSNAP1";

/// Named fields sharing one grid, representation and algebra dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub t: f64,
    pub fields: Vec<(String, LieFieldGrid)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    m: usize,
    box_length: f64,
    n: usize,
    representation: Representation,
    t: f64,
    names: Vec<String>,
}

/// Path of the JSON sidecar belonging to a binary snapshot.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let first = &snap.fields.first().ok_or_else(|| CshError::InvalidParameter("empty snapshot".into()))?.1;
    let grid = first.grid().clone();
    let rep = first.representation();
    let dim = snap.n * snap.n - 1;
    let mut buf = Vec::with_capacity(64 + snap.fields.len() * dim * grid.len() * 16);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(grid.m() as u64).to_le_bytes());
    buf.extend_from_slice(&grid.box_length().to_le_bytes());
    buf.extend_from_slice(&(snap.n as u64).to_le_bytes());
    buf.push(rep.tag());
    buf.extend_from_slice(&(snap.fields.len() as u64).to_le_bytes());
    for (_, field) in &snap.fields {
        if field.grid() != &grid {
            return Err(CshError::GridMismatch);
        }
        if field.dim() != dim {
            return Err(CshError::DimensionMismatch { expected: dim, found: field.dim() });
        }
        for comp in field.components() {
            let comp = match rep {
                Representation::Physical => comp.to_physical(),
                Representation::Spectral => comp.to_spectral(),
            };
            for z in comp.data() {
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    fs::File::create(path)?.write_all(&buf)?;
    let sidecar = Sidecar {
        m: grid.m(),
        box_length: grid.box_length(),
        n: snap.n,
        representation: rep,
        t: snap.t,
        names: snap.fields.iter().map(|(name, _)| name.clone()).collect(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const K: usize>(&mut self) -> Result<[u8; K]> {
        let end = self.pos + K;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| CshError::InvalidParameter(format!("snapshot truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(slice.try_into().expect("length checked"))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if &cur.take::<8>()? != MAGIC {
        return Err(CshError::InvalidParameter("not a snapshot container".into()));
    }
    let m = cur.u64()? as usize;
    let box_length = cur.f64()?;
    let n = cur.u64()? as usize;
    let tag = cur.take::<1>()?[0];
    let rep = Representation::from_tag(tag)
        .ok_or_else(|| CshError::InvalidParameter(format!("unknown representation tag {tag}")))?;
    let count = cur.u64()? as usize;
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    if sidecar.names.len() != count || sidecar.m != m || sidecar.n != n {
        return Err(CshError::InvalidParameter("sidecar does not match the binary header".into()));
    }
    let grid = Grid2D::new(box_length, m)?;
    let dim = n * n - 1;
    let mut fields = Vec::with_capacity(count);
    for name in sidecar.names {
        let mut comps = Vec::with_capacity(dim);
        for _ in 0..dim {
            let data = (0..grid.len())
                .map(|_| Ok(Complex64::new(cur.f64()?, cur.f64()?)))
                .collect::<Result<Vec<_>>>()?;
            comps.push(ScalarField::from_data(&grid, rep, data)?);
        }
        fields.push((name, LieFieldGrid::new(comps)?));
    }
    Ok(Snapshot { n, t: sidecar.t, fields })
}
