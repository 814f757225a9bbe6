//! Binary region-table format, little endian:
//!
//! ```text
//! magic "MCAT" | version u32 | axis u8 | n_param u32 | n_u u32 | horizon u32
//! | region count u64 | model hash [u8; 32] | lower [f64; n_param]
//! | upper [f64; n_param] | dt f64 | f_ref_max f64 | w_f, w_u, w_reg f64
//! then per region:
//!   n_rows u32 | H [f64; n_rows·n_param] row-major | k [f64; n_rows]
//!   | F [f64; n_u·n_param] row-major | G [f64; n_u]
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::mpqp::{ExplicitWeights, N_PARAM};
use super::table::{CriticalRegion, RegionTable, TableMeta};
use crate::error::TableError;
use crate::model::Axis;

pub const MAGIC: &[u8; 4] = b"MCAT";
pub const VERSION: u32 = 1;

/// A loaded table and whether its hash disagreed with the expected one.
#[derive(Clone, Debug)]
pub struct LoadedTable {
    pub table: RegionTable,
    pub hash_mismatch: bool,
}

pub fn to_bytes(table: &RegionTable) -> Vec<u8> {
    let n_u = table.n_u();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(table.axis.tag());
    out.extend_from_slice(&(N_PARAM as u32).to_le_bytes());
    out.extend_from_slice(&(n_u as u32).to_le_bytes());
    out.extend_from_slice(&(table.horizon as u32).to_le_bytes());
    out.extend_from_slice(&(table.regions.len() as u64).to_le_bytes());
    out.extend_from_slice(&table.meta.model_hash);
    let w = &table.meta.weights;
    let scalars = [table.meta.dt, table.meta.f_ref_max, w.w_f, w.w_u, w.w_reg];
    for v in table.lower.iter().chain(&table.upper).chain(&scalars) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for r in &table.regions {
        out.extend_from_slice(&(r.h.nrows() as u32).to_le_bytes());
        for i in 0..r.h.nrows() {
            for j in 0..N_PARAM {
                out.extend_from_slice(&r.h[(i, j)].to_le_bytes());
            }
        }
        for v in r.k.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for i in 0..n_u {
            for j in 0..N_PARAM {
                out.extend_from_slice(&r.f[(i, j)].to_le_bytes());
            }
        }
        for v in r.g.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_table(table: &RegionTable, path: &Path) -> Result<(), TableError> {
    std::fs::write(path, to_bytes(table)).map_err(|source| TableError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    region: usize,
    total: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], TableError> {
        if self.buf.len() - self.pos < n {
            return Err(TableError::Truncated {
                what,
                region: self.region,
                total: self.total,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, TableError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, TableError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>, TableError> {
        let bytes = self.take(n * 8, what)?;
        let v: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(TableError::Malformed(format!(
                "non-finite value in {what} of region {}",
                self.region
            )));
        }
        Ok(v)
    }
}

/// Parses a table. With `expected_hash` set, a differing stored hash is an
/// error unless `force` is true, in which case the table is returned with
/// `hash_mismatch` set.
pub fn from_bytes(
    buf: &[u8],
    expected_hash: Option<&[u8; 32]>,
    force: bool,
) -> Result<LoadedTable, TableError> {
    let mut r = Reader {
        buf,
        pos: 0,
        region: 0,
        total: 0,
    };
    if r.take(4, "magic").map_err(|_| TableError::BadMagic)? != MAGIC {
        return Err(TableError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(TableError::Version {
            found: version,
            expected: VERSION,
        });
    }
    let tag = r.take(1, "axis tag")?[0];
    let axis =
        Axis::from_tag(tag).ok_or_else(|| TableError::Malformed(format!("axis tag {tag}")))?;
    let n_param = r.u32("parameter dimension")? as usize;
    if n_param != N_PARAM {
        return Err(TableError::Malformed(format!(
            "parameter dimension {n_param}, expected {N_PARAM}"
        )));
    }
    let n_u = r.u32("input dimension")? as usize;
    let horizon = r.u32("horizon")? as usize;
    if horizon == 0 || n_u != 2 * horizon {
        return Err(TableError::Malformed(format!(
            "input dimension {n_u} does not match horizon {horizon}"
        )));
    }
    let count = r.u64("region count")?;
    let total = usize::try_from(count)
        .map_err(|_| TableError::Malformed(format!("region count {count}")))?;
    r.total = total;
    let mut model_hash = [0u8; 32];
    model_hash.copy_from_slice(r.take(32, "model hash")?);
    let hash_mismatch = expected_hash.is_some_and(|h| *h != model_hash);
    if hash_mismatch && !force {
        return Err(TableError::HashMismatch);
    }
    let lower: [f64; N_PARAM] = r.f64s(N_PARAM, "lower bounds")?.try_into().unwrap();
    let upper: [f64; N_PARAM] = r.f64s(N_PARAM, "upper bounds")?.try_into().unwrap();
    let rest = r.f64s(5, "header scalars")?;
    let meta = TableMeta {
        weights: ExplicitWeights {
            w_f: rest[2],
            w_u: rest[3],
            w_reg: rest[4],
        },
        dt: rest[0],
        f_ref_max: rest[1],
        model_hash,
    };

    // cap the preallocation by what the remaining bytes could hold
    let mut regions = Vec::with_capacity(total.min((buf.len() - r.pos) / 4 + 1));
    for idx in 0..total {
        r.region = idx;
        let n_rows = r.u32("row count")? as usize;
        let h = r.f64s(n_rows * N_PARAM, "region rows")?;
        let k = r.f64s(n_rows, "region offsets")?;
        let f = r.f64s(n_u * N_PARAM, "law gain")?;
        let g = r.f64s(n_u, "law offset")?;
        regions.push(CriticalRegion {
            h: DMatrix::from_row_slice(n_rows, N_PARAM, &h),
            k: DVector::from_vec(k),
            f: DMatrix::from_row_slice(n_u, N_PARAM, &f),
            g: DVector::from_vec(g),
            active: Vec::new(),
        });
    }
    if r.pos != buf.len() {
        return Err(TableError::Malformed(format!(
            "{} trailing bytes after the last region",
            buf.len() - r.pos
        )));
    }
    Ok(LoadedTable {
        table: RegionTable {
            axis,
            horizon,
            lower,
            upper,
            meta,
            regions,
        },
        hash_mismatch,
    })
}

pub fn load_table(
    path: &Path,
    expected_hash: Option<&[u8; 32]>,
    force: bool,
) -> Result<LoadedTable, TableError> {
    let buf = std::fs::read(path).map_err(|source| TableError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let loaded = from_bytes(&buf, expected_hash, force)?;
    if loaded.hash_mismatch {
        log::warn!(
            "{}: model hash mismatch, loading anyway because force is set",
            path.display()
        );
    }
    Ok(loaded)
}
