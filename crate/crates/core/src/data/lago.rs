// SPDX-License-Identifier: MIT OR Apache-2.0

//! `LAGO` operator files.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic     4 bytes  "LAGO"
//! version   u32      1
//! dim       u32      n
//! A         n·n × f64, row-major
//! t         n × f64
//! meta_len  u64      byte length of the metadata blob
//! meta      UTF-8 JSON (fit configuration, rank, spectrum summary, flags)
//! ```

use std::fs;
use std::path::Path;

use super::io_err;
use crate::error::{Error, Result};
use crate::fit::{AffineOperator, FitMeta};
use crate::linalg::Matrix;

pub const MAGIC: &[u8; 4] = b"LAGO";
pub const VERSION: u32 = 1;

pub fn save_operator(op: &AffineOperator, path: &Path) -> Result<()> {
    let n = op.dim();
    let meta = serde_json::to_vec(&op.meta).expect("metadata serializes");
    let mut out = Vec::with_capacity(20 + 8 * n * (n + 1) + meta.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for v in op.a().as_slice().iter().chain(op.t()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    fs::write(path, out).map_err(io_err(path))
}

pub fn load_operator(path: &Path) -> Result<AffineOperator> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let fmt = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    let magic = cur
        .take(4)
        .ok_or_else(|| fmt("file ends inside the header".into()))?;
    if magic != MAGIC {
        return Err(fmt(format!("bad magic {magic:?}, expected \"LAGO\"")));
    }
    let version = cur
        .u32()
        .ok_or_else(|| fmt("file ends inside the header".into()))?;
    if version != VERSION {
        return Err(fmt(format!("unsupported version {version}")));
    }
    let n = cur
        .u32()
        .ok_or_else(|| fmt("file ends inside the header".into()))? as usize;
    let entries = n
        .checked_mul(n)
        .and_then(|nn| nn.checked_add(n))
        .ok_or_else(|| fmt(format!("dimension {n} too large")))?;
    let mut values = Vec::with_capacity(entries.min(1 << 24));
    for k in 0..entries {
        let v = cur.f64().ok_or_else(|| {
            fmt(format!(
                "truncated: expected {entries} coefficients, found {k}"
            ))
        })?;
        values.push(v);
    }
    let meta_len = cur
        .u64()
        .ok_or_else(|| fmt("truncated before metadata".into()))? as usize;
    let meta = cur
        .take(meta_len)
        .ok_or_else(|| fmt(format!("truncated metadata (expected {meta_len} bytes)")))?;
    if cur.pos != bytes.len() {
        return Err(fmt("trailing bytes after metadata".into()));
    }
    let meta: FitMeta =
        serde_json::from_slice(meta).map_err(|e| fmt(format!("invalid metadata: {e}")))?;

    let t = values.split_off(n * n);
    let a = Matrix::from_row_major(n, n, values).map_err(|e| fmt(e.to_string()))?;
    AffineOperator::new(a, t, meta).map_err(|e| fmt(e.to_string()))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(len)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self) -> Option<f64> {
        self.take(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}
