// SPDX-License-Identifier: MIT OR Apache-2.0

//! `LAGE` pair files.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic    4 bytes  "LAGE"
//! version  u32      1
//! count    u64      number of records N
//! dim      u32      embedding dimension n
//! flags    u32      bit0 labels present, bit1 raw scores present
//! N records:
//!   label  u8       0 negative, 1 positive, 255 unlabeled
//!   score  f32      only when bit1 is set; NaN marks a record without a score
//!   x      n × f64
//!   x′     n × f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::{io_err, EmbeddingPairSet, Label, PairRecord};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LAGE";
pub const VERSION: u32 = 1;
pub const FLAG_LABELS: u32 = 1;
pub const FLAG_SCORES: u32 = 1 << 1;

pub(super) fn write(set: &EmbeddingPairSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    encode(set, &mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

fn encode(set: &EmbeddingPairSet, w: &mut impl Write) -> std::io::Result<()> {
    let mut flags = 0;
    if set.has_labels() {
        flags |= FLAG_LABELS;
    }
    let scores = set.has_scores();
    if scores {
        flags |= FLAG_SCORES;
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(set.len() as u64).to_le_bytes())?;
    w.write_all(&(set.dim() as u32).to_le_bytes())?;
    w.write_all(&flags.to_le_bytes())?;
    for r in set.records() {
        w.write_all(&[r.label.to_byte()])?;
        if scores {
            w.write_all(&r.raw_score.unwrap_or(f32::NAN).to_le_bytes())?;
        }
        for v in r.x.iter().chain(&r.x_prime) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub(super) fn read(path: &Path) -> Result<EmbeddingPairSet> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);
    let fmt = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let truncated = |what: &str| fmt(format!("file ends inside the {what}"));

    let mut header = [0u8; 24];
    read_or(&mut r, &mut header, path).map_err(|e| e.unwrap_or_else(|| truncated("header")))?;
    if &header[0..4] != MAGIC {
        return Err(fmt(format!(
            "bad magic {:?}, expected \"LAGE\"",
            &header[0..4]
        )));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fmt(format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let dim = u32::from_le_bytes(header[16..20].try_into().unwrap()) as usize;
    let flags = u32::from_le_bytes(header[20..24].try_into().unwrap());
    if flags & !(FLAG_LABELS | FLAG_SCORES) != 0 {
        return Err(fmt(format!("unknown flag bits {flags:#x}")));
    }
    let scores = flags & FLAG_SCORES != 0;
    let count =
        usize::try_from(count).map_err(|_| fmt(format!("record count {count} too large")))?;

    let record_err = |record: usize, message: String| Error::Record {
        path: path.to_path_buf(),
        record,
        message,
    };
    let mut records = Vec::with_capacity(count.min(1 << 20));
    let mut buf = vec![0u8; 16 * dim];
    for i in 0..count {
        let mut label = [0u8; 1];
        read_or(&mut r, &mut label, path)
            .map_err(|e| e.unwrap_or_else(|| record_err(i, "truncated record".into())))?;
        let label = Label::from_byte(label[0])
            .ok_or_else(|| record_err(i, format!("invalid label byte {}", label[0])))?;
        let raw_score = if scores {
            let mut s = [0u8; 4];
            read_or(&mut r, &mut s, path)
                .map_err(|e| e.unwrap_or_else(|| record_err(i, "truncated record".into())))?;
            let s = f32::from_le_bytes(s);
            if s.is_nan() {
                None
            } else if s.is_finite() {
                Some(s)
            } else {
                return Err(record_err(i, "non-finite score".into()));
            }
        } else {
            None
        };
        read_or(&mut r, &mut buf, path)
            .map_err(|e| e.unwrap_or_else(|| record_err(i, "truncated record".into())))?;
        let values: Vec<f64> = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            let which = if j < dim { "x" } else { "x'" };
            return Err(record_err(i, format!("non-finite {which}[{}]", j % dim)));
        }
        let x_prime = values[dim..].to_vec();
        let mut x = values;
        x.truncate(dim);
        records.push(PairRecord {
            label,
            x,
            x_prime,
            raw_score,
        });
    }
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(fmt(format!("trailing bytes after {count} records"))),
        Err(e) => return Err(io_err(path)(e)),
    }
    EmbeddingPairSet::new(stem(path), dim, records)
}

/// `Err(None)` on clean EOF, `Err(Some(_))` on other I/O failures.
fn read_or(
    r: &mut impl Read,
    buf: &mut [u8],
    path: &Path,
) -> std::result::Result<(), Option<Error>> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            None
        } else {
            Some(io_err(path)(e))
        }
    })
}

pub(super) fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("pairs")
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_pairs, save_pairs, PairFormat};
    use crate::synth::unit_vector;

    fn sample(n_pairs: usize, dim: usize) -> EmbeddingPairSet {
        let recs = (0..n_pairs)
            .map(|i| {
                let label = match i % 3 {
                    0 => Label::Positive,
                    1 => Label::Negative,
                    _ => Label::Unlabeled,
                };
                let mut r = PairRecord::new(
                    label,
                    unit_vector(dim, i as u64),
                    unit_vector(dim, 500 + i as u64),
                );
                if i % 2 == 0 {
                    r = r.with_score(i as f32 * 0.37);
                }
                r
            })
            .collect();
        EmbeddingPairSet::new("sample", dim, recs).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.lage");
        let s = sample(10, 7);
        save_pairs(&s, &p, PairFormat::Binary).unwrap();
        let back = load_pairs(&p, PairFormat::Binary).unwrap();
        assert_eq!(back.len(), 10);
        for (a, b) in s.records().iter().zip(back.records()) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.raw_score.map(f32::to_bits), b.raw_score.map(f32::to_bits));
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.x), bits(&b.x));
            assert_eq!(bits(&a.x_prime), bits(&b.x_prime));
        }
    }

    #[test]
    fn file_size_matches_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.lage");
        let s = sample(4, 3);
        save_pairs(&s, &p, PairFormat::Binary).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(bytes.len(), 24 + 4 * (1 + 4 + 2 * 3 * 8));
        assert_eq!(&bytes[0..4], b"LAGE");
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 3);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.lage");
        save_pairs(&sample(3, 4), &p, PairFormat::Binary).unwrap();
        let bytes = std::fs::read(&p).unwrap();

        let q = dir.path().join("bad.lage");
        let mut b = bytes.clone();
        b[0] = b'X';
        std::fs::write(&q, &b).unwrap();
        assert!(matches!(
            load_pairs(&q, PairFormat::Binary),
            Err(Error::Format { .. })
        ));

        let mut b = bytes.clone();
        b[4] = 9;
        std::fs::write(&q, &b).unwrap();
        assert!(matches!(
            load_pairs(&q, PairFormat::Binary),
            Err(Error::Format { .. })
        ));

        std::fs::write(&q, &bytes[..bytes.len() - 5]).unwrap();
        match load_pairs(&q, PairFormat::Binary) {
            Err(Error::Record { record, .. }) => assert_eq!(record, 2),
            other => panic!("expected record error, got {other:?}"),
        }

        let mut b = bytes.clone();
        // First f64 of record 1 (after its label and score).
        let off = 24 + (1 + 4 + 64) + 1 + 4;
        b[off..off + 8].copy_from_slice(&f64::INFINITY.to_le_bytes());
        std::fs::write(&q, &b).unwrap();
        match load_pairs(&q, PairFormat::Binary) {
            Err(Error::Record {
                record, message, ..
            }) => {
                assert_eq!(record, 1);
                assert!(message.contains("non-finite"));
            }
            other => panic!("expected record error, got {other:?}"),
        }

        let mut b = bytes;
        b.push(0);
        std::fs::write(&q, &b).unwrap();
        assert!(load_pairs(&q, PairFormat::Binary).is_err());
    }
}
