//! LCF v1 container.
//!
//! Little-endian layout:
//!
//! ```text
//! "LCF1" | u32 version | u32 d | u64 n | u32 n_classes | u32 meta_len
//!        | meta_len bytes of UTF-8 JSON | n x u32 labels | n*d x f32 features
//! ```
//!
//! The JSON object carries `encoder_name`, `encode_flops_per_sample`,
//! `source_dataset` and `class_names`, serialized in that key order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetMeta, EncodedDataset};
use crate::error::{Error, Result};
use crate::numeric::DenseMatrix;

pub const LCF_MAGIC: &[u8; 4] = b"LCF1";
pub const LCF_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 4 + 4;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaJson {
    encoder_name: String,
    encode_flops_per_sample: u64,
    source_dataset: String,
    class_names: Vec<String>,
}

pub fn encode_lcf(ds: &EncodedDataset) -> Result<Vec<u8>> {
    if ds.is_empty() {
        return Err(Error::EmptyData);
    }
    ds.check_coverage()?;
    let meta = serde_json::to_vec(&MetaJson {
        encoder_name: ds.meta.encoder_name.clone(),
        encode_flops_per_sample: ds.meta.encode_flops_per_sample,
        source_dataset: ds.meta.source_dataset.clone(),
        class_names: ds.class_names.clone(),
    })
    .map_err(|e| Error::Malformed(e.to_string()))?;

    let n = ds.len();
    let d = ds.dim();
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Malformed(format!("{what} {v} exceeds u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + meta.len() + 4 * n + 4 * n * d);
    out.extend_from_slice(LCF_MAGIC);
    out.extend_from_slice(&LCF_VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(d, "latent dim")?.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&to_u32(ds.n_classes(), "class count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(meta.len(), "metadata length")?.to_le_bytes());
    out.extend_from_slice(&meta);
    for &l in ds.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    for &v in ds.features().data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated(format!(
                "{what}: need {len} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode_lcf(bytes: &[u8]) -> Result<EncodedDataset> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
    if &magic != LCF_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = cur.u32("version")?;
    if version != LCF_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let d = cur.u32("latent dim")? as usize;
    let n = usize::try_from(cur.u64("row count")?)
        .map_err(|_| Error::Malformed("row count exceeds address space".into()))?;
    let n_classes = cur.u32("class count")? as usize;
    let meta_len = cur.u32("metadata length")? as usize;
    if n == 0 {
        return Err(Error::EmptyData);
    }

    let meta: MetaJson = serde_json::from_slice(cur.take(meta_len, "metadata")?)
        .map_err(|e| Error::Malformed(format!("metadata: {e}")))?;
    if meta.class_names.len() != n_classes {
        return Err(Error::Malformed(format!(
            "header declares {n_classes} classes, metadata names {}",
            meta.class_names.len()
        )));
    }

    let label_bytes = n
        .checked_mul(4)
        .ok_or_else(|| Error::Malformed("label block size overflows".into()))?;
    let labels: Vec<u32> = cur
        .take(label_bytes, "labels")?
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let feature_bytes = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Malformed("feature block size overflows".into()))?;
    let features: Vec<f32> = cur
        .take(feature_bytes, "features")?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if cur.pos != bytes.len() {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after feature block",
            bytes.len() - cur.pos
        )));
    }

    EncodedDataset::new(
        DenseMatrix::new(n, d, features)?,
        labels,
        meta.class_names,
        DatasetMeta {
            encoder_name: meta.encoder_name,
            latent_dim: d,
            encode_flops_per_sample: meta.encode_flops_per_sample,
            source_dataset: meta.source_dataset,
        },
    )
}

pub fn write_lcf(ds: &EncodedDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_lcf(ds)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    file.flush().map_err(|e| Error::io(path, e))
}

pub fn read_lcf(path: impl AsRef<Path>) -> Result<EncodedDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_lcf(&bytes)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::grid_dataset;
    use super::*;

    #[test]
    fn round_trip_and_determinism() {
        let ds = grid_dataset(3, 4, 5);
        let a = encode_lcf(&ds).unwrap();
        let b = encode_lcf(&ds).unwrap();
        assert_eq!(a, b);
        assert_eq!(&a[..4], b"LCF1");
        assert_eq!(decode_lcf(&a).unwrap(), ds);
    }

    #[test]
    fn header_fields_are_little_endian() {
        let ds = grid_dataset(2, 3, 7);
        let bytes = encode_lcf(&ds).unwrap();
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 7);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 6);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 2);
        let meta_len = u32::from_le_bytes(bytes[24..28].try_into().unwrap()) as usize;
        let meta = std::str::from_utf8(&bytes[28..28 + meta_len]).unwrap();
        assert_eq!(
            meta,
            r#"{"encoder_name":"grid","encode_flops_per_sample":10,"source_dataset":"grid","class_names":["c0","c1"]}"#
        );
        assert_eq!(bytes.len(), 28 + meta_len + 6 * 4 + 6 * 7 * 4);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_lcf(&grid_dataset(2, 2, 2)).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_lcf(&bytes), Err(Error::BadMagic(m)) if &m == b"XXXX"));
    }

    #[test]
    fn truncated_rows() {
        // 10 rows declared, 9 present.
        let ds = grid_dataset(2, 5, 3);
        let bytes = encode_lcf(&ds).unwrap();
        let cut = &bytes[..bytes.len() - 3 * 4];
        assert!(matches!(decode_lcf(cut), Err(Error::Truncated(_))));
        assert!(matches!(decode_lcf(&bytes[..10]), Err(Error::Truncated(_))));
    }

    #[test]
    fn corrupt_label() {
        let ds = grid_dataset(2, 2, 1);
        let mut bytes = encode_lcf(&ds).unwrap();
        let meta_len = u32::from_le_bytes(bytes[24..28].try_into().unwrap()) as usize;
        let off = 28 + meta_len;
        bytes[off..off + 4].copy_from_slice(&9u32.to_le_bytes());
        assert!(matches!(decode_lcf(&bytes), Err(Error::CorruptLabels(_))));
    }

    #[test]
    fn trailing_bytes_and_version() {
        let ds = grid_dataset(2, 2, 1);
        let mut bytes = encode_lcf(&ds).unwrap();
        bytes.push(0);
        assert!(matches!(decode_lcf(&bytes), Err(Error::Malformed(_))));
        let mut bytes = encode_lcf(&ds).unwrap();
        bytes[4] = 2;
        assert!(matches!(
            decode_lcf(&bytes),
            Err(Error::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn empty_dataset_cannot_be_written() {
        let ds = grid_dataset(2, 2, 1).select_rows(&[]);
        assert!(matches!(encode_lcf(&ds), Err(Error::EmptyData)));
    }
}
