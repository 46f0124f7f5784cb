//! IMOE v1, a little-endian embedding container.
//!
//! ```text
//! 0..4    "IMOE"
//! 4..8    version  u32 = 1
//! 8..12   rows     u32
//! 12..16  dim      u32
//! 16      flags    u8   bit 0: rows are L2-normalized
//! 17..20  zero padding
//! ...     rows * dim f32, row-major
//! ...     rows u32 labels
//! ...     u32 class count C, then C x (u32 byte length, UTF-8 name)
//! ```
//!
//! The reader is strict: unknown flag bits, non-zero padding, short or
//! trailing data and a normalized flag that disagrees with the rows are all
//! errors.

use std::fs;
use std::path::Path;

use imo_core::{EmbeddingSet, Mat};

use crate::error::{core_in, io, Error, Result};

pub const MAGIC: [u8; 4] = *b"IMOE";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;
pub const FLAG_NORMALIZED: u8 = 0b1;

pub fn encode(set: &EmbeddingSet) -> Result<Vec<u8>> {
    let rows = u32::try_from(set.rows()).map_err(|_| Error::TooLarge("rows"))?;
    let dim = u32::try_from(set.dim()).map_err(|_| Error::TooLarge("dim"))?;
    let classes = u32::try_from(set.num_classes()).map_err(|_| Error::TooLarge("class count"))?;
    let names_len: usize = set.class_names().iter().map(|n| 4 + n.len()).sum();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * set.rows() * (set.dim() + 1) + 4 + names_len);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.push(if set.is_normalized() { FLAG_NORMALIZED } else { 0 });
    out.extend_from_slice(&[0; 3]);
    for &x in set.vectors().as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for &l in set.labels() {
        // labels < num_classes, which fits in u32 as checked above
        out.extend_from_slice(&(l as u32).to_le_bytes());
    }
    out.extend_from_slice(&classes.to_le_bytes());
    for name in set.class_names() {
        let len = u32::try_from(name.len()).map_err(|_| Error::TooLarge("class name"))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(Error::Truncated {
                section,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, section: &'static str) -> Result<u32> {
        let b = self.take(4, section)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingSet> {
    let mut c = Cursor { bytes, pos: 0 };
    let magic = c.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic([magic[0], magic[1], magic[2], magic[3]]));
    }
    let version = c.u32("header")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let rows = c.u32("header")?;
    let dim = c.u32("header")?;
    let flags = c.take(1, "header")?[0];
    if flags & !FLAG_NORMALIZED != 0 {
        return Err(Error::UnknownFlags(flags));
    }
    if c.take(3, "header")? != [0, 0, 0] {
        return Err(Error::BadPadding);
    }

    let cells = (rows as usize)
        .checked_mul(dim as usize)
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or(Error::Oversized { rows, dim })?;
    let payload = c.take(cells * 4, "vectors")?;
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let labels = c
        .take(rows as usize * 4, "labels")?
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
        .collect();
    let classes = c.u32("class count")?;
    let mut names = Vec::new();
    for index in 0..classes as usize {
        let len = c.u32("class name length")? as usize;
        let raw = c.take(len, "class name")?;
        let name = std::str::from_utf8(raw).map_err(|_| Error::InvalidUtf8 { index })?;
        names.push(name.to_owned());
    }
    if c.pos != bytes.len() {
        return Err(Error::TrailingBytes(bytes.len() - c.pos));
    }

    let vectors = Mat::from_vec(rows as usize, dim as usize, data).map_err(core_in("IMOE payload"))?;
    let set = EmbeddingSet::new(vectors, labels, names).map_err(core_in("IMOE payload"))?;
    let flagged = flags & FLAG_NORMALIZED != 0;
    if flagged != set.is_normalized() {
        return Err(Error::FlagMismatch {
            flag: flagged,
            state: if set.is_normalized() {
                "all have unit norm"
            } else {
                "do not all have unit norm"
            },
        });
    }
    Ok(set)
}

pub fn write_embedding_set(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(set)?).map_err(io(path))
}

pub fn read_embedding_set(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io(path))?;
    decode(&bytes).map_err(|e| match e {
        Error::Core { context, source } => Error::Core {
            context: format!("{}: {context}", path.display()),
            source,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use imo_core::embedding::numbered_class_names;

    fn small() -> EmbeddingSet {
        let v = Mat::from_rows(&[[0.6f32, 0.8, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        EmbeddingSet::new(v, vec![1, 0], vec!["cat".into(), "dög".into()]).unwrap()
    }

    #[test]
    fn size_arithmetic() {
        let bytes = encode(&small()).unwrap();
        // header + payload + labels + count + names
        assert_eq!(bytes.len(), 20 + 24 + 8 + 4 + (4 + 3) + (4 + 4));
        assert_eq!(&bytes[..4], b"IMOE");
        assert_eq!(bytes[16], FLAG_NORMALIZED);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let set = small();
        assert_eq!(decode(&encode(&set).unwrap()).unwrap(), set);
        let raw = Mat::from_rows(&[[2.0f32, 0.0], [1.0, 1.0]]).unwrap();
        let unnorm = EmbeddingSet::new(raw, vec![0, 0], numbered_class_names(1)).unwrap();
        let bytes = encode(&unnorm).unwrap();
        assert_eq!(bytes[16], 0);
        assert_eq!(decode(&bytes).unwrap(), unnorm);
    }

    #[test]
    fn rejects_structural_errors() {
        let good = encode(&small()).unwrap();
        let mut b = good.clone();
        b[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&b), Err(Error::BadMagic(_))));
        let mut b = good.clone();
        b[4] = 2;
        assert!(matches!(decode(&b), Err(Error::UnsupportedVersion(2))));
        let mut b = good.clone();
        b[16] |= 0b10;
        assert!(matches!(decode(&b), Err(Error::UnknownFlags(_))));
        let mut b = good.clone();
        b[18] = 1;
        assert!(matches!(decode(&b), Err(Error::BadPadding)));
        assert!(matches!(decode(&good[..good.len() - 1]), Err(Error::Truncated { .. })));
        let mut b = good.clone();
        b.push(0);
        assert!(matches!(decode(&b), Err(Error::TrailingBytes(1))));
        let mut b = good;
        b[16] = 0;
        assert!(matches!(decode(&b), Err(Error::FlagMismatch { flag: false, .. })));
    }

    #[test]
    fn flag_set_on_non_unit_row_is_rejected() {
        let raw = Mat::from_rows(&[[2.0f32, 0.0]]).unwrap();
        let set = EmbeddingSet::new(raw, vec![0], numbered_class_names(1)).unwrap();
        let mut b = encode(&set).unwrap();
        b[16] = FLAG_NORMALIZED;
        assert!(matches!(decode(&b), Err(Error::FlagMismatch { flag: true, .. })));
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let mut b = encode(&small()).unwrap();
        // first label sits right after the 24-byte payload
        b[44] = 7;
        assert!(matches!(decode(&b), Err(Error::Core { .. })));
    }

    #[test]
    fn oversized_header_does_not_allocate() {
        let mut b = encode(&small()).unwrap();
        b[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        b[12..16].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode(&b).is_err());
    }
}
