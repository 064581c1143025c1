//! Binary checkpoint container for named `f32` tensors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes   "CNTCKPT1"
//! entry count      u32
//! per entry:
//!   name length    u32
//!   name           UTF-8 bytes
//!   rank           u32       (1..=4)
//!   dims           u32 × rank
//!   element count  u64       (must equal the product of dims)
//!   data           f32 × count
//! digest           32 bytes  SHA-256 of every preceding byte
//! ```
//!
//! The trailing digest turns silent corruption (truncated copy, bit rot,
//! concurrent overwrite) into a clean [`CheckpointError::HashMismatch`].

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::tensor::MAX_RANK;

/// File signature of the checkpoint container.
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CNTCKPT1";

/// One named tensor inside a checkpoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    /// Parameter name, unique within the file.
    pub name: String,
    /// Tensor shape, outermost dimension first.
    pub dims: Vec<usize>,
    /// Row-major values.
    pub data: Vec<f32>,
}

/// Errors from reading or writing checkpoint files.
#[derive(Debug, Error)]
pub enum CheckpointError {
    /// Underlying filesystem failure.
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),

    /// The file does not start with [`CHECKPOINT_MAGIC`].
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,

    /// The file ended before the declared content.
    #[error("checkpoint truncated")]
    Truncated,

    /// The trailing digest does not match the content.
    #[error("checkpoint integrity digest mismatch (file corrupted)")]
    HashMismatch,

    /// Structurally invalid content (bad rank, dims, name, or counts).
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

/// Serializes `entries` to `path`, replacing any existing file.
///
/// # Errors
///
/// Returns [`CheckpointError::Malformed`] when an entry's `dims` product
/// disagrees with its data length or the rank is unsupported, and
/// [`CheckpointError::Io`] on filesystem failure.
pub fn write_checkpoint(path: &Path, entries: &[CheckpointEntry]) -> Result<(), CheckpointError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    let count = u32::try_from(entries.len())
        .map_err(|_| CheckpointError::Malformed("too many entries".to_string()))?;
    buf.extend_from_slice(&count.to_le_bytes());
    for entry in entries {
        if entry.dims.is_empty() || entry.dims.len() > MAX_RANK {
            return Err(CheckpointError::Malformed(format!(
                "entry `{}` has rank {}",
                entry.name,
                entry.dims.len()
            )));
        }
        let expect: usize = entry.dims.iter().product();
        if expect != entry.data.len() {
            return Err(CheckpointError::Malformed(format!(
                "entry `{}`: shape {:?} needs {expect} elements, buffer holds {}",
                entry.name,
                entry.dims,
                entry.data.len()
            )));
        }
        let name = entry.name.as_bytes();
        let name_len = u32::try_from(name.len())
            .map_err(|_| CheckpointError::Malformed("name too long".to_string()))?;
        buf.extend_from_slice(&name_len.to_le_bytes());
        buf.extend_from_slice(name);
        buf.extend_from_slice(&(entry.dims.len() as u32).to_le_bytes());
        for &d in &entry.dims {
            let d = u32::try_from(d)
                .map_err(|_| CheckpointError::Malformed("dimension too large".to_string()))?;
            buf.extend_from_slice(&d.to_le_bytes());
        }
        buf.extend_from_slice(&(entry.data.len() as u64).to_le_bytes());
        for &v in &entry.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    fs::write(path, &buf)?;
    Ok(())
}

/// Sequential little-endian reader over a byte slice.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        if end > self.bytes.len() {
            return Err(CheckpointError::Truncated);
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("length checked")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("length checked")))
    }
}

/// Reads and verifies a checkpoint written by [`write_checkpoint`].
///
/// # Errors
///
/// Distinguishes a missing/unreadable file ([`CheckpointError::Io`]), a file
/// of some other format ([`CheckpointError::BadMagic`]), a short file
/// ([`CheckpointError::Truncated`]), corrupted content
/// ([`CheckpointError::HashMismatch`]), and structurally invalid content
/// ([`CheckpointError::Malformed`]).
pub fn read_checkpoint(path: &Path) -> Result<Vec<CheckpointEntry>, CheckpointError> {
    let bytes = fs::read(path)?;
    if bytes.len() < CHECKPOINT_MAGIC.len() + 4 + 32 {
        if bytes.len() >= CHECKPOINT_MAGIC.len()
            && !bytes.starts_with(CHECKPOINT_MAGIC)
        {
            return Err(CheckpointError::BadMagic);
        }
        return Err(CheckpointError::Truncated);
    }
    if !bytes.starts_with(CHECKPOINT_MAGIC) {
        return Err(CheckpointError::BadMagic);
    }
    let (content, stored_digest) = bytes.split_at(bytes.len() - 32);
    let digest = Sha256::digest(content);
    if digest.as_slice() != stored_digest {
        return Err(CheckpointError::HashMismatch);
    }

    let mut cursor = Cursor {
        bytes: content,
        pos: CHECKPOINT_MAGIC.len(),
    };
    let count = cursor.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = cursor.u32()? as usize;
        let name = std::str::from_utf8(cursor.take(name_len)?)
            .map_err(|_| CheckpointError::Malformed("name is not UTF-8".to_string()))?
            .to_string();
        let rank = cursor.u32()? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(CheckpointError::Malformed(format!(
                "entry `{name}` has rank {rank}"
            )));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cursor.u32()? as usize);
        }
        let len = usize::try_from(cursor.u64()?)
            .map_err(|_| CheckpointError::Malformed("element count overflow".to_string()))?;
        let expect: usize = dims.iter().product();
        if expect != len {
            return Err(CheckpointError::Malformed(format!(
                "entry `{name}`: shape {dims:?} disagrees with element count {len}"
            )));
        }
        let raw = cursor.take(len.checked_mul(4).ok_or(CheckpointError::Truncated)?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk size is 4")))
            .collect();
        entries.push(CheckpointEntry { name, dims, data });
    }
    if cursor.pos != content.len() {
        return Err(CheckpointError::Malformed(format!(
            "{} trailing bytes after the last entry",
            content.len() - cursor.pos
        )));
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_entries() -> Vec<CheckpointEntry> {
        vec![
            CheckpointEntry {
                name: "layer.weight".to_string(),
                dims: vec![2, 3],
                data: vec![1.0, -2.5, 0.0, 3.25, f32::MIN_POSITIVE, 1e30],
            },
            CheckpointEntry {
                name: "layer.bias".to_string(),
                dims: vec![2],
                data: vec![0.5, -0.5],
            },
        ]
    }

    #[test]
    fn round_trip_preserves_entries_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let entries = sample_entries();
        write_checkpoint(&path, &entries).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back, entries);
    }

    #[test]
    fn empty_checkpoint_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.ckpt");
        write_checkpoint(&path, &[]).unwrap();
        assert_eq!(read_checkpoint(&path).unwrap(), Vec::new());
    }

    #[test]
    fn corrupted_payload_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        write_checkpoint(&path, &sample_entries()).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x01;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_checkpoint(&path),
            Err(CheckpointError::HashMismatch)
        ));
    }

    #[test]
    fn truncated_file_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        write_checkpoint(&path, &sample_entries()).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 40]).unwrap();
        // Dropping 40 bytes removes the digest and part of the data, so this
        // surfaces as either truncation or a digest mismatch — never a panic
        // and never silent success.
        assert!(matches!(
            read_checkpoint(&path),
            Err(CheckpointError::HashMismatch | CheckpointError::Truncated)
        ));
    }

    #[test]
    fn foreign_file_is_rejected_by_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("not-a-checkpoint.bin");
        fs::write(&path, b"PNG-ish header plus enough bytes to pass the length check")
            .unwrap();
        assert!(matches!(
            read_checkpoint(&path),
            Err(CheckpointError::BadMagic)
        ));
    }

    #[test]
    fn missing_file_maps_to_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nope.ckpt");
        assert!(matches!(read_checkpoint(&path), Err(CheckpointError::Io(_))));
    }

    #[test]
    fn mismatched_dims_are_rejected_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        let bad = CheckpointEntry {
            name: "w".to_string(),
            dims: vec![2, 2],
            data: vec![0.0; 3],
        };
        assert!(matches!(
            write_checkpoint(&path, &[bad]),
            Err(CheckpointError::Malformed(_))
        ));
    }
}
