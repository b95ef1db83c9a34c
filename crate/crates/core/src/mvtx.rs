//! MVTX: a binary single-matrix container.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 4    | magic `MVTX`                   |
//! | 4      | 2    | version (`1`)                  |
//! | 6      | 4    | row count                      |
//! | 10     | 4    | dim                            |
//! | 14     | 1    | dtype (`1` = f32)              |
//! | 15     | 7    | reserved, zero                 |
//! | 22     | 4·r·d| row-major f32 payload          |
//! | end-4  | 4    | CRC-32 (IEEE) of the payload   |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::TokenMatrix;

pub const MAGIC: &[u8; 4] = b"MVTX";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 1;
pub const HEADER_LEN: usize = 22;
pub const TRAILER_LEN: usize = 4;

/// Serialized size of a `rows x dim` matrix.
pub fn encoded_len(rows: usize, dim: usize) -> usize {
    HEADER_LEN + rows * dim * 4 + TRAILER_LEN
}

pub fn encode(m: &TokenMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_len(m.rows(), m.dim()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    out.push(DTYPE_F32);
    out.extend_from_slice(&[0u8; 7]);
    for x in m.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[HEADER_LEN..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Parses an MVTX buffer. `path` is only used to label errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<TokenMatrix> {
    let fail = |reason: String| Error::format(path, reason);
    if bytes.len() < HEADER_LEN + TRAILER_LEN {
        return Err(fail(format!("truncated: {} bytes", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(fail("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(fail(format!("unsupported version {version}")));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    if bytes[14] != DTYPE_F32 {
        return Err(fail(format!("unsupported dtype tag {}", bytes[14])));
    }
    if bytes[15..HEADER_LEN].iter().any(|&b| b != 0) {
        return Err(fail("reserved bytes are not zero".into()));
    }
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN + TRAILER_LEN))
        .ok_or_else(|| fail("shape overflows".into()))?;
    if bytes.len() != expected {
        return Err(fail(format!(
            "length {} does not match {rows}x{dim} (expected {expected})",
            bytes.len()
        )));
    }
    let payload = &bytes[HEADER_LEN..bytes.len() - TRAILER_LEN];
    let stored = u32::from_le_bytes(bytes[bytes.len() - TRAILER_LEN..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    TokenMatrix::new(rows, dim, data).map_err(|e| fail(e.to_string()))
}

pub fn read(path: &Path) -> Result<TokenMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn write(path: &Path, m: &TokenMatrix) -> Result<()> {
    fs::write(path, encode(m)).map_err(|e| Error::io(path, e))
}
