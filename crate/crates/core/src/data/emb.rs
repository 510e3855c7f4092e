//! Reader and writer for the `EMB1` embedding matrix format.
//!
//! Layout, all little-endian, no padding:
//!
//! ```text
//! b"EMB1" | u32 rows | u32 cols | rows * cols f32 values, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"EMB1";
const HEADER_LEN: u64 = 12;

/// Encodes a matrix into the `EMB1` byte layout.
pub fn encode(rows: ArrayView2<'_, f32>) -> Result<Vec<u8>> {
    let (n, d) = rows.dim();
    let n32 = u32::try_from(n).map_err(|_| Error::Shape(format!("{n} rows exceed u32")))?;
    let d32 = u32::try_from(d).map_err(|_| Error::Shape(format!("{d} columns exceed u32")))?;
    let mut buf = Vec::with_capacity(HEADER_LEN as usize + 4 * n * d);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&n32.to_le_bytes());
    buf.extend_from_slice(&d32.to_le_bytes());
    for v in rows.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

/// Decodes an `EMB1` byte buffer. `path` is only used for error messages.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Array2<f32>> {
    if bytes.len() < HEADER_LEN as usize {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: HEADER_LEN,
            found: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: magic,
        });
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN as usize..];
    let expected = 4 * (n as u64) * (d as u64);
    let found = payload.len() as u64;
    if found < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    if found > expected {
        return Err(Error::TrailingBytes {
            path: path.to_path_buf(),
            extra: found - expected,
        });
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec((n, d), values).expect("length checked above"))
}

pub fn write_emb(path: &Path, rows: ArrayView2<'_, f32>) -> Result<()> {
    let bytes = encode(rows)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_emb(path: &Path) -> Result<Array2<f32>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
