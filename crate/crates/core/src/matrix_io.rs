//! Dense matrix files exchanged between the simulator and the entropy probe.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! offset 0   8 bytes  magic "C3EMAT01"
//! offset 8   u32      rows
//! offset 12  u32      cols
//! offset 16  f64 × rows·cols, row-major
//! ```
//!
//! Text matrices have one row per line with whitespace-separated values;
//! blank lines and lines starting with `#` are ignored.

use std::fs;
use std::path::Path;

use crate::entropy::MatrixSample;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"C3EMAT01";
const HEADER_LEN: usize = 16;

pub fn encode_binary(rows: usize, cols: usize, values: &[f64]) -> Result<Vec<u8>> {
    let r = u32::try_from(rows).map_err(|_| Error::invalid("row count exceeds u32"))?;
    let c = u32::try_from(cols).map_err(|_| Error::invalid("column count exceeds u32"))?;
    if values.len() != rows * cols {
        return Err(Error::invalid("value count does not match shape"));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&r.to_le_bytes());
    out.extend_from_slice(&c.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_binary(bytes: &[u8], label: &str) -> Result<MatrixSample> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(Error::invalid(format!("{label}: not a binary matrix file")));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * rows * cols {
        return Err(Error::invalid(format!(
            "{label}: expected {} payload bytes for {rows}x{cols}, found {}",
            8 * rows * cols,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    MatrixSample::new(rows, cols, values, label)
}

pub fn parse_text(text: &str, label: &str) -> Result<MatrixSample> {
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut cols: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: label.to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Parse {
                    path: label.to_string(),
                    line: i + 1,
                    message: format!("row has {} values, expected {c}", row.len()),
                })
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let Some(cols) = cols else {
        return Err(Error::Empty(label.to_string()));
    };
    MatrixSample::new(rows, cols, values, label)
}

/// Reads either format, sniffing the magic bytes.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<MatrixSample> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let label = path.display().to_string();
    if bytes.starts_with(MAGIC) {
        decode_binary(&bytes, &label)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::invalid(format!("{label}: neither a binary nor a text matrix")))?;
        parse_text(&text, &label)
    }
}

pub fn write_binary(path: impl AsRef<Path>, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_binary(rows, cols, values)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn text_matrix() {
        let m = parse_text("# header\n1 2 3\n\n4 5 6\n", "t").unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m.values(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(matches!(parse_text("1 2\n3\n", "t"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_text("# only\n", "t"), Err(Error::Empty(_))));
    }

    #[test]
    fn binary_rejects_truncated_payload() {
        let mut bytes = encode_binary(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        bytes.pop();
        assert!(decode_binary(&bytes, "t").is_err());
        assert!(decode_binary(b"nope", "t").is_err());
    }

    proptest! {
        #[test]
        fn binary_round_trip(rows in 1usize..6, cols in 1usize..6, seed in proptest::collection::vec(-1e6f64..1e6, 36)) {
            let values: Vec<f64> = seed[..rows * cols].to_vec();
            let bytes = encode_binary(rows, cols, &values).unwrap();
            let back = decode_binary(&bytes, "p").unwrap();
            prop_assert_eq!(back.shape(), (rows, cols));
            prop_assert_eq!(back.values(), &values[..]);
        }
    }
}
