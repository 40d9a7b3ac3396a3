//! Binary encoding export.
//!
//! Layout, all little-endian:
//!
//! ```text
//! u32 n        number of posts
//! u32 m_max    longest sequence in the batch
//! u32 d        vector dimension
//! f32 data[n][m_max][d]   row-major, shorter sequences zero-padded
//! ```

use std::io::{Read, Write};

use super::Encoding;

#[derive(Clone, Debug, PartialEq)]
pub struct EncodingTensor {
    pub n: usize,
    pub m_max: usize,
    pub d: usize,
    pub data: Vec<f32>,
}

impl EncodingTensor {
    pub fn row(&self, post: usize, position: usize) -> &[f32] {
        let start = (post * self.m_max + position) * self.d;
        &self.data[start..start + self.d]
    }
}

pub fn write_encodings<W: Write>(encodings: &[Encoding], mut w: W) -> std::io::Result<()> {
    let n = encodings.len();
    let m_max = encodings
        .iter()
        .map(|e| e.sequence.nrows())
        .max()
        .unwrap_or(0);
    let d = encodings.first().map_or(0, |e| e.dim());
    if encodings.iter().any(|e| e.dim() != d) {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "encodings differ in dimension",
        ));
    }
    for v in [n, m_max, d] {
        let v = u32::try_from(v).map_err(|_| {
            std::io::Error::new(std::io::ErrorKind::InvalidInput, "dimension exceeds u32")
        })?;
        w.write_all(&v.to_le_bytes())?;
    }
    let zero_row = vec![0u8; d * 4];
    for e in encodings {
        for row in e.sequence.outer_iter() {
            for x in row.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        for _ in e.sequence.nrows()..m_max {
            w.write_all(&zero_row)?;
        }
    }
    w.flush()
}

pub fn read_encodings<R: Read>(mut r: R) -> std::io::Result<EncodingTensor> {
    let mut header = [0u8; 12];
    r.read_exact(&mut header)?;
    let field = |i: usize| {
        u32::from_le_bytes(header[i * 4..i * 4 + 4].try_into().expect("4 bytes")) as usize
    };
    let (n, m_max, d) = (field(0), field(1), field(2));
    let mut bytes = vec![0u8; n * m_max * d * 4];
    r.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(EncodingTensor { n, m_max, d, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    #[test]
    fn layout_is_header_then_padded_rows() {
        let a = Encoding {
            pooled: Array1::from(vec![1.0, 2.0]),
            sequence: array![[1.0, 2.0], [3.0, 4.0]],
        };
        let b = Encoding {
            pooled: Array1::from(vec![5.0, 6.0]),
            sequence: array![[5.0, 6.0]],
        };
        let mut buf = Vec::new();
        write_encodings(&[a, b], &mut buf).unwrap();
        assert_eq!(buf.len(), 12 + 2 * 2 * 2 * 4);
        assert_eq!(&buf[..4], &2u32.to_le_bytes());
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(&buf[8..12], &2u32.to_le_bytes());
        assert_eq!(&buf[12..16], &1.0f32.to_le_bytes());
        let t = read_encodings(buf.as_slice()).unwrap();
        assert_eq!(t.row(0, 1), &[3.0, 4.0]);
        assert_eq!(t.row(1, 0), &[5.0, 6.0]);
        assert_eq!(t.row(1, 1), &[0.0, 0.0]);
    }
}
