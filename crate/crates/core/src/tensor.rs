//! Dense row-major `f32` tensors and the `CPNT` binary layout.
//!
//! Layout, all little-endian, no padding and no footer:
//!
//! | bytes            | content                         |
//! |------------------|---------------------------------|
//! | 0..4             | magic `b"CPNT"`                 |
//! | 4                | version, `0x01`                 |
//! | 5..9             | rank as `u32`                   |
//! | 9..9+4·rank      | extents as `u32`                |
//! | then             | `∏ extents` IEEE-754 `f32`      |

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, FormatError, Result};

pub const MAGIC: [u8; 4] = *b"CPNT";
pub const VERSION: u8 = 1;
const HEADER_FIXED: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let len = checked_len(&shape)?;
        if data.len() != len {
            return Err(Error::arg(alloc::format!(
                "data length {} does not match shape {:?} ({} elements)",
                data.len(),
                shape,
                len
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let len = checked_len(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        })
    }

    pub fn filled(shape: &[usize], value: f32) -> Result<Self> {
        let mut t = Self::zeros(shape)?;
        t.data.fill(value);
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false: zero extents are rejected at construction.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// `(C, H, W)` of a rank-3 tensor.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::arg(alloc::format!(
                "expected a rank-3 tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    #[inline]
    pub fn at3(&self, c: usize, i: usize, j: usize) -> f32 {
        let (h, w) = (self.shape[1], self.shape[2]);
        self.data[(c * h + i) * w + j]
    }

    #[inline]
    pub fn set3(&mut self, c: usize, i: usize, j: usize, v: f32) {
        let (h, w) = (self.shape[1], self.shape[2]);
        self.data[(c * h + i) * w + j] = v;
    }

    /// Contiguous `H·W` plane of channel `c` in a rank-3 tensor.
    pub fn plane(&self, c: usize) -> &[f32] {
        let hw = self.shape[1] * self.shape[2];
        &self.data[c * hw..(c + 1) * hw]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let hw = self.shape[1] * self.shape[2];
        &mut self.data[c * hw..(c + 1) * hw]
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_FIXED + 4 * self.shape.len() + 4 * self.data.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for &e in &self.shape {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format(0, FormatError::BadMagic));
        }
        let version = r.take(1)?[0];
        if version != VERSION {
            return Err(Error::format(4, FormatError::UnsupportedVersion(version)));
        }
        let rank_at = r.pos;
        let rank = r.u32()? as usize;
        if rank == 0 {
            return Err(Error::format(rank_at, FormatError::ZeroExtent));
        }
        let mut shape = Vec::with_capacity(rank.min(64));
        let mut count: usize = 1;
        for _ in 0..rank {
            let at = r.pos;
            let e = r.u32()? as usize;
            if e == 0 {
                return Err(Error::format(at, FormatError::ZeroExtent));
            }
            count = count
                .checked_mul(e)
                .filter(|c| c.checked_mul(4).is_some())
                .ok_or(Error::format(at, FormatError::ExtentOverflow))?;
            shape.push(e);
        }
        let payload = r.take(count * 4)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if r.pos != bytes.len() {
            return Err(Error::format(
                r.pos,
                FormatError::TrailingBytes(bytes.len() - r.pos),
            ));
        }
        Ok(Tensor { shape, data })
    }
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::arg("tensor rank must be at least 1"));
    }
    if shape.iter().any(|&e| e == 0) {
        return Err(Error::arg(alloc::format!("zero extent in shape {shape:?}")));
    }
    if shape.iter().any(|&e| e > u32::MAX as usize) {
        return Err(Error::arg("extent does not fit in u32"));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| Error::arg("element count overflows"))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(Error::format(
                self.pos,
                FormatError::Truncated {
                    needed: n,
                    available,
                },
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
