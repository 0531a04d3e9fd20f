//! Raw tensor files: `DYT1`, rank, dims and dtype code as little-endian u32,
//! then the row-major little-endian payload.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::neighborhood::{OffsetField, DEFORMABLE_RINGS, DEFORMABLE_SLOTS};
use crate::volume::{AffinityVolume, AttentionStack};

pub const MAGIC: &[u8; 4] = b"DYT1";

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn code(&self) -> u32 {
        match self {
            TensorData::F32(_) => 0,
            TensorData::F64(_) => 1,
        }
    }

    /// Values widened to f64 (exact for f32).
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TensorData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawTensor {
    dims: Vec<usize>,
    data: TensorData,
}

fn element_count(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

impl RawTensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        if dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::Format(format!("dimension exceeds u32 range in {dims:?}")));
        }
        let n = element_count(&dims).ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
        if n != data.len() {
            return Err(Error::shape(
                "tensor payload",
                format!("{n} values for dims {dims:?}"),
                data.len(),
            ));
        }
        Ok(Self { dims, data })
    }

    pub fn f64(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        Self::new(dims, TensorData::F64(values))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn encode(&self) -> Vec<u8> {
        let elem = match self.data {
            TensorData::F32(_) => 4,
            TensorData::F64(_) => 8,
        };
        let mut out = Vec::with_capacity(12 + 4 * self.dims.len() + elem * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.data.code().to_le_bytes());
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4, "magic")? != MAGIC {
            return Err(Error::Format("bad magic (expected DYT1)".into()));
        }
        let rank = cur.u32("rank")? as usize;
        // each dim takes four bytes, so a rank larger than the file is truncated
        if rank > bytes.len() / 4 {
            return Err(Error::Format(format!(
                "truncated header: rank {rank} with {} bytes",
                bytes.len()
            )));
        }
        let dims = (0..rank)
            .map(|_| cur.u32("dims").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let code = cur.u32("dtype")?;
        let n = element_count(&dims).ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
        let size = match code {
            0 => 4,
            1 => 8,
            other => return Err(Error::Format(format!("unknown dtype code {other}"))),
        };
        let need = n
            .checked_mul(size)
            .ok_or_else(|| Error::Format("payload size overflow".into()))?;
        let remaining = bytes.len() - cur.pos;
        if remaining < need {
            return Err(Error::Format(format!(
                "truncated payload: dims {dims:?} need {need} bytes, {remaining} present"
            )));
        }
        if remaining > need {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                remaining - need
            )));
        }
        let payload = &bytes[cur.pos..];
        let data = if size == 4 {
            TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )
        } else {
            TensorData::F64(
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )
        };
        Self::new(dims, data)
    }

    fn expect_dims(&self, what: &str, expected: &[usize]) -> Result<()> {
        if self.dims != expected {
            return Err(Error::shape(
                what,
                format!("dims {expected:?}"),
                format!("{:?}", self.dims),
            ));
        }
        Ok(())
    }

    fn expect_rank(&self, what: &str, rank: usize, layout: &str) -> Result<()> {
        if self.dims.len() != rank {
            return Err(Error::shape(
                what,
                format!("rank {rank} {layout}"),
                format!("dims {:?}", self.dims),
            ));
        }
        Ok(())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!("truncated header while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

// Conversions for the core types. Writers always emit f64; readers accept both.

impl From<&Grid> for RawTensor {
    fn from(g: &Grid) -> Self {
        Self {
            dims: vec![g.height(), g.width()],
            data: TensorData::F64(g.values().to_vec()),
        }
    }
}

impl From<&AffinityVolume> for RawTensor {
    fn from(a: &AffinityVolume) -> Self {
        let (h, w) = a.dims();
        Self {
            dims: vec![a.neighbors(), h, w],
            data: TensorData::F64(a.weights().to_vec()),
        }
    }
}

impl From<&AttentionStack> for RawTensor {
    fn from(a: &AttentionStack) -> Self {
        let (h, w) = a.dims();
        Self {
            dims: vec![a.steps(), a.rings(), h, w],
            data: TensorData::F64(a.values().to_vec()),
        }
    }
}

impl From<&OffsetField> for RawTensor {
    fn from(o: &OffsetField) -> Self {
        let (h, w) = o.dims();
        Self {
            dims: vec![DEFORMABLE_RINGS, DEFORMABLE_SLOTS, 2, h, w],
            data: TensorData::F64(o.values().to_vec()),
        }
    }
}

impl RawTensor {
    pub fn to_grid(&self) -> Result<Grid> {
        self.expect_rank("grid tensor", 2, "[H, W]")?;
        Grid::new(self.dims[0], self.dims[1], self.data.to_f64())
    }

    pub fn to_affinity(&self) -> Result<AffinityVolume> {
        self.expect_rank("affinity tensor", 3, "[K, H, W]")?;
        AffinityVolume::new(self.dims[0], self.dims[1], self.dims[2], self.data.to_f64())
    }

    pub fn to_attention(&self) -> Result<AttentionStack> {
        self.expect_rank("attention tensor", 4, "[T, R+1, H, W]")?;
        let d = &self.dims;
        AttentionStack::new(d[0], d[1], d[2], d[3], self.data.to_f64())
    }

    /// Raw `[T, R+1, H, W]` values, for logits that still need activation.
    pub fn to_attention_logits(&self) -> Result<([usize; 4], Vec<f64>)> {
        self.expect_rank("attention tensor", 4, "[T, R+1, H, W]")?;
        let d = &self.dims;
        Ok(([d[0], d[1], d[2], d[3]], self.data.to_f64()))
    }

    pub fn to_offsets(&self) -> Result<OffsetField> {
        self.expect_rank("offset tensor", 5, "[rings, slots, 2, H, W]")?;
        let (h, w) = (self.dims[3], self.dims[4]);
        self.expect_dims("offset tensor", &[DEFORMABLE_RINGS, DEFORMABLE_SLOTS, 2, h, w])?;
        OffsetField::new(h, w, self.data.to_f64())
    }
}
