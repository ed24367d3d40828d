//! Flat little-endian checkpoint format.
//!
//! ```text
//! u64 layer_count
//! u64 d_in, u64 d_out        (per layer)
//! f64 × d_in·d_out  weights  (per layer, row-major, then)
//! f64 × d_out       bias
//! ```
//!
//! The activation is not stored; callers supply it when loading.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gnn::model::{Activation, GnnLayer, GnnModel};
use crate::linalg::DenseMatrix;

pub fn encode(model: &GnnModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(model.depth() as u64).to_le_bytes());
    for l in model.layers() {
        out.extend_from_slice(&(l.d_in() as u64).to_le_bytes());
        out.extend_from_slice(&(l.d_out() as u64).to_le_bytes());
    }
    for l in model.layers() {
        for v in l.weight.as_slice().iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take8(&mut self) -> Result<[u8; 8]> {
        let chunk = self
            .bytes
            .get(self.pos..self.pos + 8)
            .ok_or_else(|| Error::Format("checkpoint truncated".into()))?;
        self.pos += 8;
        Ok(chunk.try_into().expect("8 bytes"))
    }

    fn u64(&mut self) -> Result<usize> {
        usize::try_from(u64::from_le_bytes(self.take8()?))
            .map_err(|_| Error::Format("dimension does not fit in usize".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n)
            .map(|_| Ok(f64::from_le_bytes(self.take8()?)))
            .collect()
    }
}

pub fn decode(bytes: &[u8], activation: Activation) -> Result<GnnModel> {
    let mut r = Reader { bytes, pos: 0 };
    let depth = r.u64()?;
    if depth == 0 || depth > 1 << 16 {
        return Err(Error::Format(format!("implausible layer count {depth}")));
    }
    let dims = (0..depth)
        .map(|_| Ok((r.u64()?, r.u64()?)))
        .collect::<Result<Vec<_>>>()?;
    let expected: usize = dims.iter().map(|(i, o)| i * o + o).sum();
    if bytes.len() != 8 * (1 + 2 * depth + expected) {
        return Err(Error::Format(format!(
            "checkpoint has {} bytes, header implies {}",
            bytes.len(),
            8 * (1 + 2 * depth + expected)
        )));
    }
    let mut layers = Vec::with_capacity(depth);
    for (d_in, d_out) in dims {
        let weight = DenseMatrix::new(d_in, d_out, r.f64s(d_in * d_out)?)
            .map_err(|e| Error::Format(e.to_string()))?;
        let bias = r.f64s(d_out)?;
        layers.push(GnnLayer { weight, bias });
    }
    GnnModel::new(layers, activation).map_err(|e| Error::Format(e.to_string()))
}

pub fn save(path: &Path, model: &GnnModel) -> Result<()> {
    fs::write(path, encode(model))?;
    Ok(())
}

pub fn load(path: &Path, activation: Activation) -> Result<GnnModel> {
    decode(&fs::read(path)?, activation)
}
