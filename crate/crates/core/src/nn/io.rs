//! The "TCNN1" parameter file.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! b"TCNN1"  u32 record_count
//! record := u32 kind  u32 weight_rank  u32 dims[weight_rank]
//!                     u32 bias_rank    u32 dims[bias_rank]
//!           f32 weights[..]  f32 biases[..]
//! ```

use std::io::{Read, Write};

use super::layers::LayerParams;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"TCNN1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum LayerKind {
    Conv = 1,
    Deconv = 2,
    Linear = 3,
}

impl TryFrom<u32> for LayerKind {
    type Error = Error;

    fn try_from(tag: u32) -> Result<Self> {
        match tag {
            1 => Ok(Self::Conv),
            2 => Ok(Self::Deconv),
            3 => Ok(Self::Linear),
            other => Err(Error::ModelFormat(format!("unknown layer kind tag {other}"))),
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::ModelFormat(e.to_string())
}

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(io_err)
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u32::from_le_bytes(b))
}

fn put_shape(w: &mut impl Write, shape: &[usize]) -> Result<()> {
    put_u32(w, shape.len() as u32)?;
    shape.iter().try_for_each(|&d| put_u32(w, d as u32))
}

fn get_shape(r: &mut impl Read) -> Result<Vec<usize>> {
    let rank = get_u32(r)? as usize;
    if rank == 0 || rank > 4 {
        return Err(Error::ModelFormat(format!("tensor rank {rank} out of range")));
    }
    (0..rank).map(|_| get_u32(r).map(|d| d as usize)).collect()
}

fn put_reals(w: &mut impl Write, t: &Tensor) -> Result<()> {
    let mut buf = Vec::with_capacity(t.len() * 4);
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

fn get_reals(r: &mut impl Read, shape: &[usize]) -> Result<Tensor> {
    let len: usize = shape.iter().product();
    if len > 1 << 28 {
        return Err(Error::ModelFormat(format!(
            "tensor of {len} values is implausibly large"
        )));
    }
    let mut buf = vec![0u8; len * 4];
    r.read_exact(&mut buf).map_err(io_err)?;
    let data = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor::new(shape, data)
}

pub fn write_records(w: &mut impl Write, records: &[(LayerKind, &LayerParams)]) -> Result<()> {
    w.write_all(MAGIC).map_err(io_err)?;
    put_u32(w, records.len() as u32)?;
    for (kind, p) in records {
        put_u32(w, *kind as u32)?;
        put_shape(w, p.weights.shape())?;
        put_shape(w, p.biases.shape())?;
        put_reals(w, &p.weights)?;
        put_reals(w, &p.biases)?;
    }
    Ok(())
}

pub fn read_records(r: &mut impl Read) -> Result<Vec<(LayerKind, LayerParams)>> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(Error::ModelFormat("missing TCNN1 magic".into()));
    }
    let count = get_u32(r)?;
    let mut out = Vec::new();
    for _ in 0..count {
        let kind = LayerKind::try_from(get_u32(r)?)?;
        let ws = get_shape(r)?;
        let bs = get_shape(r)?;
        let weights = get_reals(r, &ws)?;
        let biases = get_reals(r, &bs)?;
        out.push((kind, LayerParams::from_tensors(weights, biases)));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(io_err)? != 0 {
        return Err(Error::ModelFormat("trailing bytes after last record".into()));
    }
    Ok(out)
}
