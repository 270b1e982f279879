//! Binary checkpoint codec (little-endian).
//!
//! ```text
//! "AFCK" | u32 version | u64 seed | u32 epoch | u32 concat order (0 = image first)
//! 3 x (u32 n_dims | n_dims x u32)          image, music, fusion stacks
//! f32 blobs: image mean, image inv_std, music mean, music inv_std
//! f32 blobs: W, b for every layer, image then music then fusion
//! ```

use std::path::Path;

use super::{branch_layout, fusion_layout, AcpModel, Architecture, InputNorm};
use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};
use crate::neural::{Activation, DenseLayer, Mlp};

pub const CKPT_MAGIC: &[u8; 4] = b"AFCK";
pub const CKPT_VERSION: u32 = 1;
const CONCAT_IMAGE_FIRST: u32 = 0;

/// Training provenance stored next to the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epoch: u32,
}

/// Serialized checkpoint.
pub fn checkpoint_bytes(model: &AcpModel<f32>, meta: CheckpointMeta) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(CKPT_MAGIC);
    w.u32(CKPT_VERSION);
    w.u64(meta.seed);
    w.u32(meta.epoch);
    w.u32(CONCAT_IMAGE_FIRST);
    let arch = model.architecture();
    for dims in [&arch.image, &arch.music, &arch.fusion] {
        w.u32(dims.len() as u32);
        dims.iter().for_each(|&d| w.u32(d as u32));
    }
    for norm in [&model.image_norm, &model.music_norm] {
        w.f32s(&norm.mean);
        w.f32s(&norm.inv_std);
    }
    for p in model.params() {
        w.f32s(p);
    }
    w.into_inner()
}

fn read_stack(r: &mut ByteReader, dims: &[usize], acts: Vec<Activation>, dropout: Vec<bool>) -> Result<Mlp<f32>> {
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for pair in dims.windows(2) {
        let (i, o) = (pair[0], pair[1]);
        let n = i.checked_mul(o).ok_or_else(|| Error::format("layer size overflow"))?;
        let weights = r.f32s(n)?;
        let bias = r.f32s(o)?;
        layers.push(DenseLayer::new(i, o, weights, bias)?);
    }
    Mlp::new(layers, acts, dropout)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<(AcpModel<f32>, CheckpointMeta)> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != CKPT_MAGIC {
        return Err(Error::format("not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != CKPT_VERSION {
        return Err(Error::format(format!("unsupported checkpoint version {version}")));
    }
    let meta = CheckpointMeta { seed: r.u64()?, epoch: r.u32()? };
    let order = r.u32()?;
    if order != CONCAT_IMAGE_FIRST {
        return Err(Error::format(format!("unknown concatenation order {order}")));
    }
    let mut stacks = Vec::with_capacity(3);
    for _ in 0..3 {
        let n = r.u32()? as usize;
        if n > 64 {
            return Err(Error::format(format!("implausible layer count {n}")));
        }
        stacks.push((0..n).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?);
    }
    let fusion = stacks.pop().unwrap();
    let music = stacks.pop().unwrap();
    let image = stacks.pop().unwrap();
    let arch = Architecture::new(image, music, fusion).map_err(|e| Error::format(format!("bad architecture descriptor: {e}")))?;
    let mut norm = |dim: usize| -> Result<InputNorm<f32>> { Ok(InputNorm { mean: r.f32s(dim)?, inv_std: r.f32s(dim)? }) };
    let image_norm = norm(arch.image[0])?;
    let music_norm = norm(arch.music[0])?;
    let (ia, id) = branch_layout(arch.image.len() - 1);
    let (ma, md) = branch_layout(arch.music.len() - 1);
    let (fa, fd) = fusion_layout(arch.fusion.len() - 1);
    let image_stack = read_stack(&mut r, &arch.image, ia, id)?;
    let music_stack = read_stack(&mut r, &arch.music, ma, md)?;
    let fusion_stack = read_stack(&mut r, &arch.fusion, fa, fd)?;
    if !r.is_empty() {
        return Err(Error::format("trailing bytes after checkpoint"));
    }
    let model = AcpModel::from_parts(arch, image_norm, music_norm, image_stack, music_stack, fusion_stack)?;
    Ok((model, meta))
}

pub fn save_checkpoint(path: &Path, model: &AcpModel<f32>, meta: CheckpointMeta) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(model, meta))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(AcpModel<f32>, CheckpointMeta)> {
    checkpoint_from_bytes(&std::fs::read(path)?)
}

/// Loads a checkpoint and insists on a particular architecture.
pub fn load_checkpoint_expecting(path: &Path, expected: &Architecture) -> Result<(AcpModel<f32>, CheckpointMeta)> {
    let (model, meta) = load_checkpoint(path)?;
    if model.architecture() != expected {
        return Err(Error::format(format!("checkpoint architecture [{}] does not match requested [{expected}]", model.architecture())));
    }
    Ok((model, meta))
}
