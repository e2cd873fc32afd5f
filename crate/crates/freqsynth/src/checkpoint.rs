//! Model checkpoints: the network configuration followed by named parameter
//! records, optionally with a discriminator.
//!
//! Layout (little-endian): magic `FSC1`, version `u32 = 1`, base kind `u8`,
//! channels, depth, input channels and refinement width as `u32`, head `u8`,
//! discriminator flag `u8` (then its channels and depth as `u32`), and one or
//! two record sections. A section is a `u32` count followed by records of
//! `name_len u32, name bytes, rank u32, extents u32[rank], f32 payload`.

use std::fs;
use std::path::Path;

use freqsynth_core::adversarial::{Discriminator, DiscriminatorConfig};
use freqsynth_core::network::{
    BaseKind, BaseNetworkConfig, HeadKind, Init, ModelConfig, ParamSet, SynthesisModel,
};

use crate::bytes::{put_f32s, put_u32, Reader};
use crate::error::{Error, FormatError, FormatErrorKind, Result};

pub const MAGIC: &[u8; 4] = b"FSC1";
pub const VERSION: u32 = 1;

const MAX_WIDTH: usize = 4096;
const MAX_DEPTH: usize = 16;
const MAX_K: usize = 255;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: SynthesisModel<f32>,
    pub discriminator: Option<Discriminator<f32>>,
}

fn u32_of(n: usize) -> u32 {
    u32::try_from(n).expect("value exceeds u32")
}

fn put_records(out: &mut Vec<u8>, params: &ParamSet<f32>) {
    put_u32(out, u32_of(params.len()));
    for (name, t) in params.iter() {
        put_u32(out, u32_of(name.len()));
        out.extend_from_slice(name.as_bytes());
        put_u32(out, u32_of(t.shape().len()));
        for &e in t.shape() {
            put_u32(out, u32_of(e));
        }
        put_f32s(out, t.data());
    }
}

pub fn encode_checkpoint(model: &SynthesisModel<f32>, disc: Option<&Discriminator<f32>>) -> Vec<u8> {
    let cfg = model.config();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    out.push(match cfg.base.kind {
        BaseKind::FcNet => 0,
        BaseKind::UNet => 1,
    });
    put_u32(&mut out, u32_of(cfg.base.channels));
    put_u32(&mut out, u32_of(cfg.base.depth));
    put_u32(&mut out, u32_of(cfg.base.input_channels));
    put_u32(&mut out, u32_of(cfg.refine_k));
    out.push(match cfg.head {
        HeadKind::FrequencySupervised => 0,
        HeadKind::OverallOnly => 1,
    });
    match disc {
        Some(d) => {
            out.push(1);
            put_u32(&mut out, u32_of(d.config().channels));
            put_u32(&mut out, u32_of(d.config().depth));
        }
        None => out.push(0),
    }
    put_records(&mut out, model.params());
    if let Some(d) = disc {
        put_records(&mut out, d.params());
    }
    out
}

/// Reads one record section into `params`, which must already hold exactly
/// the same names and shapes.
fn read_records(r: &mut Reader<'_>, params: &mut ParamSet<f32>) -> Result<(), FormatError> {
    let at = r.offset();
    let count = r.u32()? as usize;
    if count != params.len() {
        return Err(FormatError::invalid(
            at,
            format!("expected {} parameter records, found {count}", params.len()),
        ));
    }
    let mut seen = vec![false; params.len()];
    for _ in 0..count {
        let rec = r.offset();
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| FormatError::invalid(rec + 4, "parameter name is not UTF-8"))?
            .to_owned();
        let i = params
            .find(&name)
            .ok_or_else(|| FormatError::invalid(rec, format!("unexpected parameter {name:?}")))?;
        if seen[i] {
            return Err(FormatError::invalid(rec, format!("duplicate parameter {name:?}")));
        }
        seen[i] = true;
        let rank_at = r.offset();
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(FormatError::invalid(rank_at, format!("rank {rank} is too large")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        if shape != params.get(i).shape() {
            return Err(FormatError::invalid(
                rank_at,
                format!(
                    "parameter {name:?} has shape {shape:?}, expected {:?}",
                    params.get(i).shape()
                ),
            ));
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &e| a.checked_mul(e))
            .ok_or_else(|| FormatError::new(rank_at, FormatErrorKind::DimensionOverflow))?;
        let data = r.f32s(n)?;
        params.get_mut(i).data_mut().copy_from_slice(&data);
    }
    Ok(())
}

fn read_u32_usize(r: &mut Reader<'_>) -> Result<usize, FormatError> {
    Ok(r.u32()? as usize)
}

pub fn decode_checkpoint(buf: &[u8]) -> Result<Checkpoint, FormatError> {
    let mut r = Reader::new(buf);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::new(4, FormatErrorKind::UnsupportedVersion(version)));
    }
    let kind = match r.u8()? {
        0 => BaseKind::FcNet,
        1 => BaseKind::UNet,
        b => return Err(FormatError::invalid(8, format!("unknown base network kind {b}"))),
    };
    let base = BaseNetworkConfig {
        kind,
        channels: read_u32_usize(&mut r)?,
        depth: read_u32_usize(&mut r)?,
        input_channels: read_u32_usize(&mut r)?,
    };
    let refine_k = read_u32_usize(&mut r)?;
    let head_at = r.offset();
    let head = match r.u8()? {
        0 => HeadKind::FrequencySupervised,
        1 => HeadKind::OverallOnly,
        b => return Err(FormatError::invalid(head_at, format!("unknown head kind {b}"))),
    };
    let config = ModelConfig { base, refine_k, head };
    if base.channels > MAX_WIDTH || base.input_channels > MAX_WIDTH || base.depth > MAX_DEPTH || refine_k > MAX_K {
        return Err(FormatError::invalid(8, "network configuration out of range"));
    }
    let mut model = SynthesisModel::<f32>::new(config, Init::Zeros)
        .map_err(|e| FormatError::invalid(8, e.to_string()))?;
    let flag_at = r.offset();
    let disc_config = match r.u8()? {
        0 => None,
        1 => Some(DiscriminatorConfig {
            channels: read_u32_usize(&mut r)?,
            depth: read_u32_usize(&mut r)?,
        }),
        b => return Err(FormatError::invalid(flag_at, format!("bad discriminator flag {b}"))),
    };
    if disc_config.is_some_and(|c| c.channels > MAX_WIDTH || c.depth > MAX_DEPTH) {
        return Err(FormatError::invalid(flag_at, "discriminator configuration out of range"));
    }
    let mut discriminator = disc_config
        .map(|c| Discriminator::<f32>::new(c, None))
        .transpose()
        .map_err(|e| FormatError::invalid(flag_at, e.to_string()))?;
    read_records(&mut r, model.params_mut())?;
    if let Some(d) = &mut discriminator {
        read_records(&mut r, d.params_mut())?;
    }
    r.finish()?;
    Ok(Checkpoint { model, discriminator })
}

pub fn save_checkpoint(
    model: &SynthesisModel<f32>,
    disc: Option<&Discriminator<f32>>,
    path: &Path,
) -> Result<()> {
    fs::write(path, encode_checkpoint(model, disc)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&buf).map_err(|e| Error::format(path, e))
}
