//! Binary checkpoint, all integers and floats little-endian:
//!
//! ```text
//! magic     "HNET1"
//! config    u32 length, UTF-8 backbone config text
//! tensors   u32 count, then per tensor:
//!             u32 name length, name, u32 rank, u64 dims…, f32 values…
//! state     u8 flag; when 1:
//!             u64 epoch, u64 seed, f64 best_val_acc, f64 best_val_loss,
//!             f64 lr, f64 decay, f64 beta1, f64 beta2, f64 eps, u64 step,
//!             f32 first moments then f32 second moments, one per tensor
//! ```

use super::model::SiameseModel;
use crate::autodiff::{AdamState, Tensor};
use crate::backbone::BackboneConfig;
use crate::error::{Error, Result};
use std::path::Path;

pub const MAGIC: &[u8; 5] = b"HNET1";

/// Optimizer and loop state needed to resume training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingState {
    /// Number of completed epochs.
    pub epoch: u64,
    pub seed: u64,
    pub best_val_acc: f64,
    pub best_val_loss: f64,
    pub adam: AdamState<f32>,
}

pub fn save_bytes(model: &SiameseModel, state: Option<&TrainingState>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let text = model.config().render();
    put_u32(&mut out, text.len());
    out.extend_from_slice(text.as_bytes());
    put_u32(&mut out, model.params().len());
    for (spec, t) in model.specs().iter().zip(model.params()) {
        put_u32(&mut out, spec.name.len());
        out.extend_from_slice(spec.name.as_bytes());
        put_u32(&mut out, t.shape().len());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        put_f32s(&mut out, t.data());
    }
    match state {
        None => out.push(0),
        Some(s) => {
            out.push(1);
            out.extend_from_slice(&s.epoch.to_le_bytes());
            out.extend_from_slice(&s.seed.to_le_bytes());
            for v in [s.best_val_acc, s.best_val_loss, s.adam.lr, s.adam.decay, s.adam.beta1, s.adam.beta2, s.adam.eps] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&s.adam.step.to_le_bytes());
            for t in s.adam.m.iter().chain(&s.adam.v) {
                put_f32s(&mut out, t.data());
            }
        }
    }
    out
}

pub fn save(model: &SiameseModel, state: Option<&TrainingState>, path: &Path) -> Result<()> {
    std::fs::write(path, save_bytes(model, state)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(SiameseModel, Option<TrainingState>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    load_bytes(&bytes)
}

pub fn load_bytes(bytes: &[u8]) -> Result<(SiameseModel, Option<TrainingState>)> {
    let mut r = Cursor { bytes, pos: 0 };
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic);
    }
    r.pos = MAGIC.len();
    let len = r.u32()? as usize;
    let text = std::str::from_utf8(r.take(len, "config text")?)
        .map_err(|_| Error::MalformedHeader("config text is not UTF-8".into()))?;
    let config = BackboneConfig::parse(text)?;
    let count = r.u32()? as usize;
    let mut params = Vec::with_capacity(count.min(1 << 16));
    let mut names = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let nlen = r.u32()? as usize;
        let name = String::from_utf8(r.take(nlen, "tensor name")?.to_vec())
            .map_err(|_| Error::MalformedHeader("tensor name is not UTF-8".into()))?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(usize::try_from(r.u64()?).map_err(|_| Error::MalformedHeader("dimension overflow".into()))?);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::MalformedHeader(format!("{name}: element count overflow")))?;
        let data = r.f32s(n, &name)?;
        params.push(Tensor::new(shape, data)?);
        names.push(name);
    }
    let model = SiameseModel::from_params(config, params)?;
    for (spec, name) in model.specs().iter().zip(&names) {
        if &spec.name != name {
            return Err(Error::ShapeMismatch(format!("expected tensor `{}`, found `{name}`", spec.name)));
        }
    }
    let state = match r.u8()? {
        0 => None,
        1 => {
            let epoch = r.u64()?;
            let seed = r.u64()?;
            let mut f = [0f64; 7];
            for v in &mut f {
                *v = f64::from_le_bytes(r.array()?);
            }
            let step = r.u64()?;
            let mut moments = Vec::with_capacity(2 * model.params().len());
            for _ in 0..2 {
                for t in model.params() {
                    moments.push(Tensor::new(t.shape().to_vec(), r.f32s(t.len(), "adam moment")?)?);
                }
            }
            let v = moments.split_off(model.params().len());
            let adam = AdamState { lr: f[2], decay: f[3], beta1: f[4], beta2: f[5], eps: f[6], step, m: moments, v };
            Some(TrainingState { epoch, seed, best_val_acc: f[0], best_val_loss: f[1], adam })
        }
        other => return Err(Error::MalformedHeader(format!("bad training-state flag {other}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::MalformedHeader(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((model, state))
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("length fits in u32").to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, data: &[f32]) {
    out.reserve(data.len() * 4);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated(format!("{what} at byte {}", self.pos))),
        }
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N, "header field")?.try_into().expect("exact length"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let len = n.checked_mul(4).ok_or_else(|| Error::MalformedHeader(format!("{what}: size overflow")))?;
        let raw = self.take(len, what)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> SiameseModel {
        let cfg = BackboneConfig::parse("input = 8,8,3\n[block]\nkind = sep\nchannels = 4\nstride = 2\nresidual = true\n")
            .unwrap();
        SiameseModel::build(cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap()
    }

    fn state(m: &SiameseModel) -> TrainingState {
        let mut adam = AdamState::for_params(1e-4, 0.99, m.params());
        adam.step = 17;
        adam.m[0].data_mut()[0] = 0.5;
        adam.v[3].data_mut()[1] = 0.25;
        TrainingState { epoch: 3, seed: 42, best_val_acc: 0.75, best_val_loss: 0.5, adam }
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let m = model();
        let s = state(&m);
        let bytes = save_bytes(&m, Some(&s));
        let (m2, s2) = load_bytes(&bytes).unwrap();
        assert_eq!(m2, m);
        assert_eq!(s2.as_ref(), Some(&s));
        assert_eq!(save_bytes(&m2, s2.as_ref()), bytes);
        let plain = save_bytes(&m, None);
        assert!(load_bytes(&plain).unwrap().1.is_none());
    }

    #[test]
    fn distinct_errors() {
        let m = model();
        let mut bytes = save_bytes(&m, None);
        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(load_bytes(truncated), Err(Error::Truncated(_))));
        bytes[0] = b'X';
        assert!(matches!(load_bytes(&bytes), Err(Error::BadMagic)));
        assert!(matches!(load_bytes(b"HN"), Err(Error::BadMagic)));
    }

    #[test]
    fn tensor_count_mismatch() {
        let m = model();
        let bytes = save_bytes(&m, None);
        // Rewrite the tensor count field to one less and drop the last tensor.
        let text_len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let count_at = 9 + text_len;
        let mut short = bytes[..count_at].to_vec();
        short.extend_from_slice(&((m.params().len() - 1) as u32).to_le_bytes());
        let mut tail = bytes[count_at + 4..].to_vec();
        let last = m.params().last().unwrap();
        let name = &m.specs().last().unwrap().name;
        let last_bytes = 4 + name.len() + 4 + 8 * last.shape().len() + 4 * last.len();
        let flag = tail.pop().unwrap();
        tail.truncate(tail.len() - last_bytes);
        short.extend_from_slice(&tail);
        short.push(flag);
        assert!(matches!(load_bytes(&short), Err(Error::ShapeMismatch(_))));
    }
}
