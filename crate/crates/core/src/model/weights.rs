//! Named weight tensors and their binary file format.
//!
//! ```text
//! "GTCW"  u8 version = 1  u32 tensor_count
//! repeated: u16 name_len  name (UTF-8)  u8 rank  rank × u32 dims  f32 data (row-major)
//! u32 CRC-32 of every preceding byte
//! ```
//!
//! All integers and floats are little-endian. Two reserved tensors carry
//! metadata: `meta.config` (four architecture codes) and `meta.seed` (the
//! initialization seed as four 16-bit limbs, least significant first).

use indexmap::IndexMap;

use super::config::ModelConfig;
use super::network::Network;
use super::params::RandomInit;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GTCW";
pub const FORMAT_VERSION: u8 = 1;
const META_CONFIG: &str = "meta.config";
const META_SEED: &str = "meta.seed";

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WeightMeta {
    pub config: Option<[u8; 4]>,
    pub seed: Option<u64>,
}

/// Ordered tensor map plus provenance metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelWeights {
    tensors: IndexMap<String, WeightTensor>,
    pub meta: WeightMeta,
}

impl ModelWeights {
    pub fn new(tensors: IndexMap<String, WeightTensor>, meta: WeightMeta) -> Result<Self> {
        for (name, t) in &tensors {
            if name.starts_with("meta.") {
                return Err(Error::Format(format!("tensor name {name:?} is reserved")));
            }
            check_tensor(name, t)?;
        }
        Ok(Self { tensors, meta })
    }

    pub fn tensors(&self) -> &IndexMap<String, WeightTensor> {
        &self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&WeightTensor> {
        self.tensors.get(name)
    }

    /// Total number of stored values.
    pub fn numel(&self) -> usize {
        self.tensors.values().map(|t| t.data.len()).sum()
    }

    /// Rejects weights recorded for a different architecture.
    pub fn check_config(&self, cfg: &ModelConfig) -> Result<()> {
        match self.meta.config {
            Some(code) if code != cfg.code() => Err(Error::Format(format!(
                "weights were created for config code {code:?}, requested {cfg} has {:?}",
                cfg.code()
            ))),
            _ => Ok(()),
        }
    }
}

fn check_tensor(name: &str, t: &WeightTensor) -> Result<()> {
    if name.is_empty() || name.len() > u16::MAX as usize {
        return Err(Error::Format(format!("tensor name length {} out of range", name.len())));
    }
    if t.shape.len() > u8::MAX as usize || t.shape.iter().any(|&d| d > u32::MAX as usize) {
        return Err(Error::Format(format!("tensor {name:?} shape {:?} not representable", t.shape)));
    }
    if t.shape.iter().product::<usize>() != t.data.len() {
        return Err(Error::Format(format!("tensor {name:?} shape {:?} does not match {} values", t.shape, t.data.len())));
    }
    if let Some(i) = t.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Format(format!("tensor {name:?} has a non-finite value at {i}")));
    }
    Ok(())
}

/// Deterministic uniform fan-in initialization for `cfg`.
pub fn init_random(cfg: &ModelConfig, seed: u64) -> Result<ModelWeights> {
    let mut src = RandomInit::new(seed);
    Network::build(cfg, &mut src)?;
    Ok(ModelWeights { tensors: src.tensors, meta: WeightMeta { config: Some(cfg.code()), seed: Some(seed) } })
}

fn meta_tensors(meta: &WeightMeta) -> Vec<(&'static str, WeightTensor)> {
    let mut out = Vec::new();
    if let Some(code) = meta.config {
        out.push((META_CONFIG, WeightTensor { shape: vec![4], data: code.iter().map(|&c| c as f32).collect() }));
    }
    if let Some(seed) = meta.seed {
        let limbs = (0..4).map(|i| ((seed >> (16 * i)) & 0xffff) as f32).collect();
        out.push((META_SEED, WeightTensor { shape: vec![4], data: limbs }));
    }
    out
}

pub fn save_weights(w: &ModelWeights) -> Vec<u8> {
    let meta = meta_tensors(&w.meta);
    let entries: Vec<(&str, &WeightTensor)> =
        meta.iter().map(|(n, t)| (*n, t)).chain(w.tensors.iter().map(|(n, t)| (n.as_str(), t))).collect();
    let mut out = Vec::with_capacity(16 + 4 * w.numel() + 64 * entries.len());
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, t) in entries {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape.len() as u8);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(e) => {
                let s = &self.buf[self.pos..e];
                self.pos = e;
                Ok(s)
            }
            None => Err(Error::Format(format!("truncated while reading {what} at byte {}", self.pos))),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

fn parse_meta(name: &str, t: &WeightTensor, meta: &mut WeightMeta) -> Result<()> {
    let as_ints = |t: &WeightTensor, max: f32| -> Result<Vec<u64>> {
        if t.shape != [4] || t.data.iter().any(|v| v.fract() != 0.0 || *v < 0.0 || *v > max) {
            return Err(Error::Format(format!("malformed metadata tensor {name:?}")));
        }
        Ok(t.data.iter().map(|&v| v as u64).collect())
    };
    match name {
        META_CONFIG => {
            let v = as_ints(t, 1.0)?;
            meta.config = Some([v[0] as u8, v[1] as u8, v[2] as u8, v[3] as u8]);
        }
        META_SEED => {
            let v = as_ints(t, 65535.0)?;
            meta.seed = Some(v.iter().enumerate().map(|(i, l)| l << (16 * i)).sum());
        }
        other => return Err(Error::Format(format!("unknown metadata tensor {other:?}"))),
    }
    Ok(())
}

/// Parses a weight file. Nothing is returned unless the whole stream is valid.
pub fn load_weights(bytes: &[u8]) -> Result<ModelWeights> {
    if bytes.len() < MAGIC.len() + 1 + 4 + 4 {
        return Err(Error::Format(format!("weight file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, not a weight file".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(Error::Format(format!("CRC mismatch: stored {stored:08x}, computed {actual:08x}")));
    }
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u8("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let count = r.u32("tensor count")?;
    let mut tensors = IndexMap::new();
    let mut meta = WeightMeta::default();
    for i in 0..count {
        let len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| Error::Format(format!("tensor {i} name is not UTF-8")))?
            .to_string();
        let rank = r.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let bytes_needed = numel.and_then(|n| n.checked_mul(4)).ok_or_else(|| Error::Format(format!("tensor {name:?} is too large")))?;
        let raw = r.take(bytes_needed, &format!("data of {name:?}"))?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        let t = WeightTensor { shape, data };
        check_tensor(&name, &t)?;
        if name.starts_with("meta.") {
            parse_meta(&name, &t, &mut meta)?;
        } else if tensors.insert(name.clone(), t).is_some() {
            return Err(Error::Format(format!("duplicate tensor {name:?}")));
        }
    }
    if r.pos != body.len() {
        return Err(Error::Format(format!("{} trailing bytes after the last tensor", body.len() - r.pos)));
    }
    Ok(ModelWeights { tensors, meta })
}
