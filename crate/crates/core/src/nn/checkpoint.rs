//! Self-describing binary container for trained state.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! file    := magic:"MRCACKPT" version:u32 count:u32 entry* checksum:u64
//! entry   := name_len:u32 name:utf8 tag:u8 payload
//! payload := tag 1 (f32) | tag 2 (f64): ndims:u32 dim:u64* value*
//!          | tag 3 (u64 list): len:u64 value:u64*
//!          | tag 4 (text): len:u64 utf8
//! ```
//!
//! The checksum is 64-bit FNV-1a over every preceding byte.

use std::path::Path;

use super::network::{Architecture, HeadKind, Network};
use super::scalar::Scalar;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"MRCACKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum EntryValue {
    F32 { shape: Vec<usize>, values: Vec<f32> },
    F64 { shape: Vec<usize>, values: Vec<f64> },
    U64(Vec<u64>),
    Text(String),
}

impl EntryValue {
    fn tag(&self) -> u8 {
        match self {
            EntryValue::F32 { .. } => 1,
            EntryValue::F64 { .. } => 2,
            EntryValue::U64(_) => 3,
            EntryValue::Text(_) => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub entries: Vec<(String, EntryValue)>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        let remaining = (self.bytes.len() - self.pos) as u64;
        if n > remaining {
            return Err(Error::Checkpoint(format!("length {n} exceeds remaining {remaining} bytes")));
        }
        Ok(n as usize)
    }

    fn shape(&mut self) -> Result<(Vec<usize>, usize)> {
        let nd = self.u32()? as usize;
        let mut shape = Vec::with_capacity(nd.min(16));
        for _ in 0..nd {
            shape.push(self.len()?);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Checkpoint("tensor shape overflows".into()))?;
        Ok((shape, count))
    }

    fn floats<F: Scalar>(&mut self, count: usize) -> Result<Vec<F>> {
        let raw = self.take(count.checked_mul(F::BYTES).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
        Ok(raw.chunks_exact(F::BYTES).map(F::read_le).collect())
    }
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, name: &str, value: EntryValue) {
        if let Some(slot) = self.entries.iter_mut().find(|(n, _)| n == name) {
            slot.1 = value;
        } else {
            self.entries.push((name.to_string(), value));
        }
    }

    pub fn get(&self, name: &str) -> Option<&EntryValue> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    fn require(&self, name: &str) -> Result<&EntryValue> {
        self.get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing entry {name:?}")))
    }

    pub fn put_tensor<F: Scalar>(&mut self, name: &str, shape: &[usize], values: &[F]) {
        assert_eq!(shape.iter().product::<usize>(), values.len(), "tensor {name} shape");
        let shape = shape.to_vec();
        let v = if F::BYTES == 4 {
            EntryValue::F32 {
                shape,
                values: values.iter().map(|x| x.as_f64() as f32).collect(),
            }
        } else {
            EntryValue::F64 {
                shape,
                values: values.iter().map(|x| x.as_f64()).collect(),
            }
        };
        self.put(name, v);
    }

    /// Reads a float tensor, converting precision if the stored one differs.
    pub fn tensor<F: Scalar>(&self, name: &str) -> Result<(Vec<usize>, Vec<F>)> {
        match self.require(name)? {
            EntryValue::F32 { shape, values } => Ok((shape.clone(), values.iter().map(|&x| F::of(x as f64)).collect())),
            EntryValue::F64 { shape, values } => Ok((shape.clone(), values.iter().map(|&x| F::of(x)).collect())),
            _ => Err(Error::Checkpoint(format!("entry {name:?} is not a float tensor"))),
        }
    }

    pub fn put_u64s(&mut self, name: &str, values: &[u64]) {
        self.put(name, EntryValue::U64(values.to_vec()));
    }

    pub fn u64s(&self, name: &str) -> Result<&[u64]> {
        match self.require(name)? {
            EntryValue::U64(v) => Ok(v),
            _ => Err(Error::Checkpoint(format!("entry {name:?} is not a u64 list"))),
        }
    }

    pub fn u64(&self, name: &str) -> Result<u64> {
        match self.u64s(name)? {
            [v] => Ok(*v),
            other => Err(Error::Checkpoint(format!("entry {name:?} holds {} values, expected 1", other.len()))),
        }
    }

    pub fn put_text(&mut self, name: &str, text: &str) {
        self.put(name, EntryValue::Text(text.to_string()));
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        match self.require(name)? {
            EntryValue::Text(t) => Ok(t),
            _ => Err(Error::Checkpoint(format!("entry {name:?} is not text"))),
        }
    }

    /// Stores an f64 scalar bit-exactly.
    pub fn put_f64(&mut self, name: &str, v: f64) {
        self.put(name, EntryValue::F64 { shape: vec![], values: vec![v] });
    }

    pub fn f64(&self, name: &str) -> Result<f64> {
        let (_, v) = self.tensor::<f64>(name)?;
        match v.as_slice() {
            [x] => Ok(*x),
            _ => Err(Error::Checkpoint(format!("entry {name:?} is not a scalar"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, value) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(value.tag());
            match value {
                EntryValue::F32 { shape, values } => {
                    write_shape(&mut out, shape);
                    values.iter().for_each(|v| v.write_le(&mut out));
                }
                EntryValue::F64 { shape, values } => {
                    write_shape(&mut out, shape);
                    values.iter().for_each(|v| v.write_le(&mut out));
                }
                EntryValue::U64(values) => {
                    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
                    values.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
                }
                EntryValue::Text(t) => {
                    out.extend_from_slice(&(t.len() as u64).to_le_bytes());
                    out.extend_from_slice(t.as_bytes());
                }
            }
        }
        let sum = fnv1a(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 16 || &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        if fnv1a(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
            return Err(Error::Checkpoint("checksum mismatch".into()));
        }
        let mut r = Reader { bytes: body, pos: 8 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let count = r.u32()? as usize;
        let mut ck = Checkpoint::new();
        for _ in 0..count {
            let n = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(n)?)
                .map_err(|_| Error::Checkpoint("entry name is not utf-8".into()))?
                .to_string();
            let value = match r.take(1)?[0] {
                1 => {
                    let (shape, c) = r.shape()?;
                    EntryValue::F32 { values: r.floats(c)?, shape }
                }
                2 => {
                    let (shape, c) = r.shape()?;
                    EntryValue::F64 { values: r.floats(c)?, shape }
                }
                3 => {
                    let c = r.len()?;
                    let raw = r.take(c.checked_mul(8).ok_or_else(|| Error::Checkpoint("list too large".into()))?)?;
                    EntryValue::U64(raw.chunks_exact(8).map(|b| u64::from_le_bytes(b.try_into().unwrap())).collect())
                }
                4 => {
                    let c = r.len()?;
                    let t = std::str::from_utf8(r.take(c)?).map_err(|_| Error::Checkpoint(format!("entry {name:?} is not utf-8")))?;
                    EntryValue::Text(t.to_string())
                }
                t => return Err(Error::Checkpoint(format!("entry {name:?} has unknown tag {t}"))),
            };
            ck.entries.push((name, value));
        }
        if r.pos != body.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", body.len() - r.pos)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }

    /// Stores a network under `prefix` with its architecture.
    pub fn put_network<F: Scalar>(&mut self, prefix: &str, net: &Network<F>) {
        self.put_text(&format!("{prefix}.arch"), &serde_json::to_string(&net.arch).expect("architecture serializes"));
        self.put_text(&format!("{prefix}.descriptor"), &net.arch.descriptor());
        for spec in net.params.specs() {
            self.put_tensor(&format!("{prefix}.{}", spec.name), &spec.shape, net.params.get(spec));
        }
    }

    /// Reads a network stored with [`Checkpoint::put_network`]. When `expected`
    /// is given the stored architecture must match it.
    pub fn network<F: Scalar>(&self, prefix: &str, kind: HeadKind, expected: Option<&Architecture>) -> Result<Network<F>> {
        let arch: Architecture = serde_json::from_str(self.text(&format!("{prefix}.arch"))?)
            .map_err(|e| Error::Checkpoint(format!("{prefix}.arch: {e}")))?;
        if let Some(exp) = expected {
            if *exp != arch {
                return Err(Error::Architecture {
                    expected: exp.descriptor(),
                    found: arch.descriptor(),
                });
            }
        }
        let mut net = Network::<F>::zeros(arch, kind)?;
        let specs = net.params.specs().to_vec();
        for spec in specs {
            let name = format!("{prefix}.{}", spec.name);
            let (shape, values) = self.tensor::<F>(&name)?;
            if shape != spec.shape {
                return Err(Error::Shape {
                    context: "checkpoint tensor",
                    expected: spec.shape.clone(),
                    actual: shape,
                });
            }
            net.params.get_mut(&spec).copy_from_slice(&values);
        }
        Ok(net)
    }
}

fn write_shape(out: &mut Vec<u8>, shape: &[usize]) {
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
}
