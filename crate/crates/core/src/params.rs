//! Named tensor collections: models, updates, and gradients.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::scalar::{Dual, Real};
use crate::tensor::Tensor;

/// Named collection of tensors. Represents a model, an update, or a gradient.
///
/// Entries are kept in name order so iteration, arithmetic, and serialization
/// are all deterministic.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamSet<E: Real = f32> {
    map: BTreeMap<String, Tensor<E>>,
}

impl<E: Real> ParamSet<E> {
    pub fn new() -> Self {
        ParamSet {
            map: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<E>) {
        self.map.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<E>> {
        self.map
            .get(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<E>> {
        self.map
            .get_mut(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<E>)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<E>)> {
        self.map.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalar elements across all tensors.
    pub fn numel(&self) -> usize {
        self.map.values().map(Tensor::numel).sum()
    }

    pub fn zeros_like(&self) -> Self {
        ParamSet {
            map: self
                .map
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
                .collect(),
        }
    }

    pub fn map_values(&self, f: impl Fn(&Tensor<E>) -> Tensor<E>) -> Self {
        ParamSet {
            map: self.map.iter().map(|(k, v)| (k.clone(), f(v))).collect(),
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(&Tensor<E>, &Tensor<E>) -> Result<Tensor<E>>) -> Result<Self> {
        if self.map.len() != other.map.len() {
            return Err(Error::ShapeMismatch(format!(
                "param sets have {} vs {} entries",
                self.map.len(),
                other.map.len()
            )));
        }
        let mut out = BTreeMap::new();
        for (name, a) in &self.map {
            let b = other.get(name)?;
            out.insert(name.clone(), f(a, b)?);
        }
        Ok(ParamSet { map: out })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, factor: E) -> Self {
        self.map_values(|t| t.scale(factor))
    }

    /// `self += other` over matching names/shapes.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        for (name, b) in &other.map {
            let a = self
                .map
                .get_mut(name)
                .ok_or_else(|| Error::MissingParam(name.clone()))?;
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> Result<E> {
        let mut acc = E::zero();
        for (name, a) in &self.map {
            acc += a.dot(other.get(name)?)?;
        }
        Ok(acc)
    }

    pub fn sq_norm(&self) -> E {
        let mut acc = E::zero();
        for t in self.map.values() {
            acc += t.sq_norm();
        }
        acc
    }

    pub fn is_finite(&self) -> bool {
        self.map.values().all(Tensor::is_finite)
    }

    /// Copy values from `source` for every name present in `source`;
    /// errors if a source name is absent here or shapes differ.
    pub fn overwrite_from(&mut self, source: &Self) -> Result<()> {
        for (name, v) in &source.map {
            let slot = self
                .map
                .get_mut(name)
                .ok_or_else(|| Error::MissingParam(name.clone()))?;
            if slot.shape() != v.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "overwrite of `{name}`: {:?} vs {:?}",
                    slot.shape(),
                    v.shape()
                )));
            }
            *slot = v.clone();
        }
        Ok(())
    }

    pub fn cast<F: Real>(&self) -> ParamSet<F> {
        ParamSet {
            map: self.map.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }
}

impl ParamSet<f32> {
    /// Lift to duals with per-parameter tangents taken from `tangent`
    /// (zero tangent for names it lacks).
    pub fn to_dual(&self, tangent: &ParamSet<f32>) -> Result<ParamSet<Dual<f32>>> {
        let mut out = BTreeMap::new();
        for (name, v) in &self.map {
            let t = match tangent.map.get(name) {
                Some(t) => v.to_dual(Some(t))?,
                None => v.to_dual(None)?,
            };
            out.insert(name.clone(), t);
        }
        Ok(ParamSet { map: out })
    }
}

// ---------------------------------------------------------------------------
// Flat binary checkpoint format
// ---------------------------------------------------------------------------
//
// header: magic "FLPS", version u32 LE
// per tensor, in name order:
//   name length u16 LE, name bytes (utf-8),
//   rank u8, dims u32 LE each,
//   data as little-endian f32

const MAGIC: &[u8; 4] = b"FLPS";
const VERSION: u32 = 1;

impl ParamSet<f32> {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.write_u32::<LittleEndian>(VERSION)?;
        for (name, tensor) in &self.map {
            let name_bytes = name.as_bytes();
            if name_bytes.len() > u16::MAX as usize {
                return Err(Error::format("param set", format!("name too long: {name}")));
            }
            out.write_u16::<LittleEndian>(name_bytes.len() as u16)?;
            out.extend_from_slice(name_bytes);
            if tensor.shape().len() > u8::MAX as usize {
                return Err(Error::format("param set", "rank exceeds u8"));
            }
            out.write_u8(tensor.shape().len() as u8)?;
            for &d in tensor.shape() {
                out.write_u32::<LittleEndian>(d as u32)?;
            }
            for &v in tensor.data() {
                out.write_f32::<LittleEndian>(v)?;
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = std::io::Cursor::new(bytes);
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic)
            .map_err(|_| Error::format("param file", "truncated magic"))?;
        if &magic != MAGIC {
            return Err(Error::format(
                "param file",
                format!("bad magic {magic:?}, expected {MAGIC:?}"),
            ));
        }
        let version = cur
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::format("param file", "truncated version"))?;
        if version != VERSION {
            return Err(Error::format(
                "param file",
                format!("unsupported version {version}"),
            ));
        }
        let mut map = BTreeMap::new();
        while (cur.position() as usize) < bytes.len() {
            let name_len = cur
                .read_u16::<LittleEndian>()
                .map_err(|_| Error::format("param file", "truncated name length"))?
                as usize;
            let mut name_bytes = vec![0u8; name_len];
            cur.read_exact(&mut name_bytes)
                .map_err(|_| Error::format("param file", "truncated name"))?;
            let name = String::from_utf8(name_bytes)
                .map_err(|_| Error::format("param file", "name is not utf-8"))?;
            let rank = cur
                .read_u8()
                .map_err(|_| Error::format("param file", "truncated rank"))?
                as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(
                    cur.read_u32::<LittleEndian>()
                        .map_err(|_| Error::format("param file", "truncated dims"))?
                        as usize,
                );
            }
            let numel: usize = shape.iter().product();
            let mut data = Vec::with_capacity(numel);
            for _ in 0..numel {
                data.push(
                    cur.read_f32::<LittleEndian>()
                        .map_err(|_| Error::format("param file", "truncated tensor data"))?,
                );
            }
            map.insert(name, Tensor::from_vec(&shape, data)?);
        }
        Ok(ParamSet { map })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamSet<f32> {
        let mut p = ParamSet::new();
        p.insert("b.bias", Tensor::from_vec(&[3], vec![0.5, -1.0, 2.0]).unwrap());
        p.insert(
            "a.weight",
            Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
        );
        p
    }

    #[test]
    fn arithmetic_is_name_aligned() {
        let p = sample();
        let q = p.scale(2.0);
        let r = q.sub(&p).unwrap();
        assert_eq!(r, p);
        let mut acc = p.clone();
        acc.add_assign(&p).unwrap();
        assert_eq!(acc, q);
    }

    #[test]
    fn missing_name_is_an_error() {
        let p = sample();
        let mut q = ParamSet::new();
        q.insert("a.weight", Tensor::zeros(&[2, 2]));
        assert!(p.add(&q).is_err());
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let p = sample();
        let bytes = p.to_bytes().unwrap();
        assert_eq!(&bytes[0..4], b"FLPS");
        let q = ParamSet::from_bytes(&bytes).unwrap();
        assert_eq!(p, q);
        // byte-level determinism
        assert_eq!(bytes, q.to_bytes().unwrap());
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let p = sample();
        let mut bytes = p.to_bytes().unwrap();
        bytes[0] = b'X';
        let err = ParamSet::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("magic"));
    }

    #[test]
    fn overwrite_keeps_other_entries() {
        let mut p = sample();
        let mut src = ParamSet::new();
        src.insert("a.weight", Tensor::filled(&[2, 2], 9.0));
        p.overwrite_from(&src).unwrap();
        assert_eq!(p.get("a.weight").unwrap().data(), &[9.0; 4]);
        assert_eq!(p.get("b.bias").unwrap().data(), &[0.5, -1.0, 2.0]);
        let mut bad = ParamSet::new();
        bad.insert("nope", Tensor::zeros(&[1]));
        assert!(p.overwrite_from(&bad).is_err());
    }
}
