//! Length-prefixed binary blobs for sketch checkpoints.
//!
//! Every blob is `u32 len` followed by `len` payload bytes. All integers and
//! floats are little-endian. Payload layout:
//!
//! ```text
//! u8   version (= 1)
//! u8   kind    (1 = ℓ1 sketch, 2 = ℓ0 sketch, 3 = exact distinct map)
//! kind 1: f64 epsilon, f64 delta, u64 dimension, u128 key, u32 rows,
//!         rows × i128 accumulators
//! kind 2: f64 epsilon, f64 delta, u64 dimension, u128 key, u32 levels,
//!         u32 capacity, levels × 2·capacity × i64 bucket counts
//! kind 3: u32 entries, entries × (u64 coordinate, i64 net count), sorted
//! ```

use std::collections::BTreeMap;

use super::l0::{DistinctCounter, L0Sketch};
use super::l1::L1Sketch;
use super::SketchError;

pub const BLOB_VERSION: u8 = 1;
const KIND_L1: u8 = 1;
const KIND_L0: u8 = 2;
const KIND_EXACT: u8 = 3;

#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u128(&mut self, v: u128) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn i128(&mut self, v: i128) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(v);
        self
    }

    /// Appends `payload` with its `u32` length prefix.
    pub fn blob(&mut self, payload: &[u8]) -> &mut Self {
        self.u32(payload.len() as u32).bytes(payload)
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug)]
pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], SketchError> {
        if self.buf.len() < N {
            return Err(SketchError::Decode("unexpected end of input".into()));
        }
        let (head, tail) = self.buf.split_at(N);
        self.buf = tail;
        Ok(head.try_into().expect("length checked"))
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], SketchError> {
        if self.buf.len() < n {
            return Err(SketchError::Decode("unexpected end of input".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, SketchError> {
        Ok(self.take::<1>()?[0])
    }

    pub fn u32(&mut self) -> Result<u32, SketchError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    pub fn u64(&mut self) -> Result<u64, SketchError> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    pub fn i64(&mut self) -> Result<i64, SketchError> {
        Ok(i64::from_le_bytes(self.take()?))
    }

    pub fn u128(&mut self) -> Result<u128, SketchError> {
        Ok(u128::from_le_bytes(self.take()?))
    }

    pub fn i128(&mut self) -> Result<i128, SketchError> {
        Ok(i128::from_le_bytes(self.take()?))
    }

    pub fn f64(&mut self) -> Result<f64, SketchError> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    /// Reads one length-prefixed blob.
    pub fn blob(&mut self) -> Result<&'a [u8], SketchError> {
        let len = self.u32()? as usize;
        self.bytes(len)
    }
}

fn header(kind: u8) -> Writer {
    let mut w = Writer::new();
    w.u8(BLOB_VERSION).u8(kind);
    w
}

fn open(payload: &[u8], kind: u8) -> Result<Reader<'_>, SketchError> {
    let mut r = Reader::new(payload);
    let version = r.u8()?;
    if version != BLOB_VERSION {
        return Err(SketchError::Decode(format!("unsupported version {version}")));
    }
    let found = r.u8()?;
    if found != kind {
        return Err(SketchError::Decode(format!(
            "expected blob kind {kind}, found {found}"
        )));
    }
    Ok(r)
}

fn close(r: Reader<'_>) -> Result<(), SketchError> {
    if r.is_empty() {
        Ok(())
    } else {
        Err(SketchError::Decode("trailing bytes in blob".into()))
    }
}

fn prefixed(payload: Vec<u8>) -> Vec<u8> {
    let mut w = Writer::new();
    w.blob(&payload);
    w.finish()
}

impl L1Sketch {
    /// Payload without the length prefix.
    pub fn encode_payload(&self) -> Vec<u8> {
        let mut w = header(KIND_L1);
        w.f64(self.epsilon())
            .f64(self.delta())
            .u64(self.dimension())
            .u128(self.key())
            .u32(self.rows() as u32);
        for &a in self.accumulators() {
            w.i128(a);
        }
        w.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        prefixed(self.encode_payload())
    }

    pub fn decode_payload(payload: &[u8]) -> Result<Self, SketchError> {
        let mut r = open(payload, KIND_L1)?;
        let epsilon = r.f64()?;
        let delta = r.f64()?;
        let dimension = r.u64()?;
        let key = r.u128()?;
        let rows = r.u32()? as usize;
        let acc = (0..rows).map(|_| r.i128()).collect::<Result<Vec<_>, _>>()?;
        close(r)?;
        Ok(Self::from_parts(epsilon, delta, dimension, key, acc))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SketchError> {
        let mut r = Reader::new(bytes);
        let sketch = Self::decode_payload(r.blob()?)?;
        close(r)?;
        Ok(sketch)
    }
}

impl L0Sketch {
    pub fn encode_payload(&self) -> Vec<u8> {
        let mut w = header(KIND_L0);
        w.f64(self.epsilon())
            .f64(self.delta())
            .u64(self.dimension())
            .u128(self.key())
            .u32(self.levels() as u32)
            .u32(self.capacity() as u32);
        for &c in self.counts() {
            w.i64(c);
        }
        w.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        prefixed(self.encode_payload())
    }

    pub fn decode_payload(payload: &[u8]) -> Result<Self, SketchError> {
        let mut r = open(payload, KIND_L0)?;
        let epsilon = r.f64()?;
        let delta = r.f64()?;
        let dimension = r.u64()?;
        let key = r.u128()?;
        let levels = r.u32()? as usize;
        let capacity = r.u32()? as usize;
        let counts = (0..levels * 2 * capacity)
            .map(|_| r.i64())
            .collect::<Result<Vec<_>, _>>()?;
        close(r)?;
        Self::from_parts(epsilon, delta, dimension, levels, capacity, key, counts)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SketchError> {
        let mut r = Reader::new(bytes);
        let sketch = Self::decode_payload(r.blob()?)?;
        close(r)?;
        Ok(sketch)
    }
}

impl DistinctCounter {
    pub fn encode_payload(&self) -> Vec<u8> {
        match self {
            Self::Sketch(s) => s.encode_payload(),
            Self::Exact(map) => {
                let mut w = header(KIND_EXACT);
                w.u32(map.len() as u32);
                for (&coord, &count) in map {
                    w.u64(coord).i64(count);
                }
                w.finish()
            }
        }
    }

    pub fn decode_payload(payload: &[u8]) -> Result<Self, SketchError> {
        match payload.get(1) {
            Some(&KIND_L0) => Ok(Self::Sketch(L0Sketch::decode_payload(payload)?)),
            Some(&KIND_EXACT) => {
                let mut r = open(payload, KIND_EXACT)?;
                let n = r.u32()?;
                let mut map = BTreeMap::new();
                for _ in 0..n {
                    let coord = r.u64()?;
                    map.insert(coord, r.i64()?);
                }
                close(r)?;
                Ok(Self::Exact(map))
            }
            _ => Err(SketchError::Decode("not a distinct-count blob".into())),
        }
    }
}
