use std::collections::BTreeMap;

use super::hash::{keyed, keyed2};
use super::l1::check_params;
use super::SketchError;

/// Target sample size per level, `s = ⌈3 ε⁻² ln(2/δ)⌉`.
pub fn l0_capacity(epsilon: f64, delta: f64) -> usize {
    ((3.0 / (epsilon * epsilon) * (2.0 / delta).ln()).ceil() as usize).max(4)
}

/// Turnstile distinct-count sketch built from geometric level sampling.
///
/// A coordinate lives in levels `0..=z`, where `z` is the number of leading
/// zero bits of its keyed hash, so level `ℓ` samples at rate `2^-ℓ`. Each
/// level hashes its coordinates into `2s` buckets of exact net counts;
/// deletions cancel insertions exactly, and a bucket is nonzero iff it holds a
/// coordinate with nonzero net count (valid streams never go negative).
///
/// The estimate reads the lowest level with at most `s` occupied buckets,
/// corrects for bucket collisions by linear counting, and rescales by `2^ℓ`.
/// Levels above that threshold count as overflowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct L0Sketch {
    epsilon_bits: u64,
    delta_bits: u64,
    dimension: u64,
    levels: usize,
    capacity: usize,
    key: u128,
    counts: Vec<i64>,
}

impl L0Sketch {
    pub fn new(epsilon: f64, delta: f64, dimension: u64, key: u128) -> Result<Self, SketchError> {
        check_params(epsilon, delta)?;
        let levels = (64 - dimension.max(2).saturating_sub(1).leading_zeros()) as usize + 1;
        let capacity = l0_capacity(epsilon, delta);
        Ok(Self {
            epsilon_bits: epsilon.to_bits(),
            delta_bits: delta.to_bits(),
            dimension,
            levels,
            capacity,
            key,
            counts: vec![0; levels * 2 * capacity],
        })
    }

    pub(crate) fn from_parts(
        epsilon: f64,
        delta: f64,
        dimension: u64,
        levels: usize,
        capacity: usize,
        key: u128,
        counts: Vec<i64>,
    ) -> Result<Self, SketchError> {
        if counts.len() != levels * 2 * capacity {
            return Err(SketchError::Decode("bucket table size mismatch".into()));
        }
        Ok(Self {
            epsilon_bits: epsilon.to_bits(),
            delta_bits: delta.to_bits(),
            dimension,
            levels,
            capacity,
            key,
            counts,
        })
    }

    pub fn epsilon(&self) -> f64 {
        f64::from_bits(self.epsilon_bits)
    }

    pub fn delta(&self) -> f64 {
        f64::from_bits(self.delta_bits)
    }

    pub fn dimension(&self) -> u64 {
        self.dimension
    }

    pub fn key(&self) -> u128 {
        self.key
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn buckets_per_level(&self) -> usize {
        2 * self.capacity
    }

    pub fn counts(&self) -> &[i64] {
        &self.counts
    }

    /// Deepest level that retains `coord`.
    pub fn top_level(&self, coord: u64) -> usize {
        (keyed(self.key, coord).leading_zeros() as usize).min(self.levels - 1)
    }

    pub fn update(&mut self, coord: u64, delta: i64) {
        if delta == 0 {
            return;
        }
        let width = self.buckets_per_level();
        for level in 0..=self.top_level(coord) {
            let bucket = (keyed2(self.key, coord, level as u64) % width as u64) as usize;
            self.counts[level * width + bucket] += delta;
        }
    }

    pub fn occupied(&self, level: usize) -> usize {
        let width = self.buckets_per_level();
        self.counts[level * width..(level + 1) * width]
            .iter()
            .filter(|&&c| c != 0)
            .count()
    }

    /// Estimated number of coordinates with nonzero net count.
    pub fn estimate(&self) -> Result<f64, SketchError> {
        let width = self.buckets_per_level() as f64;
        for level in 0..self.levels {
            let occupied = self.occupied(level);
            if occupied <= self.capacity {
                if occupied == 0 {
                    return Ok(0.0);
                }
                let fill = occupied as f64 / width;
                let sampled = -width * (1.0 - fill).ln();
                return Ok(sampled * (1u64 << level) as f64);
            }
        }
        Err(SketchError::AllLevelsOverflowed)
    }

    pub fn merge(&mut self, other: &Self) -> Result<(), SketchError> {
        if self.key != other.key || self.counts.len() != other.counts.len() {
            return Err(SketchError::Incompatible);
        }
        self.counts
            .iter_mut()
            .zip(&other.counts)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn memory_bytes(&self) -> usize {
        self.counts.len() * std::mem::size_of::<i64>()
    }
}

/// How distinct counts are tracked: by the sketch, or exactly when the
/// distinct set is known to be small.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum L0Mode {
    #[default]
    Sketch,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DistinctCounter {
    Sketch(L0Sketch),
    Exact(BTreeMap<u64, i64>),
}

impl DistinctCounter {
    pub fn new(
        mode: L0Mode,
        epsilon: f64,
        delta: f64,
        dimension: u64,
        key: u128,
    ) -> Result<Self, SketchError> {
        Ok(match mode {
            L0Mode::Sketch => Self::Sketch(L0Sketch::new(epsilon, delta, dimension, key)?),
            L0Mode::Exact => Self::Exact(BTreeMap::new()),
        })
    }

    pub fn update(&mut self, coord: u64, delta: i64) {
        match self {
            Self::Sketch(s) => s.update(coord, delta),
            Self::Exact(map) => {
                let entry = map.entry(coord).or_insert(0);
                *entry += delta;
                if *entry == 0 {
                    map.remove(&coord);
                }
            }
        }
    }

    pub fn estimate(&self) -> Result<f64, SketchError> {
        match self {
            Self::Sketch(s) => s.estimate(),
            Self::Exact(map) => Ok(map.len() as f64),
        }
    }

    pub fn memory_bytes(&self) -> usize {
        match self {
            Self::Sketch(s) => s.memory_bytes(),
            Self::Exact(map) => map.len() * 16,
        }
    }
}
