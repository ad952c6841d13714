use super::hash::{keyed, stream_word, unit_open};
use super::SketchError;

/// Fixed-point scale for projection coefficients: `q = round(c · 2^20)`.
pub const COEFF_SCALE_BITS: u32 = 20;

/// Median of `|C|` for the standard Cauchy law, `tan(π/4)`. The
/// `calibrate_cauchy_median` example re-measures it from 10⁶ coefficients.
pub const CAUCHY_ABS_MEDIAN: f64 = 1.0;

/// Each tail of the Cauchy law is cut at probability `2^-41`, so
/// `|c| <= tan(π/2 · (1 - 2^-40))`.
const TAIL: f64 = 1.0 / (1u64 << 41) as f64;

/// Rows `r = ⌈4 ε⁻² ln(2/δ)⌉`, rounded up to odd so the median is a single
/// accumulator.
pub fn l1_rows(epsilon: f64, delta: f64) -> usize {
    let r = (4.0 / (epsilon * epsilon) * (2.0 / delta).ln()).ceil() as usize;
    r.max(1) | 1
}

pub(crate) fn check_params(epsilon: f64, delta: f64) -> Result<(), SketchError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SketchError::InvalidParameter(format!(
            "epsilon must be in (0, 1), got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SketchError::InvalidParameter(format!(
            "delta must be in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

/// The Cauchy projection coefficient of `coord` in row `row`.
#[inline]
pub fn cauchy_coefficient(key: u128, row: usize, coord: u64) -> f64 {
    coefficient_from_seed(keyed(key, coord), row)
}

#[inline]
fn coefficient_from_seed(seed: u64, row: usize) -> f64 {
    let u = unit_open(stream_word(seed, row as u64)).clamp(TAIL, 1.0 - TAIL);
    (std::f64::consts::PI * (u - 0.5)).tan()
}

#[inline]
fn quantize(c: f64) -> i64 {
    (c * (1u64 << COEFF_SCALE_BITS) as f64).round() as i64
}

/// Linear sketch for the ℓ1 norm of a turnstile vector: one accumulator per
/// row holding `Σ_i v_i · c_row(i)` with Cauchy coefficients generated from
/// the key, never stored.
///
/// Accumulators are exact integers over quantized coefficients, so any two
/// update sequences with the same net vector give bit-identical states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct L1Sketch {
    epsilon_bits: u64,
    delta_bits: u64,
    dimension: u64,
    key: u128,
    acc: Vec<i128>,
}

impl L1Sketch {
    pub fn new(epsilon: f64, delta: f64, dimension: u64, key: u128) -> Result<Self, SketchError> {
        check_params(epsilon, delta)?;
        Ok(Self::with_rows(epsilon, delta, dimension, key, l1_rows(epsilon, delta)))
    }

    /// A sketch with an explicit row count, for experiments on the
    /// accuracy/space trade-off.
    pub fn with_rows(epsilon: f64, delta: f64, dimension: u64, key: u128, rows: usize) -> Self {
        Self {
            epsilon_bits: epsilon.to_bits(),
            delta_bits: delta.to_bits(),
            dimension,
            key,
            acc: vec![0; rows.max(1)],
        }
    }

    pub(crate) fn from_parts(
        epsilon: f64,
        delta: f64,
        dimension: u64,
        key: u128,
        acc: Vec<i128>,
    ) -> Self {
        Self {
            epsilon_bits: epsilon.to_bits(),
            delta_bits: delta.to_bits(),
            dimension,
            key,
            acc,
        }
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

    pub fn rows(&self) -> usize {
        self.acc.len()
    }

    pub fn accumulators(&self) -> &[i128] {
        &self.acc
    }

    pub fn is_zero(&self) -> bool {
        self.acc.iter().all(|&a| a == 0)
    }

    /// Adds `delta` to coordinate `coord`.
    pub fn update(&mut self, coord: u64, delta: i64) {
        debug_assert!(coord < self.dimension, "coordinate {coord} >= {}", self.dimension);
        if delta == 0 {
            return;
        }
        let seed = keyed(self.key, coord);
        let delta = delta as i128;
        for (row, a) in self.acc.iter_mut().enumerate() {
            *a += quantize(coefficient_from_seed(seed, row)) as i128 * delta;
        }
    }

    /// Median of `|acc|` over rows, rescaled to the ℓ1 norm.
    pub fn estimate(&self) -> f64 {
        let mut abs: Vec<i128> = self.acc.iter().map(|a| a.abs()).collect();
        let mid = abs.len() / 2;
        let (_, &mut upper, _) = abs.select_nth_unstable(mid);
        let median = if abs.len() % 2 == 1 {
            upper as f64
        } else {
            let lower = *abs[..mid].iter().max().expect("even row count >= 2");
            (lower as f64 + upper as f64) / 2.0
        };
        median / (1u64 << COEFF_SCALE_BITS) as f64 / CAUCHY_ABS_MEDIAN
    }

    fn check_compatible(&self, other: &Self) -> Result<(), SketchError> {
        if self.key != other.key || self.acc.len() != other.acc.len() {
            return Err(SketchError::Incompatible);
        }
        Ok(())
    }

    /// `self += other`, the sketch of the summed vectors.
    pub fn merge(&mut self, other: &Self) -> Result<(), SketchError> {
        self.check_compatible(other)?;
        self.acc.iter_mut().zip(&other.acc).for_each(|(a, b)| *a += b);
        Ok(())
    }

    /// `self -= other`, the sketch of the difference.
    pub fn subtract(&mut self, other: &Self) -> Result<(), SketchError> {
        self.check_compatible(other)?;
        self.acc.iter_mut().zip(&other.acc).for_each(|(a, b)| *a -= b);
        Ok(())
    }

    /// Bytes held by the accumulators.
    pub fn memory_bytes(&self) -> usize {
        self.acc.len() * std::mem::size_of::<i128>()
    }
}
