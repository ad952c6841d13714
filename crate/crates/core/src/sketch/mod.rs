//! Turnstile linear sketches: a Cauchy-projection ℓ1 estimator and a
//! level-sampling ℓ0 (distinct count) estimator, both exactly linear.

pub mod codec;
pub mod hash;
mod l0;
mod l1;

pub use l0::{l0_capacity, DistinctCounter, L0Mode, L0Sketch};
pub use l1::{cauchy_coefficient, l1_rows, L1Sketch, CAUCHY_ABS_MEDIAN, COEFF_SCALE_BITS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SketchError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("every sampling level overflowed; raise the level capacity")]
    AllLevelsOverflowed,
    #[error("sketches have different keys or shapes")]
    Incompatible,
    #[error("malformed sketch blob: {0}")]
    Decode(String),
}

/// Thin free-function surface over the sketch types.
pub fn l1_update(st: &mut L1Sketch, coord: u64, delta: i64) {
    st.update(coord, delta);
}

pub fn l1_estimate(st: &L1Sketch) -> f64 {
    st.estimate()
}

pub fn l0_update(st: &mut L0Sketch, coord: u64, delta: i64) {
    st.update(coord, delta);
}

pub fn l0_estimate(st: &L0Sketch) -> Result<f64, SketchError> {
    st.estimate()
}
