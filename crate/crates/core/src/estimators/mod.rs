//! Streaming EMD estimators: the multi-grid estimator, the single-shift
//! embedding baseline, and their minimum.

mod baseline;
mod checkpoint;
mod multigrid;

pub use baseline::{baseline_estimate, baseline_update, BaselineConfig, BaselineState};
pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use multigrid::{
    draw_grids, mg_estimate, mg_update, multigrid_formula, LevelEstimate, MultigridConfig,
    MultigridEstimate, MultigridState,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CellId, GeometryError, StreamUpdate};
use crate::sketch::SketchError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EstimatorError {
    #[error("|S| = {n_s} but |T| = {n_t}; the EMD needs equal sizes")]
    SizeMismatch { n_s: i64, n_t: i64 },
    #[error("no points in the stream")]
    EmptyStream,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}

/// How `‖V_G(S) - V_G(T)‖₁` is obtained for each grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormBackend {
    /// ℓ1 sketches; the streaming algorithm.
    #[default]
    Sketch,
    /// Exact sparse cell counts; for tests and small domains.
    Exact,
}

/// Anything that consumes the update stream and reports an EMD estimate.
pub trait EmdEstimator {
    fn update(&mut self, u: &StreamUpdate);

    fn update_batch(&mut self, updates: &[StreamUpdate]) {
        for u in updates {
            self.update(u);
        }
    }

    fn estimate_emd(&self) -> Result<f64, EstimatorError>;
}

const CELL_BITS: u32 = 24;
const CELL_OFFSET: i64 = 1;

/// Packs `(level, grid index, cell)` into one sketch coordinate:
/// 6 bits level, 10 bits grid, 24 bits each for `ix + 1` and `iy + 1`.
pub fn encode_cell(level: u32, grid: u32, cell: CellId) -> u64 {
    let ix = (cell.ix + CELL_OFFSET) as u64;
    let iy = (cell.iy + CELL_OFFSET) as u64;
    debug_assert!(level < 64 && grid < 1 << 10);
    debug_assert!(ix < 1 << CELL_BITS && iy < 1 << CELL_BITS);
    ((level as u64) << 58) | ((grid as u64) << 48) | (ix << CELL_BITS) | iy
}

/// Both estimates and their minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub z: f64,
    pub baseline: f64,
    pub combined: f64,
    pub k_hat: f64,
    pub levels: Vec<LevelEstimate>,
}

/// Runs the multi-grid estimator and the baseline side by side on the same
/// stream and reports `min(Z, baseline)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinedState {
    pub multigrid: MultigridState,
    pub baseline: BaselineState,
}

impl CombinedState {
    pub fn new(config: &MultigridConfig) -> Result<Self, EstimatorError> {
        Ok(Self {
            multigrid: MultigridState::new(config)?,
            baseline: BaselineState::new(&BaselineConfig::matching(config))?,
        })
    }

    pub fn update(&mut self, u: &StreamUpdate) {
        self.multigrid.update(u);
        self.baseline.update(u);
    }

    pub fn update_batch(&mut self, updates: &[StreamUpdate]) {
        self.multigrid.update_batch(updates);
        self.baseline.update_batch(updates);
    }

    pub fn estimate(&self) -> Result<EstimateReport, EstimatorError> {
        let mg = self.multigrid.estimate()?;
        let baseline = self.baseline.estimate()?;
        Ok(EstimateReport {
            z: mg.z,
            baseline,
            combined: mg.z.min(baseline),
            k_hat: mg.k_hat,
            levels: mg.levels,
        })
    }
}

impl EmdEstimator for CombinedState {
    fn update(&mut self, u: &StreamUpdate) {
        CombinedState::update(self, u);
    }

    fn update_batch(&mut self, updates: &[StreamUpdate]) {
        CombinedState::update_batch(self, updates);
    }

    fn estimate_emd(&self) -> Result<f64, EstimatorError> {
        Ok(self.estimate()?.combined)
    }
}
