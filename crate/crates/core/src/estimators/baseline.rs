use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{encode_cell, EmdEstimator, EstimatorError, MultigridConfig, NormBackend};
use crate::geometry::{random_grid, CellId, Domain, GridSpec, Point, SparseCellCounts, StreamUpdate};
use crate::sketch::hash::derive_key;
use crate::sketch::{l1_rows, L1Sketch};

/// Seed offset separating the baseline's randomness from the multi-grid's.
const BASELINE_STREAM: u64 = 0xBA5E;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub domain: Domain,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub backend: NormBackend,
    pub rows_override: Option<usize>,
}

impl BaselineConfig {
    pub fn new(domain: Domain, seed: u64) -> Self {
        Self {
            domain,
            epsilon: 0.1,
            delta: 0.05,
            seed,
            backend: NormBackend::Sketch,
            rows_override: None,
        }
    }

    /// Same domain, accuracy, seed and backend as a multi-grid config.
    pub fn matching(c: &MultigridConfig) -> Self {
        Self {
            domain: c.domain,
            epsilon: c.epsilon,
            delta: c.delta,
            seed: c.seed,
            backend: c.backend,
            rows_override: c.rows_override,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows_override
            .unwrap_or_else(|| l1_rows(self.epsilon, self.delta))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum BaselineNorm {
    Sketch(L1Sketch),
    Exact(Vec<SparseCellCounts>),
}

/// The nested-grid embedding `f(S) = (V_{G_0}(S), 2 V_{G_1}(S), …)` of one
/// random shift, with `‖f(S) - f(T)‖₁` held in a single sketch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineState {
    pub(crate) domain: Domain,
    pub(crate) seed: u64,
    pub(crate) grids: Vec<GridSpec>,
    pub(crate) norm: BaselineNorm,
    pub(crate) n_s: i64,
    pub(crate) n_t: i64,
}

impl BaselineState {
    pub fn new(config: &BaselineConfig) -> Result<Self, EstimatorError> {
        if !(config.epsilon > 0.0 && config.epsilon < 1.0) || !(config.delta > 0.0 && config.delta < 1.0) {
            return Err(EstimatorError::Config(format!(
                "epsilon and delta must lie in (0, 1), got {} and {}",
                config.epsilon, config.delta
            )));
        }
        let domain = config.domain;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ BASELINE_STREAM);
        let top = random_grid(domain, domain.log_delta(), &mut rng)?;
        let grids: Vec<GridSpec> = domain.levels().map(|i| top.coarsen_to(i)).collect();
        let norm = match config.backend {
            NormBackend::Sketch => BaselineNorm::Sketch(L1Sketch::with_rows(
                config.epsilon,
                config.delta,
                u64::MAX,
                derive_key(config.seed, &[3]),
                config.rows(),
            )),
            NormBackend::Exact => {
                BaselineNorm::Exact(grids.iter().map(|g| SparseCellCounts::new(*g)).collect())
            }
        };
        Ok(Self {
            domain,
            seed: config.seed,
            grids,
            norm,
            n_s: 0,
            n_t: 0,
        })
    }

    pub fn grids(&self) -> &[GridSpec] {
        &self.grids
    }

    pub fn totals(&self) -> (i64, i64) {
        (self.n_s, self.n_t)
    }

    pub fn sketch(&self) -> Option<&L1Sketch> {
        match &self.norm {
            BaselineNorm::Sketch(s) => Some(s),
            BaselineNorm::Exact(_) => None,
        }
    }

    fn add_cell(&mut self, level: usize, cell: CellId, delta: i64) {
        match &mut self.norm {
            BaselineNorm::Sketch(s) => s.update(encode_cell(level as u32, 0, cell), delta << level),
            BaselineNorm::Exact(counts) => counts[level].add(cell, delta),
        }
    }

    fn track(&mut self, u: &StreamUpdate) {
        match u.set {
            crate::geometry::SetId::S => self.n_s += u.multiplicity_delta(),
            crate::geometry::SetId::T => self.n_t += u.multiplicity_delta(),
        }
    }

    pub fn update(&mut self, u: &StreamUpdate) {
        let delta = u.difference_delta();
        for level in 0..self.grids.len() {
            let cell = self.grids[level].cell_of(u.point);
            self.add_cell(level, cell, delta);
        }
        self.track(u);
    }

    pub fn update_batch(&mut self, updates: &[StreamUpdate]) {
        let mut by_point: BTreeMap<Point, i64> = BTreeMap::new();
        for u in updates {
            *by_point.entry(u.point).or_insert(0) += u.difference_delta();
            self.track(u);
        }
        for level in 0..self.grids.len() {
            let mut by_cell: BTreeMap<CellId, i64> = BTreeMap::new();
            for (p, d) in &by_point {
                *by_cell.entry(self.grids[level].cell_of(*p)).or_insert(0) += d;
            }
            for (cell, d) in by_cell {
                if d != 0 {
                    self.add_cell(level, cell, d);
                }
            }
        }
    }

    pub fn estimate(&self) -> Result<f64, EstimatorError> {
        if self.n_s != self.n_t {
            return Err(EstimatorError::SizeMismatch {
                n_s: self.n_s,
                n_t: self.n_t,
            });
        }
        if self.n_s <= 0 {
            return Err(EstimatorError::EmptyStream);
        }
        Ok(match &self.norm {
            BaselineNorm::Sketch(s) => s.estimate(),
            BaselineNorm::Exact(counts) => counts
                .iter()
                .enumerate()
                .map(|(i, c)| (c.l1() << i) as f64)
                .sum(),
        })
    }
}

impl EmdEstimator for BaselineState {
    fn update(&mut self, u: &StreamUpdate) {
        BaselineState::update(self, u);
    }

    fn update_batch(&mut self, updates: &[StreamUpdate]) {
        BaselineState::update_batch(self, updates);
    }

    fn estimate_emd(&self) -> Result<f64, EstimatorError> {
        self.estimate()
    }
}

pub fn baseline_update(st: &mut BaselineState, u: &StreamUpdate) {
    st.update(u);
}

pub fn baseline_estimate(st: &BaselineState) -> Result<f64, EstimatorError> {
    st.estimate()
}
