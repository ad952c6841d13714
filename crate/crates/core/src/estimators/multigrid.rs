use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{encode_cell, EmdEstimator, EstimatorError, NormBackend};
use crate::geometry::{random_grid, CellId, Domain, GridSpec, Point, SetId, SparseCellCounts, StreamUpdate};
use crate::sketch::hash::derive_key;
use crate::sketch::{l1_rows, DistinctCounter, L0Mode, L1Sketch};

/// Parameters of the multi-grid estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultigridConfig {
    pub domain: Domain,
    /// Randomly shifted grids per level; `2 log₂Δ` by default.
    pub grids_per_level: usize,
    pub epsilon: f64,
    /// Overall failure probability, split evenly over all ℓ1 sketches.
    pub delta: f64,
    pub seed: u64,
    pub backend: NormBackend,
    pub l0_mode: L0Mode,
    /// Forces the ℓ1 row count instead of deriving it from `(ε, δ')`.
    pub rows_override: Option<usize>,
}

impl MultigridConfig {
    pub fn new(domain: Domain, seed: u64) -> Self {
        Self {
            domain,
            grids_per_level: 2 * domain.log_delta() as usize,
            epsilon: 0.1,
            delta: 0.05,
            seed,
            backend: NormBackend::Sketch,
            l0_mode: L0Mode::Sketch,
            rows_override: None,
        }
    }

    pub fn exact(domain: Domain, seed: u64) -> Self {
        Self {
            backend: NormBackend::Exact,
            l0_mode: L0Mode::Exact,
            ..Self::new(domain, seed)
        }
    }

    pub fn levels(&self) -> usize {
        self.domain.log_delta() as usize + 1
    }

    /// `δ' = δ / (2 log²Δ)`, the failure budget of each ℓ1 sketch.
    pub fn per_sketch_delta(&self) -> f64 {
        let log = self.domain.log_delta() as f64;
        self.delta / (2.0 * log * log)
    }

    pub fn rows(&self) -> usize {
        self.rows_override
            .unwrap_or_else(|| l1_rows(self.epsilon, self.per_sketch_delta()))
    }

    pub fn sketch_count(&self) -> usize {
        self.levels() * self.grids_per_level
    }

    /// Total ℓ1 accumulators: `(log₂Δ + 1) · g · r`.
    pub fn accumulator_count(&self) -> usize {
        self.sketch_count() * self.rows()
    }

    fn validate(&self) -> Result<(), EstimatorError> {
        if self.grids_per_level == 0 {
            return Err(EstimatorError::Config("grids_per_level must be >= 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(EstimatorError::Config(format!(
                "epsilon and delta must lie in (0, 1), got {} and {}",
                self.epsilon, self.delta
            )));
        }
        if self.grids_per_level >= 1 << 10 {
            return Err(EstimatorError::Config("grids_per_level must be < 1024".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum CellNorm {
    Sketch(L1Sketch),
    Exact(SparseCellCounts),
}

impl CellNorm {
    fn add(&mut self, coord: u64, cell: CellId, delta: i64) {
        match self {
            CellNorm::Sketch(s) => s.update(coord, delta),
            CellNorm::Exact(c) => c.add(cell, delta),
        }
    }

    fn norm(&self) -> f64 {
        match self {
            CellNorm::Sketch(s) => s.estimate(),
            CellNorm::Exact(c) => c.l1() as f64,
        }
    }
}

/// Per-level outcome of the estimate: which grid won and its norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEstimate {
    pub level: u32,
    pub chosen_grid: usize,
    pub c_hat: f64,
    pub per_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultigridEstimate {
    pub z: f64,
    pub k_hat: f64,
    pub levels: Vec<LevelEstimate>,
}

/// `Z = k̂²/2 · Σ_i 2^i · Ĉ_i`.
pub fn multigrid_formula(k_hat: f64, c_hat: &[f64]) -> f64 {
    let weighted: f64 = c_hat
        .iter()
        .enumerate()
        .map(|(i, c)| (1u64 << i) as f64 * c)
        .sum();
    k_hat * k_hat / 2.0 * weighted
}

/// Sketches of `V_G(S) - V_G(T)` for `g` randomly shifted grids at every
/// level, plus distinct counts of `S` and `T` on the unit grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultigridState {
    pub(crate) config_hash: u64,
    pub(crate) grids: Vec<Vec<GridSpec>>,
    pub(crate) norms: Vec<Vec<CellNorm>>,
    pub(crate) distinct_s: DistinctCounter,
    pub(crate) distinct_t: DistinctCounter,
    pub(crate) n_s: i64,
    pub(crate) n_t: i64,
    config: ConfigBits,
}

/// `MultigridConfig` with floats stored as bits so the state can be `Eq`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct ConfigBits {
    domain: Domain,
    grids_per_level: usize,
    epsilon: u64,
    delta: u64,
    seed: u64,
    backend: NormBackend,
    l0_mode: L0Mode,
    rows_override: Option<usize>,
}

impl From<&MultigridConfig> for ConfigBits {
    fn from(c: &MultigridConfig) -> Self {
        Self {
            domain: c.domain,
            grids_per_level: c.grids_per_level,
            epsilon: c.epsilon.to_bits(),
            delta: c.delta.to_bits(),
            seed: c.seed,
            backend: c.backend,
            l0_mode: c.l0_mode,
            rows_override: c.rows_override,
        }
    }
}

impl From<&ConfigBits> for MultigridConfig {
    fn from(c: &ConfigBits) -> Self {
        Self {
            domain: c.domain,
            grids_per_level: c.grids_per_level,
            epsilon: f64::from_bits(c.epsilon),
            delta: f64::from_bits(c.delta),
            seed: c.seed,
            backend: c.backend,
            l0_mode: c.l0_mode,
            rows_override: c.rows_override,
        }
    }
}

/// Coordinate of a unit-grid cell inside `[Δ]²`, used by the distinct counters.
pub(crate) fn unit_cell_coord(domain: Domain, p: Point) -> u64 {
    (p.x as u64 - 1) * domain.delta() as u64 + (p.y as u64 - 1)
}

/// Draws the grid family for a config: level by level, `g` grids each.
pub fn draw_grids(config: &MultigridConfig) -> Vec<Vec<GridSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    config
        .domain
        .levels()
        .map(|level| {
            (0..config.grids_per_level)
                .map(|_| random_grid(config.domain, level, &mut rng).expect("level within domain"))
                .collect()
        })
        .collect()
}

pub(crate) fn config_hash(config: &MultigridConfig) -> u64 {
    let bits = [
        config.domain.delta() as u64,
        config.grids_per_level as u64,
        config.epsilon.to_bits(),
        config.delta.to_bits(),
        config.seed,
        config.backend as u64,
        config.l0_mode as u64,
        config.rows() as u64,
    ];
    derive_key(0x4D47, &bits) as u64
}

impl MultigridState {
    pub fn new(config: &MultigridConfig) -> Result<Self, EstimatorError> {
        config.validate()?;
        let grids = draw_grids(config);
        let rows = config.rows();
        let sketch_delta = config.per_sketch_delta();
        let norms = grids
            .iter()
            .enumerate()
            .map(|(i, level)| {
                level
                    .iter()
                    .enumerate()
                    .map(|(j, g)| match config.backend {
                        NormBackend::Sketch => CellNorm::Sketch(L1Sketch::with_rows(
                            config.epsilon,
                            sketch_delta,
                            u64::MAX,
                            derive_key(config.seed, &[1, i as u64, j as u64]),
                            rows,
                        )),
                        NormBackend::Exact => CellNorm::Exact(SparseCellCounts::new(*g)),
                    })
                    .collect()
            })
            .collect();
        let l0_mode = match config.backend {
            NormBackend::Exact => L0Mode::Exact,
            NormBackend::Sketch => config.l0_mode,
        };
        let unit_cells = (config.domain.delta() as u64).pow(2);
        let distinct = |label: u64| {
            DistinctCounter::new(
                l0_mode,
                config.epsilon,
                config.delta,
                unit_cells,
                derive_key(config.seed, &[2, label]),
            )
        };
        Ok(Self {
            config_hash: config_hash(config),
            grids,
            norms,
            distinct_s: distinct(0)?,
            distinct_t: distinct(1)?,
            n_s: 0,
            n_t: 0,
            config: config.into(),
        })
    }

    pub fn config(&self) -> MultigridConfig {
        (&self.config).into()
    }

    pub fn domain(&self) -> Domain {
        self.config.domain
    }

    pub fn grids(&self) -> &[Vec<GridSpec>] {
        &self.grids
    }

    pub fn totals(&self) -> (i64, i64) {
        (self.n_s, self.n_t)
    }

    /// Number of ℓ1 structures one update touches.
    pub fn sketch_count(&self) -> usize {
        self.norms.iter().map(Vec::len).sum()
    }

    pub fn accumulator_count(&self) -> usize {
        self.norms
            .iter()
            .flatten()
            .map(|n| match n {
                CellNorm::Sketch(s) => s.rows(),
                CellNorm::Exact(_) => 0,
            })
            .sum()
    }

    pub fn memory_bytes(&self) -> usize {
        let l1: usize = self
            .norms
            .iter()
            .flatten()
            .map(|n| match n {
                CellNorm::Sketch(s) => s.memory_bytes(),
                CellNorm::Exact(c) => c.len() * 24,
            })
            .sum();
        l1 + self.distinct_s.memory_bytes() + self.distinct_t.memory_bytes()
    }

    pub fn sketch(&self, level: usize, grid: usize) -> Option<&L1Sketch> {
        match self.norms.get(level)?.get(grid)? {
            CellNorm::Sketch(s) => Some(s),
            CellNorm::Exact(_) => None,
        }
    }

    pub fn exact_counts(&self, level: usize, grid: usize) -> Option<&SparseCellCounts> {
        match self.norms.get(level)?.get(grid)? {
            CellNorm::Exact(c) => Some(c),
            CellNorm::Sketch(_) => None,
        }
    }

    pub fn update(&mut self, u: &StreamUpdate) {
        let delta = u.difference_delta();
        for (i, (grids, norms)) in self.grids.iter().zip(self.norms.iter_mut()).enumerate() {
            for (j, (g, norm)) in grids.iter().zip(norms.iter_mut()).enumerate() {
                let cell = g.cell_of(u.point);
                norm.add(encode_cell(i as u32, j as u32, cell), cell, delta);
            }
        }
        self.track_sets(u.set, u.point, u.multiplicity_delta());
    }

    fn track_sets(&mut self, set: SetId, p: Point, delta: i64) {
        let coord = unit_cell_coord(self.config.domain, p);
        match set {
            SetId::S => {
                self.distinct_s.update(coord, delta);
                self.n_s += delta;
            }
            SetId::T => {
                self.distinct_t.update(coord, delta);
                self.n_t += delta;
            }
        }
    }

    /// Applies many updates at once. Deltas are netted per cell first; the
    /// resulting state equals sequential application exactly.
    pub fn update_batch(&mut self, updates: &[StreamUpdate]) {
        let mut by_point: BTreeMap<Point, i64> = BTreeMap::new();
        let mut by_set: BTreeMap<(SetId, Point), i64> = BTreeMap::new();
        for u in updates {
            *by_point.entry(u.point).or_insert(0) += u.difference_delta();
            *by_set.entry((u.set, u.point)).or_insert(0) += u.multiplicity_delta();
        }
        by_point.retain(|_, d| *d != 0);

        let by_point = &by_point;
        self.grids
            .par_iter()
            .zip(self.norms.par_iter_mut())
            .enumerate()
            .for_each(|(i, (grids, norms))| {
                for (j, (g, norm)) in grids.iter().zip(norms.iter_mut()).enumerate() {
                    let mut by_cell: BTreeMap<CellId, i64> = BTreeMap::new();
                    for (p, d) in by_point {
                        *by_cell.entry(g.cell_of(*p)).or_insert(0) += d;
                    }
                    for (cell, d) in by_cell {
                        norm.add(encode_cell(i as u32, j as u32, cell), cell, d);
                    }
                }
            });
        for ((set, p), d) in by_set {
            self.track_sets(set, p, d);
        }
    }

    /// `k̂`: the smaller distinct-count estimate, clamped to at least 1.
    pub fn k_hat(&self) -> Result<f64, EstimatorError> {
        let ks = self.distinct_s.estimate()?;
        let kt = self.distinct_t.estimate()?;
        Ok(ks.min(kt).max(1.0))
    }

    pub fn check_sizes(&self) -> Result<(), EstimatorError> {
        if self.n_s != self.n_t {
            return Err(EstimatorError::SizeMismatch {
                n_s: self.n_s,
                n_t: self.n_t,
            });
        }
        if self.n_s <= 0 {
            return Err(EstimatorError::EmptyStream);
        }
        Ok(())
    }

    pub fn estimate(&self) -> Result<MultigridEstimate, EstimatorError> {
        self.check_sizes()?;
        let k_hat = self.k_hat()?;
        let levels: Vec<LevelEstimate> = self
            .norms
            .iter()
            .enumerate()
            .map(|(i, norms)| {
                let per_grid: Vec<f64> = norms.iter().map(CellNorm::norm).collect();
                let (chosen_grid, c_hat) = per_grid
                    .iter()
                    .copied()
                    .enumerate()
                    .fold((0, f64::INFINITY), |best, (j, c)| if c < best.1 { (j, c) } else { best });
                LevelEstimate {
                    level: i as u32,
                    chosen_grid,
                    c_hat,
                    per_grid,
                }
            })
            .collect();
        let c_hat: Vec<f64> = levels.iter().map(|l| l.c_hat).collect();
        Ok(MultigridEstimate {
            z: multigrid_formula(k_hat, &c_hat),
            k_hat,
            levels,
        })
    }

    /// The same estimate computed from grid `fixed` at every level instead of
    /// the per-level minimum; used to show what the min-selection buys.
    pub fn estimate_with_fixed_grid(&self, fixed: usize) -> Result<f64, EstimatorError> {
        self.check_sizes()?;
        let c: Vec<f64> = self
            .norms
            .iter()
            .map(|norms| norms[fixed.min(norms.len() - 1)].norm())
            .collect();
        Ok(multigrid_formula(self.k_hat()?, &c))
    }
}

impl EmdEstimator for MultigridState {
    fn update(&mut self, u: &StreamUpdate) {
        MultigridState::update(self, u);
    }

    fn update_batch(&mut self, updates: &[StreamUpdate]) {
        MultigridState::update_batch(self, updates);
    }

    fn estimate_emd(&self) -> Result<f64, EstimatorError> {
        Ok(self.estimate()?.z)
    }
}

pub fn mg_update(st: &mut MultigridState, u: &StreamUpdate) {
    st.update(u);
}

pub fn mg_estimate(st: &MultigridState) -> Result<MultigridEstimate, EstimatorError> {
    st.estimate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn domain(d: u32) -> Domain {
        Domain::new(d).unwrap()
    }

    fn small_config(d: u32, seed: u64) -> MultigridConfig {
        MultigridConfig {
            rows_override: Some(31),
            ..MultigridConfig::new(domain(d), seed)
        }
    }

    #[test]
    fn structure_matches_config() {
        let cfg = MultigridConfig::new(domain(64), 1);
        assert_eq!(cfg.grids_per_level, 12);
        assert_eq!(cfg.sketch_count(), 7 * 12);
        let st = MultigridState::new(&cfg).unwrap();
        assert_eq!(st.sketch_count(), 84);
        assert_eq!(st.accumulator_count(), cfg.accumulator_count());
        assert!(st.grids()[0].iter().all(|g| *g == GridSpec::unit()));
        assert!(st.grids().iter().enumerate().all(|(i, l)| l.iter().all(|g| g.level() == i as u32)));
    }

    #[test]
    fn insert_delete_restores_state() {
        let mut st = MultigridState::new(&small_config(16, 3)).unwrap();
        let before = st.clone();
        let u = StreamUpdate::insert(SetId::S, Point::new(3, 3), 1);
        st.update(&u);
        assert_ne!(st, before);
        st.update(&u.inverse());
        assert_eq!(st, before);
    }

    #[test]
    fn batch_equals_sequential_in_any_order() {
        let cfg = small_config(16, 4);
        let updates = [
            StreamUpdate::insert(SetId::S, Point::new(1, 2), 2),
            StreamUpdate::insert(SetId::T, Point::new(9, 9), 1),
            StreamUpdate::insert(SetId::S, Point::new(7, 16), 1),
            StreamUpdate::delete(SetId::S, Point::new(1, 2), 1),
            StreamUpdate::insert(SetId::T, Point::new(4, 4), 1),
        ];
        let mut seq = MultigridState::new(&cfg).unwrap();
        updates.iter().for_each(|u| seq.update(u));
        let mut rev = MultigridState::new(&cfg).unwrap();
        updates.iter().rev().for_each(|u| rev.update(u));
        let mut batch = MultigridState::new(&cfg).unwrap();
        batch.update_batch(&updates);
        assert_eq!(seq, rev);
        assert_eq!(seq, batch);
    }

    #[test]
    fn estimate_errors() {
        let mut st = MultigridState::new(&small_config(8, 5)).unwrap();
        assert_eq!(st.estimate().unwrap_err(), EstimatorError::EmptyStream);
        st.update(&StreamUpdate::insert(SetId::S, Point::new(1, 1), 1));
        assert!(matches!(st.estimate(), Err(EstimatorError::SizeMismatch { n_s: 1, n_t: 0 })));
    }

    #[test]
    fn exact_mode_two_singletons() {
        // S = {(1,1)}, T = {(2,3)}: every level has C in {0, 2}; C_0 = 2.
        let cfg = MultigridConfig::exact(domain(8), 6);
        let mut st = MultigridState::new(&cfg).unwrap();
        st.update(&StreamUpdate::insert(SetId::S, Point::new(1, 1), 1));
        st.update(&StreamUpdate::insert(SetId::T, Point::new(2, 3), 1));
        let est = st.estimate().unwrap();
        assert_eq!(est.k_hat, 1.0);
        assert_eq!(est.levels[0].c_hat, 2.0);
        let mut expected = 0.0;
        for (i, level) in st.grids().iter().enumerate() {
            let c = level
                .iter()
                .map(|g| if g.edge_crosses(Point::new(1, 1), Point::new(2, 3)) { 2.0 } else { 0.0 })
                .fold(f64::INFINITY, f64::min);
            assert!(est.levels[i].per_grid.iter().all(|&x| x == 0.0 || x == 2.0));
            expected += (1u64 << i) as f64 * c;
        }
        assert_eq!(est.z, expected / 2.0);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = MultigridConfig::new(domain(8), 1);
        cfg.grids_per_level = 0;
        assert!(MultigridState::new(&cfg).is_err());
        let cfg = MultigridConfig {
            epsilon: 1.5,
            ..MultigridConfig::new(domain(8), 1)
        };
        assert!(MultigridState::new(&cfg).is_err());
    }
}
