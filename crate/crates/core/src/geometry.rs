//! Points on the integer grid `[Δ]²`, randomly shifted grids with
//! half-integral lines, and the sparse per-cell count vectors that the
//! estimators take norms of.
//!
//! Grid lines sit at `m + 1/2 + z·2^level` for a shift residue
//! `0 <= m < 2^level`, so an integral point is never on a line and cell
//! membership is a plain floor division.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("grid side {0} is not a power of two >= 2")]
    InvalidDelta(u64),
    #[error("level {level} out of range 0..={max}")]
    LevelOutOfRange { level: u32, max: u32 },
    #[error("shift residue ({mx}, {my}) invalid for level {level}")]
    InvalidShift { level: u32, mx: u64, my: u64 },
    #[error("point ({x}, {y}) outside [1, {delta}]^2")]
    PointOutOfRange { x: u32, y: u32, delta: u32 },
}

/// The side length `Δ` of the discrete universe, a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Domain {
    delta: u32,
}

impl Domain {
    pub fn new(delta: u32) -> Result<Self, GeometryError> {
        if delta < 2 || !delta.is_power_of_two() {
            return Err(GeometryError::InvalidDelta(delta as u64));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> u32 {
        self.delta
    }

    /// `log₂ Δ`, which is also the coarsest grid level.
    pub fn log_delta(&self) -> u32 {
        self.delta.trailing_zeros()
    }

    pub fn levels(&self) -> impl Iterator<Item = u32> {
        0..=self.log_delta()
    }

    pub fn contains(&self, p: Point) -> bool {
        (1..=self.delta).contains(&p.x) && (1..=self.delta).contains(&p.y)
    }

    pub fn check(&self, p: Point) -> Result<Point, GeometryError> {
        if self.contains(p) {
            Ok(p)
        } else {
            Err(GeometryError::PointOutOfRange {
                x: p.x,
                y: p.y,
                delta: self.delta,
            })
        }
    }

    /// All points of `[Δ]²` in row-major order.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (1..=self.delta).flat_map(move |x| (1..=self.delta).map(move |y| Point::new(x, y)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl Point {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn l1(&self, other: &Point) -> u64 {
        (self.x.abs_diff(other.x) + self.y.abs_diff(other.y)) as u64
    }

    pub fn l2(&self, other: &Point) -> f64 {
        let dx = self.x.abs_diff(other.x) as f64;
        let dy = self.y.abs_diff(other.y) as f64;
        dx.hypot(dy)
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Option<Point> {
        let x = u32::try_from(self.x as i64 + dx).ok()?;
        let y = u32::try_from(self.y as i64 + dy).ok()?;
        Some(Point::new(x, y))
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A grid of cell size `2^level` whose lines pass through
/// `(mx + 1/2, my + 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridSpec {
    level: u32,
    mx: u64,
    my: u64,
}

impl GridSpec {
    /// Builds a grid from integer shift residues: the shift vector is
    /// `(mx + 1/2, my + 1/2)`.
    pub fn new(level: u32, mx: u64, my: u64) -> Result<Self, GeometryError> {
        if level >= 63 {
            return Err(GeometryError::LevelOutOfRange { level, max: 62 });
        }
        let side = 1u64 << level;
        if mx >= side || my >= side {
            return Err(GeometryError::InvalidShift { level, mx, my });
        }
        Ok(Self { level, mx, my })
    }

    /// Builds a grid from a half-integral shift such as `(3.5, 1.5)`.
    pub fn from_shift(level: u32, sx: f64, sy: f64) -> Result<Self, GeometryError> {
        let residue = |s: f64| -> Option<u64> {
            let m = s - 0.5;
            (m >= 0.0 && m.fract() == 0.0).then_some(m as u64)
        };
        match (residue(sx), residue(sy)) {
            (Some(mx), Some(my)) => Self::new(level, mx, my),
            _ => Err(GeometryError::InvalidShift {
                level,
                mx: sx.to_bits(),
                my: sy.to_bits(),
            }),
        }
    }

    /// The unique level-0 grid.
    pub fn unit() -> Self {
        Self {
            level: 0,
            mx: 0,
            my: 0,
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn cell_size(&self) -> u64 {
        1 << self.level
    }

    pub fn shift_residues(&self) -> (u64, u64) {
        (self.mx, self.my)
    }

    pub fn shift(&self) -> (f64, f64) {
        (self.mx as f64 + 0.5, self.my as f64 + 0.5)
    }

    /// The nested coarse-to-fine reduction: same line family restricted to
    /// cell size `2^level`.
    pub fn coarsen_to(&self, level: u32) -> Self {
        let mask = (1u64 << level) - 1;
        Self {
            level,
            mx: self.mx & mask,
            my: self.my & mask,
        }
    }

    pub fn cell_of(&self, p: Point) -> CellId {
        let side = self.cell_size() as i64;
        // floor((x - mx - 1/2) / side) == floor((x - mx - 1) / side) for integral x.
        let ix = (p.x as i64 - self.mx as i64 - 1).div_euclid(side);
        let iy = (p.y as i64 - self.my as i64 - 1).div_euclid(side);
        CellId { ix, iy }
    }

    pub fn edge_crosses(&self, a: Point, b: Point) -> bool {
        self.cell_of(a) != self.cell_of(b)
    }
}

/// Draws a grid at `level` with each shift residue uniform over `0..2^level`.
pub fn random_grid<R: Rng + ?Sized>(
    domain: Domain,
    level: u32,
    rng: &mut R,
) -> Result<GridSpec, GeometryError> {
    if level > domain.log_delta() {
        return Err(GeometryError::LevelOutOfRange {
            level,
            max: domain.log_delta(),
        });
    }
    let side = 1u64 << level;
    let mx = rng.gen_range(0..side);
    let my = rng.gen_range(0..side);
    GridSpec::new(level, mx, my)
}

pub fn cell_of(p: Point, g: &GridSpec) -> CellId {
    g.cell_of(p)
}

pub fn edge_crosses(a: Point, b: Point, g: &GridSpec) -> bool {
    g.edge_crosses(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub ix: i64,
    pub iy: i64,
}

impl CellId {
    pub const fn new(ix: i64, iy: i64) -> Self {
        Self { ix, iy }
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.ix, self.iy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetId {
    S,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Insert,
    Delete,
}

impl Sign {
    pub fn as_i64(self) -> i64 {
        match self {
            Sign::Insert => 1,
            Sign::Delete => -1,
        }
    }
}

/// One turnstile event: add or remove `count` copies of `point` in one set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamUpdate {
    pub set: SetId,
    pub sign: Sign,
    pub point: Point,
    pub count: u64,
}

impl StreamUpdate {
    pub fn insert(set: SetId, point: Point, count: u64) -> Self {
        Self {
            set,
            sign: Sign::Insert,
            point,
            count,
        }
    }

    pub fn delete(set: SetId, point: Point, count: u64) -> Self {
        Self {
            set,
            sign: Sign::Delete,
            point,
            count,
        }
    }

    /// Signed change in the multiplicity of `point` within its own set.
    pub fn multiplicity_delta(&self) -> i64 {
        self.sign.as_i64() * self.count as i64
    }

    /// Signed change to `V(S) - V(T)` at the point's cell.
    pub fn difference_delta(&self) -> i64 {
        match self.set {
            SetId::S => self.multiplicity_delta(),
            SetId::T => -self.multiplicity_delta(),
        }
    }

    pub fn inverse(&self) -> Self {
        let sign = match self.sign {
            Sign::Insert => Sign::Delete,
            Sign::Delete => Sign::Insert,
        };
        Self { sign, ..*self }
    }
}

/// Exact `V_G(S) - V_G(T)` for one grid; zero entries are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseCellCounts {
    grid: GridSpec,
    counts: BTreeMap<CellId, i64>,
}

impl SparseCellCounts {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            counts: BTreeMap::new(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn add(&mut self, cell: CellId, delta: i64) {
        if delta == 0 {
            return;
        }
        let entry = self.counts.entry(cell).or_insert(0);
        *entry += delta;
        if *entry == 0 {
            self.counts.remove(&cell);
        }
    }

    pub fn apply_update(&mut self, u: &StreamUpdate) {
        let cell = self.grid.cell_of(u.point);
        self.add(cell, u.difference_delta());
    }

    pub fn get(&self, cell: CellId) -> i64 {
        self.counts.get(&cell).copied().unwrap_or(0)
    }

    pub fn l1(&self) -> u64 {
        self.counts.values().map(|c| c.unsigned_abs()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellId, i64)> + '_ {
        self.counts.iter().map(|(c, v)| (*c, *v))
    }

    /// Counts for a whole pair of multisets at once.
    pub fn from_sets(grid: GridSpec, s: &WeightedPointSet, t: &WeightedPointSet) -> Self {
        let mut out = Self::new(grid);
        for (p, w) in s.iter() {
            out.add(grid.cell_of(p), w.round() as i64);
        }
        for (p, w) in t.iter() {
            out.add(grid.cell_of(p), -(w.round() as i64));
        }
        out
    }
}

pub fn apply_update(counts: &mut SparseCellCounts, u: &StreamUpdate) {
    counts.apply_update(u);
}

/// A multiset of points with nonnegative weights. Stream-built sets carry
/// integral weights; real weights only arise from explicit construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedPointSet {
    weights: BTreeMap<Point, f64>,
    total: f64,
}

impl WeightedPointSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points<I: IntoIterator<Item = Point>>(points: I) -> Self {
        let mut set = Self::new();
        for p in points {
            set.add(p, 1.0);
        }
        set
    }

    pub fn from_weighted<I: IntoIterator<Item = (Point, f64)>>(items: I) -> Self {
        let mut set = Self::new();
        for (p, w) in items {
            set.add(p, w);
        }
        set
    }

    /// Adds (or, with negative `w`, removes) weight at `p`. Entries that reach
    /// zero are dropped.
    pub fn add(&mut self, p: Point, w: f64) {
        if w == 0.0 {
            return;
        }
        let entry = self.weights.entry(p).or_insert(0.0);
        *entry += w;
        if *entry == 0.0 {
            self.weights.remove(&p);
        }
        self.total += w;
    }

    pub fn weight(&self, p: Point) -> f64 {
        self.weights.get(&p).copied().unwrap_or(0.0)
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }

    /// Number of distinct locations.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.weights.iter().map(|(p, w)| (*p, *w))
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        self.weights.keys().copied()
    }

    pub fn is_integral(&self) -> bool {
        self.weights.values().all(|w| w.fract() == 0.0)
    }

    pub fn has_negative(&self) -> bool {
        self.weights.values().any(|w| *w < 0.0)
    }

    /// Expands integral weights into a flat list of points.
    pub fn expand(&self) -> Vec<Point> {
        self.iter()
            .flat_map(|(p, w)| std::iter::repeat_n(p, w.round().max(0.0) as usize))
            .collect()
    }

    pub fn shares_location_with(&self, other: &WeightedPointSet) -> bool {
        self.points().any(|p| other.weight(p) != 0.0)
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Option<WeightedPointSet> {
        let mut out = WeightedPointSet::new();
        for (p, w) in self.iter() {
            out.add(p.translate(dx, dy)?, w);
        }
        Some(out)
    }
}

impl FromIterator<Point> for WeightedPointSet {
    fn from_iter<I: IntoIterator<Item = Point>>(iter: I) -> Self {
        Self::from_points(iter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn d(delta: u32) -> Domain {
        Domain::new(delta).unwrap()
    }

    #[test]
    fn cell_of_examples() {
        let g = GridSpec::from_shift(1, 0.5, 0.5).unwrap();
        assert_eq!(g.cell_of(Point::new(3, 5)), CellId::new(1, 2));
        assert_eq!(GridSpec::unit().cell_of(Point::new(1, 1)), CellId::new(0, 0));
        let g = GridSpec::from_shift(2, 3.5, 1.5).unwrap();
        assert_eq!(g.cell_of(Point::new(4, 4)), CellId::new(0, 0));
    }

    #[test]
    fn rejects_bad_grids_and_domains() {
        assert!(Domain::new(12).is_err());
        assert!(Domain::new(1).is_err());
        assert!(GridSpec::new(2, 4, 0).is_err());
        assert!(GridSpec::from_shift(0, 1.5, 0.5).is_err());
        assert!(GridSpec::from_shift(2, 1.0, 0.5).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            random_grid(d(8), 4, &mut rng),
            Err(GeometryError::LevelOutOfRange { level: 4, max: 3 })
        ));
    }

    #[test]
    fn level_zero_is_unique() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            assert_eq!(random_grid(d(64), 0, &mut rng).unwrap(), GridSpec::unit());
        }
    }

    #[test]
    fn random_grid_replays_from_seed() {
        let a = random_grid(d(64), 3, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = random_grid(d(64), 3, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        let (sx, sy) = a.shift();
        assert!((0.5..=7.5).contains(&sx) && (0.5..=7.5).contains(&sy));
    }

    #[test]
    fn random_grid_shift_is_uniform() {
        // 64 cells, 10^4 draws: chi-square with 63 dof has mean 63, sd ~11.2;
        // 5 sigma gives a cutoff near 119.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut hist = [0u32; 64];
        let draws = 10_000;
        for _ in 0..draws {
            let (mx, my) = random_grid(d(64), 3, &mut rng).unwrap().shift_residues();
            hist[(mx * 8 + my) as usize] += 1;
        }
        let expected = draws as f64 / 64.0;
        let chi2: f64 = hist
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 63.0 + 5.0 * (2.0f64 * 63.0).sqrt(), "chi2 = {chi2}");
        let sigma = (expected * (1.0 - 1.0 / 64.0)).sqrt();
        for o in hist {
            assert!((o as f64 - expected).abs() <= 5.0 * sigma);
        }
    }

    #[test]
    fn edge_crossing_examples() {
        let a = Point::new(1, 1);
        assert!(!GridSpec::unit().edge_crosses(a, a));
        assert!(GridSpec::unit().edge_crosses(a, Point::new(2, 1)));
        let g = GridSpec::from_shift(2, 0.5, 0.5).unwrap();
        assert!(!g.edge_crosses(a, Point::new(2, 1)));
    }

    #[test]
    fn apply_update_examples() {
        let mut c = SparseCellCounts::new(GridSpec::unit());
        c.apply_update(&StreamUpdate::insert(SetId::S, Point::new(1, 1), 1));
        assert_eq!(c.get(CellId::new(0, 0)), 1);
        assert_eq!(c.len(), 1);
        c.apply_update(&StreamUpdate::insert(SetId::T, Point::new(2, 2), 1));
        assert_eq!(c.get(CellId::new(1, 1)), -1);
        assert_eq!(c.l1(), 2);

        let mut c = SparseCellCounts::new(GridSpec::unit());
        let u = StreamUpdate::insert(SetId::S, Point::new(1, 1), 1);
        c.apply_update(&u);
        c.apply_update(&u.inverse());
        assert!(c.is_empty());
    }

    #[test]
    fn coarsening_nests_cells() {
        let g = GridSpec::new(5, 19, 6).unwrap();
        for level in 0..5 {
            let fine = g.coarsen_to(level);
            for p in d(32).points() {
                for q in [Point::new(1, 1), Point::new(17, 30)] {
                    // Same fine cell implies same coarse cell.
                    if !fine.edge_crosses(p, q) {
                        assert!(!g.edge_crosses(p, q));
                    }
                }
            }
        }
    }

    #[test]
    fn weighted_set_tracks_total() {
        let mut s = WeightedPointSet::new();
        s.add(Point::new(1, 1), 2.0);
        s.add(Point::new(2, 1), 1.0);
        s.add(Point::new(1, 1), -2.0);
        assert_eq!(s.len(), 1);
        assert_eq!(s.total_weight(), 1.0);
        assert_eq!(s.expand(), vec![Point::new(2, 1)]);
    }
}
