//! Insertion-only EMD estimation through a k-median coreset of `S`.
//!
//! `S` is summarised by merge-and-reduce over buckets of `b` points. Each
//! reduce picks bicriteria centers by weighted D-sampling, lays exponential
//! rings of square cells around every center, and snaps each point to the
//! weighted medoid of its cell. A point at distance `d` from its center in
//! ring `j >= 1` lies in a cell of side `β·2^j·ρ < 2βd`, and ring 0 cells
//! have side `βρ`, where `ρ = A / W` is the average distance and
//! `β = ε' / (3√2)`. Summing the cell diagonals gives total ℓ2 movement at
//! most `ε'·A`, with `A` the bicriteria cost of the bucket.
//!
//! `T` is kept exactly. The estimate is the exact EMD between the coreset and
//! `T`, which differs from `EMD(S, T)` by at most the total ℓ1 movement.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Domain, Point, SetId, Sign, StreamUpdate, WeightedPointSet};
use crate::oracle::{exact_emd, OracleError};
use crate::sketch::hash::derive_key;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoresetError {
    #[error("the coreset estimator accepts insertions only")]
    DeletionUnsupported,
    #[error("T would have more than k = {k} distinct points")]
    DistinctBoundExceeded { k: usize },
    #[error("|S| = {n_s} but |T| = {n_t}; the EMD needs equal sizes")]
    SizeMismatch { n_s: u64, n_t: u64 },
    #[error("no points in the stream")]
    EmptyStream,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("point {0} outside the domain")]
    OutOfDomain(Point),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoresetConfig {
    pub k: usize,
    pub epsilon: f64,
    pub domain: Domain,
    pub bucket_size: usize,
    pub fan_in: usize,
    /// Merge-tree depth the error budget is split over.
    pub max_depth: u32,
    pub seed: u64,
}

/// `b = max(64, ⌈4k/ε²⌉)`.
pub fn default_bucket_size(k: usize, epsilon: f64) -> usize {
    ((4.0 * k as f64 / (epsilon * epsilon)).ceil() as usize).max(64)
}

impl CoresetConfig {
    pub fn new(domain: Domain, k: usize, epsilon: f64, seed: u64) -> Self {
        Self {
            k,
            epsilon,
            domain,
            bucket_size: default_bucket_size(k, epsilon),
            fan_in: 2,
            max_depth: 16,
            seed,
        }
    }

    /// Accuracy handed to each reduce: `ε / (2 · max_depth)`.
    pub fn reduce_epsilon(&self) -> f64 {
        self.epsilon / (2.0 * self.max_depth as f64)
    }

    fn validate(&self) -> Result<(), CoresetError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(CoresetError::Config(format!("epsilon {} not in (0, 1)", self.epsilon)));
        }
        if self.k == 0 {
            return Err(CoresetError::Config("k must be >= 1".into()));
        }
        if self.bucket_size == 0 || self.fan_in < 2 || self.max_depth == 0 {
            return Err(CoresetError::Config(
                "bucket_size and max_depth must be >= 1 and fan_in >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// Bookkeeping for one reduce call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReduceRecord {
    pub depth: u32,
    pub input_weight: f64,
    pub input_distinct: usize,
    pub output_distinct: usize,
    pub centers: usize,
    /// Bicriteria cost `A = Σ w · d₂(p, centers)`.
    pub bicriteria_cost: f64,
    pub epsilon: f64,
    pub movement_l2: f64,
    pub movement_l1: f64,
    /// `ε' · A`; the construction guarantees `movement_l2 <= bound`.
    pub bound: f64,
}

impl ReduceRecord {
    pub fn within_bound(&self) -> bool {
        self.movement_l2 <= self.bound * (1.0 + 1e-12) + 1e-9
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduced {
    pub points: WeightedPointSet,
    pub record: ReduceRecord,
}

/// Number of bicriteria centers for a bucket of total weight `n`.
pub fn bicriteria_size(k: usize, n: f64) -> usize {
    (8.0 * k as f64 * n.max(2.0).ln()).ceil() as usize
}

fn nearest(p: Point, centers: &[Point]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| (i, p.l2(c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Weighted D-sampling: the first center with probability proportional to
/// weight, each later one proportional to weight times distance to the
/// centers chosen so far.
pub fn bicriteria_centers<R: Rng + ?Sized>(
    points: &[(Point, f64)],
    count: usize,
    rng: &mut R,
) -> Vec<Point> {
    let mut centers = Vec::with_capacity(count);
    let mut dist: Vec<f64> = vec![f64::INFINITY; points.len()];
    while centers.len() < count.min(points.len()) {
        let scores: Vec<f64> = points
            .iter()
            .zip(&dist)
            .map(|((_, w), d)| if centers.is_empty() { *w } else { w * d })
            .collect();
        let total: f64 = scores.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = scores.len() - 1;
        for (i, s) in scores.iter().enumerate() {
            if target < *s {
                pick = i;
                break;
            }
            target -= s;
        }
        let c = points[pick].0;
        centers.push(c);
        for (d, (p, _)) in dist.iter_mut().zip(points) {
            *d = d.min(p.l2(&c));
        }
    }
    centers
}

/// Center index, ring index and cell coordinates.
type RingCell = (usize, u32, i64, i64);

/// Snaps `bucket` onto ring cells around bicriteria centers.
pub fn reduce<R: Rng + ?Sized>(
    bucket: &WeightedPointSet,
    k: usize,
    epsilon: f64,
    depth: u32,
    rng: &mut R,
) -> Reduced {
    let points: Vec<(Point, f64)> = bucket.iter().collect();
    let weight = bucket.total_weight();
    let wanted = bicriteria_size(k, weight);
    let mut record = ReduceRecord {
        depth,
        input_weight: weight,
        input_distinct: points.len(),
        output_distinct: points.len(),
        centers: points.len().min(wanted),
        bicriteria_cost: 0.0,
        epsilon,
        movement_l2: 0.0,
        movement_l1: 0.0,
        bound: 0.0,
    };
    if points.len() <= wanted {
        return Reduced {
            points: bucket.clone(),
            record,
        };
    }
    let centers = bicriteria_centers(&points, wanted, rng);
    record.centers = centers.len();
    let assigned: Vec<(usize, f64)> = points.iter().map(|(p, _)| nearest(*p, &centers)).collect();
    let cost: f64 = points.iter().zip(&assigned).map(|((_, w), (_, d))| w * d).sum();
    record.bicriteria_cost = cost;
    record.bound = epsilon * cost;
    if cost == 0.0 {
        return Reduced {
            points: bucket.clone(),
            record,
        };
    }

    let rho = cost / weight;
    let beta = epsilon / (3.0 * std::f64::consts::SQRT_2);
    let mut cells: BTreeMap<RingCell, Vec<(Point, f64)>> = BTreeMap::new();
    for ((p, w), (ci, d)) in points.iter().zip(&assigned) {
        let ring = if *d <= rho {
            0
        } else {
            (d / rho).log2().ceil().max(1.0) as u32
        };
        let side = beta * rho * (1u64 << ring.min(62)) as f64;
        let c = centers[*ci];
        let cx = ((p.x as f64 - c.x as f64) / side).floor() as i64;
        let cy = ((p.y as f64 - c.y as f64) / side).floor() as i64;
        cells.entry((*ci, ring, cx, cy)).or_default().push((*p, *w));
    }

    let mut out = WeightedPointSet::new();
    for members in cells.values() {
        let rep = weighted_medoid(members);
        let mass: f64 = members.iter().map(|(_, w)| w).sum();
        for (p, w) in members {
            record.movement_l2 += w * p.l2(&rep);
            record.movement_l1 += w * p.l1(&rep) as f64;
        }
        out.add(rep, mass);
    }
    record.output_distinct = out.len();
    Reduced { points: out, record }
}

fn weighted_medoid(members: &[(Point, f64)]) -> Point {
    if members.len() == 1 {
        return members[0].0;
    }
    members
        .iter()
        .map(|(c, _)| {
            let cost: f64 = members.iter().map(|(p, w)| w * p.l2(c)).sum();
            (*c, cost)
        })
        .fold((members[0].0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
        .0
}

/// Merge-and-reduce summary of `S` plus the exact multiset `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoresetState {
    config: CoresetConfig,
    buffer: WeightedPointSet,
    buffer_weight: u64,
    /// `levels[d]` holds the reduced buckets waiting at tree depth `d`.
    levels: Vec<Vec<WeightedPointSet>>,
    t_store: BTreeMap<Point, u64>,
    n_s: u64,
    n_t: u64,
    reduces: Vec<ReduceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoresetEstimate {
    pub emd: f64,
    pub core_distinct: usize,
    pub reduces: usize,
    pub movement_l1: f64,
    pub movement_l2: f64,
}

impl CoresetState {
    pub fn new(config: CoresetConfig) -> Result<Self, CoresetError> {
        config.validate()?;
        Ok(Self {
            config,
            buffer: WeightedPointSet::new(),
            buffer_weight: 0,
            levels: Vec::new(),
            t_store: BTreeMap::new(),
            n_s: 0,
            n_t: 0,
            reduces: Vec::new(),
        })
    }

    pub fn config(&self) -> &CoresetConfig {
        &self.config
    }

    pub fn totals(&self) -> (u64, u64) {
        (self.n_s, self.n_t)
    }

    pub fn reduces(&self) -> &[ReduceRecord] {
        &self.reduces
    }

    pub fn t_store(&self) -> WeightedPointSet {
        WeightedPointSet::from_weighted(self.t_store.iter().map(|(p, m)| (*p, *m as f64)))
    }

    pub fn movement_l1(&self) -> f64 {
        self.reduces.iter().map(|r| r.movement_l1).sum()
    }

    pub fn movement_l2(&self) -> f64 {
        self.reduces.iter().map(|r| r.movement_l2).sum()
    }

    /// Current coreset of `S`: the raw buffer plus every pending bucket.
    pub fn s_core(&self) -> WeightedPointSet {
        let mut core = self.buffer.clone();
        for bucket in self.levels.iter().flatten() {
            for (p, w) in bucket.iter() {
                core.add(p, w);
            }
        }
        core
    }

    pub fn insert(&mut self, set: SetId, p: Point, count: u64) -> Result<(), CoresetError> {
        if !self.config.domain.contains(p) {
            return Err(CoresetError::OutOfDomain(p));
        }
        if count == 0 {
            return Ok(());
        }
        match set {
            SetId::T => {
                if !self.t_store.contains_key(&p) && self.t_store.len() >= self.config.k {
                    return Err(CoresetError::DistinctBoundExceeded { k: self.config.k });
                }
                *self.t_store.entry(p).or_insert(0) += count;
                self.n_t += count;
            }
            SetId::S => {
                self.buffer.add(p, count as f64);
                self.buffer_weight += count;
                self.n_s += count;
                if self.buffer_weight >= self.config.bucket_size as u64 {
                    let full = std::mem::take(&mut self.buffer);
                    self.buffer_weight = 0;
                    self.push_bucket(full);
                }
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, u: &StreamUpdate) -> Result<(), CoresetError> {
        if u.sign == Sign::Delete {
            return Err(CoresetError::DeletionUnsupported);
        }
        self.insert(u.set, u.point, u.count)
    }

    fn reduce_at(&mut self, bucket: &WeightedPointSet, depth: u32) -> WeightedPointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(
            derive_key(self.config.seed, &[self.reduces.len() as u64]) as u64,
        );
        let r = reduce(bucket, self.config.k, self.config.reduce_epsilon(), depth, &mut rng);
        self.reduces.push(r.record);
        r.points
    }

    fn push_bucket(&mut self, raw: WeightedPointSet) {
        let mut carry = self.reduce_at(&raw, 0);
        let mut depth = 0usize;
        loop {
            if self.levels.len() <= depth {
                self.levels.push(Vec::new());
            }
            self.levels[depth].push(carry);
            if self.levels[depth].len() < self.config.fan_in {
                return;
            }
            let mut merged = WeightedPointSet::new();
            for bucket in self.levels[depth].drain(..) {
                for (p, w) in bucket.iter() {
                    merged.add(p, w);
                }
            }
            depth += 1;
            carry = self.reduce_at(&merged, depth as u32);
        }
    }

    pub fn estimate(&self) -> Result<CoresetEstimate, CoresetError> {
        if self.n_s != self.n_t {
            return Err(CoresetError::SizeMismatch {
                n_s: self.n_s,
                n_t: self.n_t,
            });
        }
        if self.n_s == 0 {
            return Err(CoresetError::EmptyStream);
        }
        let core = self.s_core();
        let emd = exact_emd(&core, &self.t_store())?.cost;
        Ok(CoresetEstimate {
            emd,
            core_distinct: core.len(),
            reduces: self.reduces.len(),
            movement_l1: self.movement_l1(),
            movement_l2: self.movement_l2(),
        })
    }
}

pub fn cs_insert(st: &mut CoresetState, set: SetId, p: Point) -> Result<(), CoresetError> {
    st.insert(set, p, 1)
}

pub fn cs_estimate(st: &CoresetState) -> Result<f64, CoresetError> {
    Ok(st.estimate()?.emd)
}

/// Two far-apart `T` sites of weight `n/2` each with unit-distance `S`
/// partners, and the same `S` with its weights skewed by `(1 ± ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationDemo {
    pub separation: u64,
    pub emd: f64,
    pub perturbed_emd: f64,
    /// `ε · (n/2) · separation`, the mass that must cross times the gap.
    pub forced_cost: f64,
}

pub fn weight_perturbation_demo(
    domain: Domain,
    n: u64,
    epsilon: f64,
) -> Result<PerturbationDemo, CoresetError> {
    let far = domain.delta();
    let (t1, t2) = (Point::new(1, 1), Point::new(far, 1));
    let (s1, s2) = (Point::new(1, 2), Point::new(far, 2));
    let half = n as f64 / 2.0;
    let t = WeightedPointSet::from_weighted([(t1, half), (t2, half)]);
    let s = WeightedPointSet::from_weighted([(s1, half), (s2, half)]);
    let skewed = WeightedPointSet::from_weighted([(s1, half * (1.0 + epsilon)), (s2, half * (1.0 - epsilon))]);
    let separation = t1.l1(&t2);
    Ok(PerturbationDemo {
        separation,
        emd: exact_emd(&s, &t)?.cost,
        perturbed_emd: exact_emd(&skewed, &t)?.cost,
        forced_cost: epsilon * half * separation as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domain() -> Domain {
        Domain::new(64).unwrap()
    }

    #[test]
    fn repeated_point_stays_exact() {
        let mut cfg = CoresetConfig::new(domain(), 1, 0.1, 1);
        cfg.bucket_size = 64;
        let mut st = CoresetState::new(cfg).unwrap();
        for _ in 0..1000 {
            cs_insert(&mut st, SetId::S, Point::new(1, 1)).unwrap();
        }
        let core = st.s_core();
        assert_eq!(core.len(), 1);
        assert_eq!(core.weight(Point::new(1, 1)), 1000.0);
        assert_eq!(st.movement_l2(), 0.0);
        assert!(!st.reduces().is_empty());
    }

    #[test]
    fn no_reduce_means_raw_set() {
        let mut st = CoresetState::new(CoresetConfig::new(domain(), 2, 0.1, 1)).unwrap();
        let mut raw = WeightedPointSet::new();
        for i in 1..=50u32 {
            let p = Point::new(i, (i * 7) % 64 + 1);
            st.insert(SetId::S, p, 1).unwrap();
            raw.add(p, 1.0);
        }
        assert_eq!(st.s_core(), raw);
        assert!(st.reduces().is_empty());
    }

    #[test]
    fn small_buckets_are_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let single = WeightedPointSet::from_points([Point::new(5, 5)]);
        let r = reduce(&single, 1, 0.1, 0, &mut rng);
        assert_eq!(r.points, single);
        assert_eq!(r.record.movement_l2, 0.0);
        let few = WeightedPointSet::from_points([Point::new(1, 1), Point::new(60, 60)]);
        assert_eq!(reduce(&few, 2, 0.1, 0, &mut rng).points, few);
    }

    #[test]
    fn reduce_respects_movement_bound_and_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let big = Domain::new(1 << 12).unwrap();
        let mut bucket = WeightedPointSet::new();
        for _ in 0..4000 {
            let cx = if rng.gen_bool(0.5) { 500 } else { 3000 };
            let p = Point::new(cx + rng.gen_range(0..400), cx + rng.gen_range(0..400));
            assert!(big.contains(p));
            bucket.add(p, 1.0);
        }
        let r = reduce(&bucket, 2, 0.9, 0, &mut rng);
        assert!(r.record.within_bound(), "{:?}", r.record);
        assert_eq!(r.points.total_weight(), bucket.total_weight());
        assert!(r.points.len() < bucket.len(), "{:?}", r.record);
        assert!(r.points.is_integral());
    }

    #[test]
    fn deletions_and_extra_t_sites_rejected() {
        let mut st = CoresetState::new(CoresetConfig::new(domain(), 1, 0.1, 1)).unwrap();
        assert_eq!(
            st.apply(&StreamUpdate::delete(SetId::S, Point::new(1, 1), 1)),
            Err(CoresetError::DeletionUnsupported)
        );
        st.insert(SetId::T, Point::new(2, 2), 3).unwrap();
        assert_eq!(
            st.insert(SetId::T, Point::new(3, 3), 1),
            Err(CoresetError::DistinctBoundExceeded { k: 1 })
        );
        st.insert(SetId::T, Point::new(2, 2), 1).unwrap();
        assert!(matches!(st.estimate(), Err(CoresetError::SizeMismatch { .. })));
    }

    #[test]
    fn perturbation_blows_up_emd() {
        let d = weight_perturbation_demo(Domain::new(128).unwrap(), 100, 0.1).unwrap();
        assert_eq!(d.emd, 100.0);
        assert!(d.perturbed_emd >= d.forced_cost);
        assert!(d.perturbed_emd > 2.0 * 1.1 * d.emd);
    }
}
