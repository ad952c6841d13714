//! Ground truth: exact EMD through a min-cost transportation solver, plus
//! enumeration-based references for instances small enough to brute force.

mod flow;

pub use flow::{ArcRef, MinCostFlow};

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Domain, Point, WeightedPointSet};

/// Scale applied to real-valued weights before the integral flow solve.
pub const WEIGHT_PRECISION: f64 = 1e6;

/// Relative tolerance when comparing real-valued totals.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

pub const BRUTE_FORCE_MAX: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("total weights differ: {s} vs {t}")]
    WeightMismatch { s: f64, t: f64 },
    #[error("empty input set")]
    EmptyInput,
    #[error("negative weight in input")]
    NegativeWeight,
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),
    #[error("infeasible: capacity {capacity} x {k} centers < {n} points")]
    Infeasible { n: u64, k: usize, capacity: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Metric {
    #[default]
    L1,
    L2,
}

impl Metric {
    pub fn distance(self, a: &Point, b: &Point) -> f64 {
        match self {
            Metric::L1 => a.l1(b) as f64,
            Metric::L2 => a.l2(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingEdge {
    pub from: Point,
    pub to: Point,
    /// Units of mass on this pair; integral whenever the inputs are.
    pub multiplicity: f64,
    pub l1_length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub edges: Vec<MatchingEdge>,
    pub cost: f64,
}

impl Matching {
    pub fn is_integral(&self) -> bool {
        self.edges.iter().all(|e| e.multiplicity.fract() == 0.0)
    }

    /// Total mass leaving `p` (as an S point).
    pub fn outflow(&self, p: Point) -> f64 {
        self.edges
            .iter()
            .filter(|e| e.from == p)
            .map(|e| e.multiplicity)
            .sum()
    }

    /// Total mass arriving at `p` (as a T point).
    pub fn inflow(&self, p: Point) -> f64 {
        self.edges
            .iter()
            .filter(|e| e.to == p)
            .map(|e| e.multiplicity)
            .sum()
    }

    pub fn l1_cost(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| e.multiplicity * e.l1_length as f64)
            .sum()
    }
}

fn check_pair(s: &WeightedPointSet, t: &WeightedPointSet) -> Result<(), OracleError> {
    if s.is_empty() || t.is_empty() {
        return Err(OracleError::EmptyInput);
    }
    if s.has_negative() || t.has_negative() {
        return Err(OracleError::NegativeWeight);
    }
    let (ws, wt) = (s.total_weight(), t.total_weight());
    if (ws - wt).abs() > WEIGHT_TOLERANCE * ws.abs().max(wt.abs()).max(1.0) {
        return Err(OracleError::WeightMismatch { s: ws, t: wt });
    }
    Ok(())
}

type Supplies = Vec<(Point, i64)>;

/// Integer supplies for the flow solve; real weights are scaled and the
/// rounding residue is absorbed by the heaviest entry so both sides balance.
fn integer_weights(
    s: &WeightedPointSet,
    t: &WeightedPointSet,
) -> (Supplies, Supplies, f64) {
    let scale = if s.is_integral() && t.is_integral() {
        1.0
    } else {
        WEIGHT_PRECISION
    };
    let convert = |set: &WeightedPointSet| -> Vec<(Point, i64)> {
        set.iter()
            .map(|(p, w)| (p, (w * scale).round() as i64))
            .filter(|(_, w)| *w > 0)
            .collect()
    };
    let mut ws = convert(s);
    let mut wt = convert(t);
    let total_s: i64 = ws.iter().map(|(_, w)| w).sum();
    let total_t: i64 = wt.iter().map(|(_, w)| w).sum();
    let diff = total_s - total_t;
    if diff != 0 {
        let side = if diff > 0 { &mut ws } else { &mut wt };
        if let Some(heaviest) = side.iter_mut().max_by_key(|(_, w)| *w) {
            heaviest.1 -= diff.abs();
        }
    }
    (ws, wt, scale)
}

/// Minimum-cost transportation between `s` and `t` under `metric`.
pub fn exact_emd_with(
    s: &WeightedPointSet,
    t: &WeightedPointSet,
    metric: Metric,
) -> Result<Matching, OracleError> {
    check_pair(s, t)?;
    let (ws, wt, scale) = integer_weights(s, t);
    let (a, b) = (ws.len(), wt.len());
    let source = a + b;
    let sink = source + 1;
    let mut g = MinCostFlow::new(a + b + 2);
    let total: i64 = ws.iter().map(|(_, w)| w).sum();
    for (i, (_, w)) in ws.iter().enumerate() {
        g.add_edge(source, i, *w, 0.0);
    }
    for (j, (_, w)) in wt.iter().enumerate() {
        g.add_edge(a + j, sink, *w, 0.0);
    }
    let mut arcs = Vec::with_capacity(a * b);
    for (i, (p, _)) in ws.iter().enumerate() {
        for (j, (q, _)) in wt.iter().enumerate() {
            arcs.push((i, j, g.add_edge(i, a + j, total, metric.distance(p, q))));
        }
    }
    let (flow, _) = g.solve(source, sink, total);
    debug_assert_eq!(flow, total);

    let mut edges = Vec::new();
    let mut cost = 0.0;
    for (i, j, arc) in arcs {
        let f = g.flow_on(arc);
        if f > 0 {
            let (from, to) = (ws[i].0, wt[j].0);
            let multiplicity = f as f64 / scale;
            cost += multiplicity * metric.distance(&from, &to);
            edges.push(MatchingEdge {
                from,
                to,
                multiplicity,
                l1_length: from.l1(&to),
            });
        }
    }
    Ok(Matching { edges, cost })
}

/// Exact ℓ1 earth-mover distance with the optimal plan.
pub fn exact_emd(s: &WeightedPointSet, t: &WeightedPointSet) -> Result<Matching, OracleError> {
    exact_emd_with(s, t, Metric::L1)
}

/// Minimum over all bijections of the expanded multisets, by enumeration.
pub fn brute_force_emd_with(
    s: &WeightedPointSet,
    t: &WeightedPointSet,
    metric: Metric,
) -> Result<f64, OracleError> {
    check_pair(s, t)?;
    let a = s.expand();
    let b = t.expand();
    if a.len() > BRUTE_FORCE_MAX || b.len() > BRUTE_FORCE_MAX {
        return Err(OracleError::TooLarge(format!(
            "{} points, limit {BRUTE_FORCE_MAX}",
            a.len().max(b.len())
        )));
    }
    let best = (0..b.len())
        .permutations(b.len())
        .map(|perm| {
            a.iter()
                .zip(perm)
                .map(|(p, j)| metric.distance(p, &b[j]))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

pub fn brute_force_emd(s: &WeightedPointSet, t: &WeightedPointSet) -> Result<f64, OracleError> {
    brute_force_emd_with(s, t, Metric::L1)
}

/// `Median(P, C) = Σ w(p) · min_c ||p - c||₂`.
pub fn median_cost(p: &WeightedPointSet, centers: &[Point]) -> f64 {
    p.iter()
        .map(|(q, w)| {
            w * centers
                .iter()
                .map(|c| q.l2(c))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMedianSolution {
    pub centers: Vec<Point>,
    pub cost: f64,
}

/// Exhaustive Euclidean k-median with centers restricted to `[Δ]²`.
pub fn exact_kmedian(
    p: &WeightedPointSet,
    k: usize,
    domain: Domain,
) -> Result<KMedianSolution, OracleError> {
    if domain.delta() > 8 || k > 3 || k == 0 {
        return Err(OracleError::TooLarge(format!(
            "k = {k}, Δ = {} (limits k in 1..=3, Δ <= 8)",
            domain.delta()
        )));
    }
    if p.is_empty() {
        return Err(OracleError::EmptyInput);
    }
    let candidates: Vec<Point> = domain.points().collect();
    let mut best = KMedianSolution {
        centers: Vec::new(),
        cost: f64::INFINITY,
    };
    for centers in candidates.iter().copied().combinations(k) {
        let cost = median_cost(p, &centers);
        if cost < best.cost {
            best = KMedianSolution { centers, cost };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitatedSolution {
    pub centers: Vec<Point>,
    /// Number of points served by each center, aligned with `centers`.
    pub capacities: Vec<u64>,
    pub cost: f64,
}

pub const CAPACITATED_MAX_POINTS: u64 = 8;
pub const CAPACITATED_MAX_DELTA: u32 = 4;
pub const CAPACITATED_MAX_K: usize = 2;

pub(crate) fn check_capacitated_bounds(
    n: u64,
    k: usize,
    capacity: u64,
    domain: Domain,
) -> Result<(), OracleError> {
    if n > CAPACITATED_MAX_POINTS
        || domain.delta() > CAPACITATED_MAX_DELTA
        || k > CAPACITATED_MAX_K
        || k == 0
    {
        return Err(OracleError::TooLarge(format!(
            "n = {n}, k = {k}, Δ = {} (limits n <= {CAPACITATED_MAX_POINTS}, k <= {CAPACITATED_MAX_K}, Δ <= {CAPACITATED_MAX_DELTA})",
            domain.delta()
        )));
    }
    if capacity.saturating_mul(k as u64) < n {
        return Err(OracleError::Infeasible { n, k, capacity });
    }
    Ok(())
}

/// Capacitated k-median under `metric`, by enumerating center sets and
/// solving each assignment as a flow with per-center capacity `capacity`.
pub fn exact_capacitated_kmedian_with(
    p: &WeightedPointSet,
    k: usize,
    capacity: u64,
    domain: Domain,
    metric: Metric,
) -> Result<CapacitatedSolution, OracleError> {
    if p.is_empty() {
        return Err(OracleError::EmptyInput);
    }
    if !p.is_integral() || p.has_negative() {
        return Err(OracleError::NegativeWeight);
    }
    let n = p.total_weight() as u64;
    check_capacitated_bounds(n, k, capacity, domain)?;

    let points: Vec<(Point, i64)> = p.iter().map(|(q, w)| (q, w as i64)).collect();
    let candidates: Vec<Point> = domain.points().collect();
    let mut best: Option<CapacitatedSolution> = None;
    for centers in candidates.iter().copied().combinations(k) {
        let m = points.len();
        let source = m + k;
        let sink = source + 1;
        let mut g = MinCostFlow::new(m + k + 2);
        for (i, (_, w)) in points.iter().enumerate() {
            g.add_edge(source, i, *w, 0.0);
        }
        let served: Vec<ArcRef> = (0..k)
            .map(|j| g.add_edge(m + j, sink, capacity as i64, 0.0))
            .collect();
        for (i, (q, _)) in points.iter().enumerate() {
            for (j, c) in centers.iter().enumerate() {
                g.add_edge(i, m + j, n as i64, metric.distance(q, c));
            }
        }
        let (flow, cost) = g.solve(source, sink, n as i64);
        if flow as u64 != n {
            continue;
        }
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(CapacitatedSolution {
                capacities: served.iter().map(|a| g.flow_on(*a) as u64).collect(),
                centers,
                cost,
            });
        }
    }
    best.ok_or(OracleError::Infeasible { n, k, capacity })
}

pub fn exact_capacitated_kmedian(
    p: &WeightedPointSet,
    k: usize,
    capacity: u64,
    domain: Domain,
) -> Result<CapacitatedSolution, OracleError> {
    exact_capacitated_kmedian_with(p, k, capacity, domain, Metric::L1)
}
