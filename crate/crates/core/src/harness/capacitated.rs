//! Capacitated k-median by exhaustive search over estimated EMDs: every set
//! of `k` centers in `[Δ]²` and every capacity vector with entries in
//! `0..=c` summing to `n` is scored as the EMD between the input and the
//! centers weighted by their capacities.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::estimators::{
    BaselineConfig, BaselineState, CombinedState, EmdEstimator, MultigridConfig, MultigridState,
};
use crate::geometry::{Point, SetId, StreamUpdate, WeightedPointSet};
use crate::oracle::{check_capacitated_bounds, exact_emd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CapEstimator {
    Exact,
    Multigrid,
    Baseline,
    Combined,
}

impl CapEstimator {
    pub const ALL: [CapEstimator; 4] = [
        CapEstimator::Exact,
        CapEstimator::Multigrid,
        CapEstimator::Baseline,
        CapEstimator::Combined,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitatedResult {
    pub estimator: CapEstimator,
    pub centers: Vec<Point>,
    pub capacities: Vec<u64>,
    /// Estimated cost of the chosen solution; the search minimises this.
    pub estimated_cost: f64,
    /// Exact transport cost of the chosen solution.
    pub exact_cost: f64,
    pub candidates: usize,
}

/// Capacity vectors of length `k` with entries in `0..=cap` summing to `n`.
pub fn capacity_vectors(n: u64, k: usize, cap: u64) -> Vec<Vec<u64>> {
    fn go(n: u64, k: usize, cap: u64, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if k == 1 {
            if n <= cap {
                prefix.push(n);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        for first in 0..=cap.min(n) {
            prefix.push(first);
            go(n - first, k - 1, cap, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k > 0 {
        go(n, k, cap, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

enum Frozen {
    Exact(WeightedPointSet),
    Multigrid(MultigridState),
    Baseline(BaselineState),
    Combined(CombinedState),
}

fn score<E: EmdEstimator + Clone>(frozen: &E, t: &[StreamUpdate]) -> Result<f64, HarnessError> {
    let mut st = frozen.clone();
    st.update_batch(t);
    Ok(st.estimate_emd()?)
}

impl Frozen {
    fn cost(&self, centers: &[Point], caps: &[u64]) -> Result<f64, HarnessError> {
        let t: Vec<StreamUpdate> = centers
            .iter()
            .zip(caps)
            .filter(|(_, &m)| m > 0)
            .map(|(c, &m)| StreamUpdate::insert(SetId::T, *c, m))
            .collect();
        match self {
            Frozen::Exact(p) => {
                let t = WeightedPointSet::from_weighted(t.iter().map(|u| (u.point, u.count as f64)));
                Ok(exact_emd(p, &t)?.cost)
            }
            Frozen::Multigrid(st) => score(st, &t),
            Frozen::Baseline(st) => score(st, &t),
            Frozen::Combined(st) => score(st, &t),
        }
    }
}

/// Exhaustive capacitated search. `points` must contain `S` insertions
/// only; they form the input multiset `P`.
pub fn capacitated_search(
    points: &[StreamUpdate],
    k: usize,
    capacity: u64,
    estimator: CapEstimator,
    config: &MultigridConfig,
) -> Result<CapacitatedResult, HarnessError> {
    if points.iter().any(|u| u.set != SetId::S) {
        return Err(HarnessError::Config(
            "capacitated input must list the points as S updates".into(),
        ));
    }
    let (p, _) = super::run::net_multisets(points)?;
    let n = p.total_weight() as u64;
    if n == 0 {
        return Err(HarnessError::ModelViolation("no input points".into()));
    }
    let domain = config.domain;
    check_capacitated_bounds(n, k, capacity, domain)?;

    let frozen = match estimator {
        CapEstimator::Exact => Frozen::Exact(p.clone()),
        CapEstimator::Multigrid => {
            let mut st = MultigridState::new(config)?;
            st.update_batch(points);
            Frozen::Multigrid(st)
        }
        CapEstimator::Baseline => {
            let mut st = BaselineState::new(&BaselineConfig::matching(config))?;
            st.update_batch(points);
            Frozen::Baseline(st)
        }
        CapEstimator::Combined => {
            let mut st = CombinedState::new(config)?;
            st.update_batch(points);
            Frozen::Combined(st)
        }
    };

    let caps = capacity_vectors(n, k, capacity);
    let candidates: Vec<(Vec<Point>, &Vec<u64>)> = domain
        .points()
        .combinations(k)
        .flat_map(|centers| caps.iter().map(move |c| (centers.clone(), c)))
        .collect();
    let scored: Vec<Result<f64, HarnessError>> = candidates
        .par_iter()
        .map(|(centers, c)| frozen.cost(centers, c))
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, r) in scored.into_iter().enumerate() {
        let cost = r?;
        if best.is_none_or(|(_, b)| cost < b) {
            best = Some((i, cost));
        }
    }
    let (i, estimated_cost) = best.ok_or(HarnessError::ModelViolation("no feasible candidate".into()))?;
    let (centers, caps) = &candidates[i];
    let exact_cost = Frozen::Exact(p).cost(centers, caps)?;
    Ok(CapacitatedResult {
        estimator,
        centers: centers.clone(),
        capacities: caps.to_vec(),
        estimated_cost,
        exact_cost,
        candidates: candidates.len(),
    })
}
