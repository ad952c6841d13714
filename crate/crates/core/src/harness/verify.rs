//! Runs the structural claims about grids and optimal matchings on seeded
//! random instances and tallies violations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generators::{generate, Generator, Instance, InstanceSpec};
use super::{HarnessError, REPORT_SCHEMA};
use crate::estimators::{draw_grids, multigrid_formula, MultigridConfig, MultigridState};
use crate::geometry::{random_grid, Domain, SparseCellCounts};
use crate::matching_graph::{
    build_gamma, check_no_long_cycle, crossing_count, distinct_k, is_good_grid, long_edge_bound,
    path_decompose,
};
use crate::oracle::{exact_emd, Matching};
use crate::sketch::hash::derive_key;

/// Largest tolerated bad-grid frequency per level.
pub const BAD_GRID_LIMIT: f64 = 0.55;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub instances: usize,
    pub domain: Domain,
    pub n_max: u64,
    pub k_max: usize,
    pub grids_per_level: usize,
    pub shifts: usize,
    pub seed: u64,
}

impl VerifyConfig {
    pub fn new(domain: Domain, seed: u64) -> Self {
        Self {
            instances: 20,
            domain,
            n_max: 100,
            k_max: 4,
            grids_per_level: 4,
            shifts: 2000,
            seed,
        }
    }

    pub fn instance(&self, id: usize) -> Result<Instance, HarnessError> {
        let key = derive_key(self.seed, &[id as u64]) as u64;
        let k = 1 + (key % self.k_max as u64) as usize;
        let n = k as u64 + (key >> 8) % self.n_max.saturating_sub(k as u64).max(1);
        let generator = [Generator::Uniform, Generator::Clustered, Generator::AdversarialMinGrid][id % 3];
        generate(&InstanceSpec {
            n,
            k,
            domain: self.domain,
            generator,
            seed: key,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimCheck {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimsReport {
    pub schema: String,
    pub config: VerifyConfig,
    pub checks: Vec<ClaimCheck>,
}

impl ClaimsReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    eq4: (usize, usize),
    long_edges: (usize, usize),
    crossing: (usize, usize),
    no_cycle: (usize, usize),
    decomposition: (usize, usize),
    formula: (usize, usize),
    worst_bad_fraction: f64,
}

fn add(a: (usize, usize), ok: bool) -> (usize, usize) {
    (a.0 + 1, a.1 + usize::from(!ok))
}

fn check_grid_claims(inst: &Instance, m: &Matching, k: u64, grid: &crate::geometry::GridSpec, t: &mut Tally) -> Result<(), HarnessError> {
    let norm = SparseCellCounts::from_sets(*grid, &inst.s, &inst.t).l1();
    let gamma = build_gamma(m, grid)?;
    t.eq4 = add(t.eq4, gamma.imbalance() == norm);
    t.long_edges = add(t.long_edges, long_edge_bound(m, &inst.s, &inst.t, grid, k)?.holds());
    t.crossing = add(t.crossing, norm <= 2 * crossing_count(m, grid)?);
    let threshold = gamma.long_threshold(k);
    t.no_cycle = add(t.no_cycle, check_no_long_cycle(&gamma, threshold));
    let ok = match path_decompose(&gamma, threshold) {
        Ok(d) => {
            d.remaining_long == 0
                && d.imbalance_trace.windows(2).all(|w| w[0] == w[1] + 2)
                && 2 * d.paths.len() as u64 <= norm
                && d.paths.iter().all(|p| p.len() as u64 <= k && p.long_edges as u64 <= k)
        }
        Err(_) => false,
    };
    t.decomposition = add(t.decomposition, ok);
    Ok(())
}

fn verify_instance(config: &VerifyConfig, id: usize) -> Result<Tally, HarnessError> {
    let inst = config.instance(id)?;
    let m = exact_emd(&inst.s, &inst.t)?;
    let k = distinct_k(&inst.s, &inst.t);
    let mg = MultigridConfig {
        grids_per_level: config.grids_per_level,
        ..MultigridConfig::exact(config.domain, derive_key(config.seed, &[id as u64, 1]) as u64)
    };
    let grids = draw_grids(&mg);
    let mut tally = Tally::default();
    for level in &grids {
        for g in level {
            check_grid_claims(&inst, &m, k, g, &mut tally)?;
        }
    }

    let mut st = MultigridState::new(&mg)?;
    st.update_batch(&inst.updates());
    let z = st.estimate()?.z;
    let c: Vec<f64> = grids
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|g| SparseCellCounts::from_sets(*g, &inst.s, &inst.t).l1() as f64)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    tally.formula = add(tally.formula, z == multigrid_formula(k as f64, &c));

    let mut rng = ChaCha8Rng::seed_from_u64(derive_key(config.seed, &[id as u64, 2]) as u64);
    for level in 1..=config.domain.log_delta() {
        let bad = (0..config.shifts)
            .filter(|_| {
                let g = random_grid(config.domain, level, &mut rng).expect("level in range");
                !is_good_grid(&g, &m, k)
            })
            .count();
        tally.worst_bad_fraction = tally
            .worst_bad_fraction
            .max(bad as f64 / config.shifts.max(1) as f64);
    }
    Ok(tally)
}

pub fn verify_claims(config: &VerifyConfig) -> Result<ClaimsReport, HarnessError> {
    let tallies: Vec<Tally> = (0..config.instances)
        .into_par_iter()
        .map(|id| verify_instance(config, id))
        .collect::<Result<_, _>>()?;
    let sum = |f: fn(&Tally) -> (usize, usize)| {
        tallies
            .iter()
            .map(f)
            .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    };
    let check = |name: &str, (checked, violations): (usize, usize), detail: &str| ClaimCheck {
        name: name.into(),
        checked,
        violations,
        passed: violations == 0,
        detail: detail.into(),
    };
    let worst = tallies.iter().map(|t| t.worst_bad_fraction).fold(0.0, f64::max);
    let checks = vec![
        check("degree-imbalance-identity", sum(|t| t.eq4), "sum |out - in| over cells equals the cell-count l1 difference"),
        check("long-edge-bound", sum(|t| t.long_edges), "edges of length >= k 2^(i+1) are at most (k/2) C"),
        check("crossing-bound", sum(|t| t.crossing), "cell-count l1 difference is at most twice the crossings"),
        check("no-long-cycle", sum(|t| t.no_cycle), "no long edge on a directed cycle of the cell graph"),
        check("path-decomposition", sum(|t| t.decomposition), "each extraction lowers the imbalance by 2; paths have <= k edges"),
        check("exact-mode-formula", sum(|t| t.formula), "exact-backend Z equals the closed form with true k"),
        ClaimCheck {
            name: "good-grid-probability".into(),
            checked: tallies.len() * config.domain.log_delta() as usize,
            violations: usize::from(worst > BAD_GRID_LIMIT),
            passed: worst <= BAD_GRID_LIMIT,
            detail: format!("worst per-level bad-grid frequency {worst:.4} (limit {BAD_GRID_LIMIT})"),
        },
    ];
    Ok(ClaimsReport {
        schema: REPORT_SCHEMA.to_string(),
        config: config.clone(),
        checks,
    })
}
