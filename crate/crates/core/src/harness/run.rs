use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{HarnessError, REPORT_SCHEMA};
use crate::coreset::{CoresetConfig, CoresetState};
use crate::estimators::{
    BaselineConfig, BaselineState, CombinedState, MultigridConfig, MultigridState,
};
use crate::geometry::{Domain, Point, SetId, StreamUpdate, WeightedPointSet};
use crate::oracle::exact_emd;
use crate::sketch::L0Mode;

/// Distinct-location count up to which `run` also solves the exact EMD.
pub const EXACT_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Exact,
    Coreset,
    Multigrid,
    Baseline,
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: Domain,
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub delta_prob: f64,
    pub seed: u64,
    pub grids_per_level: Option<usize>,
    /// Distinct-point bound for the coreset; defaults to distinct `T` in the stream.
    pub k: Option<usize>,
    pub l0_mode: L0Mode,
    /// Record wall time. Off by default so replays give identical reports.
    pub timing: bool,
}

impl RunConfig {
    pub fn new(domain: Domain, algorithm: Algorithm) -> Self {
        Self {
            domain,
            algorithm,
            epsilon: 0.1,
            delta_prob: 0.05,
            seed: 0,
            grids_per_level: None,
            k: None,
            l0_mode: L0Mode::Sketch,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(HarnessError::Config(format!("epsilon {} not in (0, 1)", self.epsilon)));
        }
        if !(self.delta_prob > 0.0 && self.delta_prob < 1.0) {
            return Err(HarnessError::Config(format!(
                "delta-prob {} not in (0, 1)",
                self.delta_prob
            )));
        }
        if self.grids_per_level == Some(0) {
            return Err(HarnessError::Config("grids-per-level must be >= 1".into()));
        }
        Ok(())
    }

    pub fn multigrid_config(&self) -> MultigridConfig {
        let mut c = MultigridConfig::new(self.domain, self.seed);
        c.epsilon = self.epsilon;
        c.delta = self.delta_prob;
        c.l0_mode = self.l0_mode;
        if let Some(g) = self.grids_per_level {
            c.grids_per_level = g;
        }
        c
    }
}

/// Net multisets of a stream; fails on any negative running multiplicity.
pub fn net_multisets(
    updates: &[StreamUpdate],
) -> Result<(WeightedPointSet, WeightedPointSet), HarnessError> {
    let mut counts: BTreeMap<(SetId, Point), i64> = BTreeMap::new();
    for (i, u) in updates.iter().enumerate() {
        let c = counts.entry((u.set, u.point)).or_insert(0);
        *c += u.multiplicity_delta();
        if *c < 0 {
            return Err(HarnessError::ModelViolation(format!(
                "update {} drives the multiplicity of {:?} {} negative",
                i + 1,
                u.set,
                u.point
            )));
        }
    }
    let side = |set: SetId| {
        WeightedPointSet::from_weighted(
            counts
                .iter()
                .filter(|((s, _), c)| *s == set && **c > 0)
                .map(|((_, p), c)| (*p, *c as f64)),
        )
    };
    Ok((side(SetId::S), side(SetId::T)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Memory {
    pub sketches: usize,
    pub accumulators: usize,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub config: RunConfig,
    pub updates: usize,
    pub n_s: u64,
    pub n_t: u64,
    pub distinct_s: usize,
    pub distinct_t: usize,
    pub estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coreset_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory: Option<Memory>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn memory_of_multigrid(st: &MultigridState) -> Memory {
    Memory {
        sketches: st.sketch_count(),
        accumulators: st.accumulator_count(),
        bytes: st.memory_bytes(),
    }
}

pub fn run(config: &RunConfig, updates: &[StreamUpdate]) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let (s, t) = net_multisets(updates)?;
    let (n_s, n_t) = (s.total_weight() as u64, t.total_weight() as u64);
    let mut report = RunReport {
        schema: REPORT_SCHEMA.to_string(),
        config: config.clone(),
        updates: updates.len(),
        n_s,
        n_t,
        distinct_s: s.len(),
        distinct_t: t.len(),
        estimate: 0.0,
        z: None,
        baseline: None,
        k_hat: None,
        coreset_size: None,
        exact: None,
        ratio: None,
        memory: None,
        wall_time_ms: None,
    };
    if n_s != n_t {
        return Err(HarnessError::ModelViolation(format!(
            "|S| = {n_s} but |T| = {n_t}; the EMD needs equal sizes"
        )));
    }
    if n_s == 0 {
        return Err(HarnessError::ModelViolation("no points in the stream".into()));
    }
    let exact = (s.len() + t.len() <= EXACT_LIMIT)
        .then(|| exact_emd(&s, &t).map(|m| m.cost))
        .transpose()?;

    report.estimate = match config.algorithm {
        Algorithm::Exact => exact.map_or_else(|| exact_emd(&s, &t).map(|m| m.cost), Ok)?,
        Algorithm::Coreset => {
            let k = config.k.unwrap_or(t.len().max(1));
            let mut st = CoresetState::new(CoresetConfig::new(config.domain, k, config.epsilon, config.seed))?;
            for u in updates {
                st.apply(u)?;
            }
            let est = st.estimate()?;
            report.coreset_size = Some(est.core_distinct);
            est.emd
        }
        Algorithm::Multigrid => {
            let mut st = MultigridState::new(&config.multigrid_config())?;
            st.update_batch(updates);
            let est = st.estimate()?;
            report.k_hat = Some(est.k_hat);
            report.z = Some(est.z);
            report.memory = Some(memory_of_multigrid(&st));
            est.z
        }
        Algorithm::Baseline => {
            let mut st = BaselineState::new(&BaselineConfig::matching(&config.multigrid_config()))?;
            st.update_batch(updates);
            let b = st.estimate()?;
            report.baseline = Some(b);
            report.memory = st.sketch().map(|sk| Memory {
                sketches: 1,
                accumulators: sk.rows(),
                bytes: sk.memory_bytes(),
            });
            b
        }
        Algorithm::Combined => {
            let mut st = CombinedState::new(&config.multigrid_config())?;
            st.update_batch(updates);
            let r = st.estimate()?;
            report.k_hat = Some(r.k_hat);
            report.z = Some(r.z);
            report.baseline = Some(r.baseline);
            let mut mem = memory_of_multigrid(&st.multigrid);
            if let Some(sk) = st.baseline.sketch() {
                mem.sketches += 1;
                mem.accumulators += sk.rows();
                mem.bytes += sk.memory_bytes();
            }
            report.memory = Some(mem);
            r.combined
        }
    };
    report.exact = exact;
    report.ratio = exact.filter(|e| *e > 0.0).map(|e| report.estimate / e);
    if config.timing {
        report.wall_time_ms = Some(started.elapsed().as_secs_f64() * 1e3);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom() -> Domain {
        Domain::new(16).unwrap()
    }

    fn tiny() -> Vec<StreamUpdate> {
        vec![
            StreamUpdate::insert(SetId::S, Point::new(1, 1), 2),
            StreamUpdate::insert(SetId::T, Point::new(4, 5), 1),
            StreamUpdate::insert(SetId::T, Point::new(2, 1), 1),
        ]
    }

    #[test]
    fn exact_mode_matches_oracle() {
        let r = run(&RunConfig::new(dom(), Algorithm::Exact), &tiny()).unwrap();
        assert_eq!(r.estimate, 8.0);
        assert_eq!(r.exact, Some(8.0));
        assert_eq!(r.ratio, Some(1.0));
    }

    #[test]
    fn deletions_split_coreset_from_combined() {
        let mut ups = tiny();
        ups.push(StreamUpdate::insert(SetId::S, Point::new(9, 9), 1));
        ups.push(StreamUpdate::delete(SetId::S, Point::new(9, 9), 1));
        let mut cfg = RunConfig::new(dom(), Algorithm::Combined);
        cfg.grids_per_level = Some(2);
        assert!(run(&cfg, &ups).is_ok());
        cfg.algorithm = Algorithm::Coreset;
        let err = run(&cfg, &ups).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = RunConfig {
            grids_per_level: Some(2),
            seed: 4,
            ..RunConfig::new(dom(), Algorithm::Combined)
        };
        let a = run(&cfg, &tiny()).unwrap().to_json();
        let b = run(&cfg, &tiny()).unwrap().to_json();
        assert_eq!(a, b);
        assert!(!a.contains("wall_time_ms"));
    }

    #[test]
    fn negative_multiplicity_is_a_model_violation() {
        let ups = vec![StreamUpdate::delete(SetId::T, Point::new(1, 1), 1)];
        let err = run(&RunConfig::new(dom(), Algorithm::Exact), &ups).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
