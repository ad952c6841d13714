use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generators::{generate, Generator, InstanceSpec};
use super::{HarnessError, REPORT_SCHEMA};
use crate::estimators::{CombinedState, MultigridConfig, MultigridState};
use crate::geometry::Domain;
use crate::oracle::exact_emd;
use crate::sketch::hash::derive_key;

/// `[(1-ε)³/4 - 0.05, 16(1+ε)³k³]`, the accepted range of `Z / EMD`.
pub fn envelope_bounds(epsilon: f64, k: u64) -> (f64, f64) {
    let lo = (1.0 - epsilon).powi(3) / 4.0 - 0.05;
    let hi = 16.0 * (1.0 + epsilon).powi(3) * (k as f64).powi(3);
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    pub instances: usize,
    pub n_max: u64,
    pub k_max: usize,
    pub domain: Domain,
    pub epsilon: f64,
    pub delta_prob: f64,
    pub seed: u64,
    /// Fixed generator, or alternate uniform and clustered when `None`.
    pub generator: Option<Generator>,
    pub grids_per_level: Option<usize>,
}

impl EnvelopeConfig {
    pub fn new(domain: Domain, seed: u64) -> Self {
        Self {
            instances: 100,
            n_max: 200,
            k_max: 4,
            domain,
            epsilon: 0.1,
            delta_prob: 0.05,
            seed,
            generator: None,
            grids_per_level: None,
        }
    }

    pub fn instance_spec(&self, id: usize) -> InstanceSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_key(self.seed, &[id as u64]) as u64);
        let k = rng.gen_range(1..=self.k_max);
        let n = rng.gen_range(k as u64..=self.n_max.max(k as u64));
        let generator = self.generator.unwrap_or(if id.is_multiple_of(2) {
            Generator::Uniform
        } else {
            Generator::Clustered
        });
        InstanceSpec {
            n,
            k,
            domain: self.domain,
            generator,
            seed: rng.gen(),
        }
    }

    fn multigrid_config(&self, id: usize) -> MultigridConfig {
        let mut c = MultigridConfig::new(self.domain, derive_key(self.seed ^ 0x5EED, &[id as u64]) as u64);
        c.epsilon = self.epsilon;
        c.delta = self.delta_prob;
        if let Some(g) = self.grids_per_level {
            c.grids_per_level = g;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub id: usize,
    pub n: u64,
    pub k: u64,
    pub generator: Generator,
    pub emd: f64,
    pub z: f64,
    pub baseline: f64,
    pub combined: f64,
    pub k_hat: f64,
    pub z_ratio: f64,
    pub baseline_ratio: f64,
    pub combined_ratio: f64,
    pub in_envelope: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub instances: usize,
    pub in_envelope: usize,
    pub fraction_in_envelope: f64,
    pub z_ratio_min: f64,
    pub z_ratio_max: f64,
    /// `max EMD / baseline`: the baseline never undershoots by more.
    pub baseline_c1: f64,
    /// `max (baseline / EMD) / log₂Δ`.
    pub baseline_c2: f64,
    pub combined_ratio_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub schema: String,
    pub suite: String,
    pub config: EnvelopeConfig,
    pub rows: Vec<EnvelopeRow>,
    pub summary: EnvelopeSummary,
}

pub fn envelope_row(config: &EnvelopeConfig, id: usize) -> Result<EnvelopeRow, HarnessError> {
    let spec = config.instance_spec(id);
    let inst = generate(&spec)?;
    let emd = exact_emd(&inst.s, &inst.t)?.cost;
    let mut st = CombinedState::new(&config.multigrid_config(id))?;
    st.update_batch(&inst.updates());
    let r = st.estimate()?;
    let k = inst.s.len().min(inst.t.len()) as u64;
    let (lo, hi) = envelope_bounds(config.epsilon, k);
    let z_ratio = r.z / emd;
    Ok(EnvelopeRow {
        id,
        n: spec.n,
        k,
        generator: spec.generator,
        emd,
        z: r.z,
        baseline: r.baseline,
        combined: r.combined,
        k_hat: r.k_hat,
        z_ratio,
        baseline_ratio: r.baseline / emd,
        combined_ratio: r.combined / emd,
        in_envelope: (lo..=hi).contains(&z_ratio),
    })
}

/// Runs the envelope suite; rows come back sorted by instance id.
pub fn ratio_envelope(config: &EnvelopeConfig) -> Result<EnvelopeReport, HarnessError> {
    let rows: Vec<EnvelopeRow> = (0..config.instances)
        .into_par_iter()
        .map(|id| envelope_row(config, id))
        .collect::<Result<_, _>>()?;
    let fold = |f: fn(&EnvelopeRow) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
        rows.iter().map(f).fold(init, pick)
    };
    let in_envelope = rows.iter().filter(|r| r.in_envelope).count();
    let summary = EnvelopeSummary {
        instances: rows.len(),
        in_envelope,
        fraction_in_envelope: in_envelope as f64 / rows.len().max(1) as f64,
        z_ratio_min: fold(|r| r.z_ratio, f64::INFINITY, f64::min),
        z_ratio_max: fold(|r| r.z_ratio, 0.0, f64::max),
        baseline_c1: fold(|r| 1.0 / r.baseline_ratio, 0.0, f64::max),
        baseline_c2: fold(|r| r.baseline_ratio, 0.0, f64::max) / config.domain.log_delta() as f64,
        combined_ratio_max: fold(|r| r.combined_ratio, 0.0, f64::max),
    };
    Ok(EnvelopeReport {
        schema: REPORT_SCHEMA.to_string(),
        suite: "ratio-envelope".into(),
        config: config.clone(),
        rows,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinGridRow {
    pub seed: u64,
    pub emd: f64,
    pub min_ratio: f64,
    pub fixed_ratio: f64,
    pub fixed_worse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinGridReport {
    pub schema: String,
    pub suite: String,
    pub rows: Vec<MinGridRow>,
    pub fraction_fixed_worse: f64,
}

/// On adversarial instances, compares the per-level minimum over grids with
/// always using grid 0. Norms are exact so only grid choice differs.
pub fn min_grid_experiment(
    domain: Domain,
    n: u64,
    k: usize,
    seeds: std::ops::Range<u64>,
) -> Result<MinGridReport, HarnessError> {
    let rows: Vec<MinGridRow> = seeds
        .into_par_iter()
        .map(|seed| -> Result<MinGridRow, HarnessError> {
            let inst = generate(&InstanceSpec {
                n,
                k,
                domain,
                generator: Generator::AdversarialMinGrid,
                seed,
            })?;
            let emd = exact_emd(&inst.s, &inst.t)?.cost;
            let mut st = MultigridState::new(&MultigridConfig::exact(domain, seed))?;
            st.update_batch(&inst.updates());
            let min_ratio = st.estimate()?.z / emd;
            let fixed_ratio = st.estimate_with_fixed_grid(0)? / emd;
            Ok(MinGridRow {
                seed,
                emd,
                min_ratio,
                fixed_ratio,
                fixed_worse: fixed_ratio.ln().abs() > min_ratio.ln().abs(),
            })
        })
        .collect::<Result<_, _>>()?;
    let worse = rows.iter().filter(|r| r.fixed_worse).count();
    Ok(MinGridReport {
        schema: REPORT_SCHEMA.to_string(),
        suite: "min-grid".into(),
        fraction_fixed_worse: worse as f64 / rows.len().max(1) as f64,
        rows,
    })
}
