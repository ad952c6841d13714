//! Seeded instance generators. Every instance has exactly `k` distinct `T`
//! points, `|S| = |T| = n`, and no `S` point on a `T` location.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::geometry::{Domain, Point, SetId, StreamUpdate, WeightedPointSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// `S` uniform over the domain.
    Uniform,
    /// `S` scattered around the `k` sites of `T`.
    Clustered,
    /// Every `S` point one step from its `T` site; short edges everywhere,
    /// so any single grid is likely to cut some of them.
    AdversarialMinGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n: u64,
    pub k: usize,
    pub domain: Domain,
    pub generator: Generator,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub spec: InstanceSpec,
    pub s: WeightedPointSet,
    pub t: WeightedPointSet,
}

impl Instance {
    /// Insertions of every `S` then every `T` point, one update per location.
    pub fn updates(&self) -> Vec<StreamUpdate> {
        let side = |set: SetId, pts: &WeightedPointSet| -> Vec<StreamUpdate> {
            pts.iter()
                .map(|(p, w)| StreamUpdate::insert(set, p, w as u64))
                .collect()
        };
        let mut ups = side(SetId::S, &self.s);
        ups.extend(side(SetId::T, &self.t));
        ups
    }
}

fn random_point<R: Rng>(domain: Domain, rng: &mut R) -> Point {
    let d = domain.delta();
    Point::new(rng.gen_range(1..=d), rng.gen_range(1..=d))
}

fn distinct_sites<R: Rng>(domain: Domain, k: usize, margin: u32, rng: &mut R) -> Vec<Point> {
    let d = domain.delta();
    let lo = 1 + margin.min((d - 1) / 2);
    let hi = d - margin.min((d - 1) / 2);
    let mut seen = BTreeSet::new();
    while seen.len() < k {
        seen.insert(Point::new(rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)));
    }
    let mut sites: Vec<Point> = seen.into_iter().collect();
    sites.shuffle(rng);
    sites
}

/// Random composition of `n` into `k` positive parts.
fn composition<R: Rng>(n: u64, k: usize, rng: &mut R) -> Vec<u64> {
    let mut cuts: BTreeSet<u64> = BTreeSet::new();
    while cuts.len() < k - 1 {
        cuts.insert(rng.gen_range(1..n));
    }
    let mut parts = Vec::with_capacity(k);
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(n)) {
        parts.push(c - prev);
        prev = c;
    }
    parts
}

pub fn generate(spec: &InstanceSpec) -> Result<Instance, HarnessError> {
    let domain = spec.domain;
    let cells = (domain.delta() as u64).pow(2);
    if spec.k == 0 || spec.n < spec.k as u64 {
        return Err(HarnessError::Config(format!(
            "need n >= k >= 1, got n = {} and k = {}",
            spec.n, spec.k
        )));
    }
    if spec.k as u64 * 5 > cells {
        return Err(HarnessError::Config(format!("k = {} too large for the domain", spec.k)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut s = WeightedPointSet::new();
    let mut t = WeightedPointSet::new();
    match spec.generator {
        Generator::Uniform => {
            let sites = distinct_sites(domain, spec.k, 0, &mut rng);
            let taken: BTreeSet<Point> = sites.iter().copied().collect();
            for (site, m) in sites.iter().zip(composition(spec.n, spec.k, &mut rng)) {
                t.add(*site, m as f64);
            }
            while (s.total_weight() as u64) < spec.n {
                let p = random_point(domain, &mut rng);
                if !taken.contains(&p) {
                    s.add(p, 1.0);
                }
            }
        }
        Generator::Clustered => {
            let sites = distinct_sites(domain, spec.k, 0, &mut rng);
            let taken: BTreeSet<Point> = sites.iter().copied().collect();
            let radius = (domain.delta() / 16).max(1) as i64;
            let mut counts = vec![0u64; spec.k];
            let mut placed = 0u64;
            while placed < spec.n {
                let j = if (placed as usize) < spec.k {
                    placed as usize
                } else {
                    rng.gen_range(0..spec.k)
                };
                let dx = rng.gen_range(-radius..=radius);
                let dy = rng.gen_range(-radius..=radius);
                let Some(p) = sites[j].translate(dx, dy) else { continue };
                if !domain.contains(p) || taken.contains(&p) {
                    continue;
                }
                s.add(p, 1.0);
                counts[j] += 1;
                placed += 1;
            }
            for (site, m) in sites.iter().zip(counts) {
                t.add(*site, m as f64);
            }
        }
        Generator::AdversarialMinGrid => {
            let sites = distinct_sites(domain, spec.k, 1, &mut rng);
            let taken: BTreeSet<Point> = sites.iter().copied().collect();
            let mut counts = vec![0u64; spec.k];
            let steps = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)];
            let mut placed = 0u64;
            let mut attempts = 0u64;
            while placed < spec.n {
                attempts += 1;
                if attempts > 1000 * spec.n {
                    return Err(HarnessError::Config("sites too crowded for unit neighbours".into()));
                }
                let j = (placed as usize) % spec.k;
                let (dx, dy) = steps[rng.gen_range(0..4)];
                let Some(p) = sites[j].translate(dx, dy) else { continue };
                if !domain.contains(p) || taken.contains(&p) {
                    continue;
                }
                s.add(p, 1.0);
                counts[j] += 1;
                placed += 1;
            }
            for (site, m) in sites.iter().zip(counts) {
                t.add(*site, m as f64);
            }
        }
    }
    Ok(Instance {
        spec: spec.clone(),
        s,
        t,
    })
}

/// Interleaves `pairs` matched insert/delete pairs of random points into
/// `updates`; each deletion lands after its insertion.
pub fn with_cancelling_pairs<R: Rng>(
    updates: &[StreamUpdate],
    pairs: usize,
    domain: Domain,
    rng: &mut R,
) -> Vec<StreamUpdate> {
    let mut out = updates.to_vec();
    for _ in 0..pairs {
        let set = if rng.gen_bool(0.5) { SetId::S } else { SetId::T };
        let u = StreamUpdate::insert(set, random_point(domain, rng), rng.gen_range(1..=3));
        let i = rng.gen_range(0..=out.len());
        out.insert(i, u);
        let j = rng.gen_range(i + 1..=out.len());
        out.insert(j, u.inverse());
    }
    out
}
