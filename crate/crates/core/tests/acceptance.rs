//! Acceptance criteria, one line of output each. Every reference value is
//! recomputed here from dense arrays, brute force, or closed forms.

use std::collections::BTreeMap;
use std::time::Instant;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emd_stream::coreset::{weight_perturbation_demo, CoresetConfig, CoresetState};
use emd_stream::estimators::{
    draw_grids, BaselineConfig, BaselineState, CombinedState, MultigridConfig, MultigridState,
};
use emd_stream::geometry::{Domain, GridSpec, Point, SetId, StreamUpdate, WeightedPointSet};
use emd_stream::harness::experiment::{ratio_envelope, EnvelopeConfig};
use emd_stream::harness::generators::with_cancelling_pairs;
use emd_stream::harness::{
    capacitated_search, generate, run, Algorithm, CapEstimator, Generator, Instance, InstanceSpec,
    RunConfig,
};
use emd_stream::matching_graph::build_gamma;
use emd_stream::oracle::{exact_capacitated_kmedian, exact_emd, Matching};
use emd_stream::sketch::{L0Sketch, L1Sketch};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_point<R: Rng>(delta: u32, r: &mut R) -> Point {
    Point::new(r.gen_range(1..=delta), r.gen_range(1..=delta))
}

fn expand(set: &WeightedPointSet) -> Vec<Point> {
    set.iter()
        .flat_map(|(p, w)| std::iter::repeat_n(p, w as usize))
        .collect()
}

fn l1(a: Point, b: Point) -> u64 {
    (a.x.abs_diff(b.x) + a.y.abs_diff(b.y)) as u64
}

fn l2(a: Point, b: Point) -> f64 {
    let dx = a.x as f64 - b.x as f64;
    let dy = a.y as f64 - b.y as f64;
    dx.hypot(dy)
}

fn brute_emd(s: &[Point], t: &[Point]) -> u64 {
    (0..t.len())
        .permutations(t.len())
        .map(|perm| s.iter().zip(&perm).map(|(a, &j)| l1(*a, t[j])).sum::<u64>())
        .min()
        .unwrap_or(0)
}

/// Cell of `p` in `g`, from the real-valued shift.
fn cell(g: &GridSpec, p: Point) -> (i64, i64) {
    let side = g.cell_size() as f64;
    let (sx, sy) = g.shift();
    (
        ((p.x as f64 - sx) / side).floor() as i64,
        ((p.y as f64 - sy) / side).floor() as i64,
    )
}

/// `‖V_g(S) − V_g(T)‖₁` from a dense Δ×Δ difference array.
fn dense_cell_norm(g: &GridSpec, s: &WeightedPointSet, t: &WeightedPointSet, delta: u32) -> u64 {
    let d = delta as usize;
    let mut dense = vec![0i64; d * d];
    for (p, w) in s.iter() {
        dense[(p.x as usize - 1) * d + p.y as usize - 1] += w as i64;
    }
    for (p, w) in t.iter() {
        dense[(p.x as usize - 1) * d + p.y as usize - 1] -= w as i64;
    }
    let mut cells: BTreeMap<(i64, i64), i64> = BTreeMap::new();
    for x in 1..=delta {
        for y in 1..=delta {
            let v = dense[(x as usize - 1) * d + y as usize - 1];
            if v != 0 {
                *cells.entry(cell(g, Point::new(x, y))).or_insert(0) += v;
            }
        }
    }
    cells.values().map(|v| v.unsigned_abs()).sum()
}

fn degree_imbalance(m: &Matching, g: &GridSpec) -> u64 {
    let mut net: BTreeMap<(i64, i64), i64> = BTreeMap::new();
    for e in &m.edges {
        let w = e.multiplicity as i64;
        *net.entry(cell(g, e.from)).or_insert(0) += w;
        *net.entry(cell(g, e.to)).or_insert(0) -= w;
    }
    net.values().map(|v| v.unsigned_abs()).sum()
}

fn crossings(m: &Matching, g: &GridSpec) -> u64 {
    m.edges
        .iter()
        .filter(|e| cell(g, e.from) != cell(g, e.to))
        .map(|e| e.multiplicity as u64)
        .sum()
}

fn distinct_min(inst: &Instance) -> u64 {
    inst.s.len().min(inst.t.len()) as u64
}

fn grid_instance(id: u64) -> Instance {
    let mut r = rng(0xA11CE + id);
    let k = r.gen_range(1..=4usize);
    let n = r.gen_range(k as u64..=200);
    let generator = [Generator::Uniform, Generator::Clustered, Generator::AdversarialMinGrid][id as usize % 3];
    generate(&InstanceSpec {
        n,
        k,
        domain: Domain::new(64).unwrap(),
        generator,
        seed: r.gen(),
    })
    .unwrap()
}

fn criterion_1() -> Outcome {
    let mut r = rng(1);
    let mut mismatches = 0;
    for _ in 0..500 {
        let delta = [2u32, 4, 8, 16][r.gen_range(0..4)];
        let n = r.gen_range(1..=6);
        let s: Vec<Point> = (0..n).map(|_| random_point(delta, &mut r)).collect();
        let t: Vec<Point> = (0..n).map(|_| random_point(delta, &mut r)).collect();
        let got = exact_emd(
            &WeightedPointSet::from_points(s.iter().copied()),
            &WeightedPointSet::from_points(t.iter().copied()),
        )
        .unwrap()
        .cost;
        if got != brute_emd(&s, &t) as f64 {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("500 instances, {mismatches} mismatches"))
}

struct GridTriples {
    triples: usize,
    imbalance_violations: usize,
    long_edge_violations: usize,
    crossing_violations: usize,
    gamma_violations: usize,
}

fn grid_triples() -> GridTriples {
    let mut out = GridTriples {
        triples: 0,
        imbalance_violations: 0,
        long_edge_violations: 0,
        crossing_violations: 0,
        gamma_violations: 0,
    };
    let domain = Domain::new(64).unwrap();
    for id in 0..100 {
        let inst = grid_instance(id);
        let m = exact_emd(&inst.s, &inst.t).unwrap();
        let k = distinct_min(&inst);
        let mut mg = MultigridConfig::exact(domain, 0x6E1D + id);
        mg.grids_per_level = 4;
        for g in draw_grids(&mg).iter().flatten() {
            out.triples += 1;
            let c = dense_cell_norm(g, &inst.s, &inst.t, 64);
            if degree_imbalance(&m, g) != c {
                out.imbalance_violations += 1;
            }
            if build_gamma(&m, g).unwrap().imbalance() != c {
                out.gamma_violations += 1;
            }
            let long: u64 = m
                .edges
                .iter()
                .filter(|e| l1(e.from, e.to) >= k << (g.level() + 1))
                .map(|e| e.multiplicity as u64)
                .sum();
            if 2 * long > k * c {
                out.long_edge_violations += 1;
            }
            if c > 2 * crossings(&m, g) {
                out.crossing_violations += 1;
            }
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    let shifts = 2000;
    for id in 0..20 {
        let inst = grid_instance(1000 + id);
        let m = exact_emd(&inst.s, &inst.t).unwrap();
        let k = distinct_min(&inst);
        let mut r = rng(0xC1A1 + id);
        for level in 1..=6u32 {
            let side = 1u64 << level;
            let short: Vec<(Point, Point)> = m
                .edges
                .iter()
                .filter(|e| 8 * k * l1(e.from, e.to) < side)
                .map(|e| (e.from, e.to))
                .collect();
            let bad = (0..shifts)
                .filter(|_| {
                    let g = GridSpec::new(level, r.gen_range(0..side), r.gen_range(0..side)).unwrap();
                    short.iter().any(|(a, b)| cell(&g, *a) != cell(&g, *b))
                })
                .count();
            worst = worst.max(bad as f64 / shifts as f64);
        }
    }
    outcome(
        worst <= 0.55,
        format!("worst per-level bad-grid frequency {worst:.4} over 20 instances x 6 levels x {shifts} shifts"),
    )
}

fn envelope(epsilon: f64, k: u64) -> (f64, f64) {
    (
        (1.0 - epsilon).powi(3) / 4.0 - 0.05,
        16.0 * (1.0 + epsilon).powi(3) * (k as f64).powi(3),
    )
}

fn criterion_6() -> Outcome {
    let started = Instant::now();
    let cfg = EnvelopeConfig::new(Domain::new(64).unwrap(), 2024);
    let report = ratio_envelope(&cfg).unwrap();
    let mut inside = 0;
    let (mut lo_seen, mut hi_seen) = (f64::INFINITY, 0.0f64);
    for row in &report.rows {
        let inst = generate(&cfg.instance_spec(row.id)).unwrap();
        let emd = exact_emd(&inst.s, &inst.t).unwrap().cost;
        let (lo, hi) = envelope(0.1, distinct_min(&inst));
        let ratio = row.z / emd;
        lo_seen = lo_seen.min(ratio);
        hi_seen = hi_seen.max(ratio);
        if (lo..=hi).contains(&ratio) {
            inside += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        report.rows.len() == 100 && inside >= 95 && secs < 300.0,
        format!("{inside}/100 inside, Z/EMD in [{lo_seen:.3}, {hi_seen:.3}], {secs:.1} s"),
    )
}

fn criterion_7() -> Outcome {
    let domain = Domain::new(64).unwrap();
    let mut worst_rel: f64 = 0.0;
    for id in 0..20 {
        let inst = grid_instance(2000 + id);
        let cfg = MultigridConfig::exact(domain, 0x7E57 + id);
        let mut st = MultigridState::new(&cfg).unwrap();
        st.update_batch(&inst.updates());
        let z = st.estimate().unwrap().z;
        let k = distinct_min(&inst) as f64;
        let mut sum = 0.0;
        for (i, level) in st.grids().iter().enumerate() {
            let c = level
                .iter()
                .map(|g| dense_cell_norm(g, &inst.s, &inst.t, 64))
                .min()
                .unwrap();
            sum += 2f64.powi(i as i32) * c as f64;
        }
        let expected = k * k / 2.0 * sum;
        worst_rel = worst_rel.max((z - expected).abs() / expected.max(1.0));
    }
    outcome(worst_rel <= 1e-12, format!("20 instances, worst relative gap {worst_rel:e}"))
}

fn coreset_run(inst: &Instance, bucket: Option<usize>, seed: u64) -> (f64, f64, bool, f64, f64, usize) {
    let k = inst.t.len();
    let mut cfg = CoresetConfig::new(inst.spec.domain, k, 0.1, seed);
    if let Some(b) = bucket {
        cfg.bucket_size = b;
    }
    let mut st = CoresetState::new(cfg).unwrap();
    let mut stream: Vec<(SetId, Point)> = expand(&inst.s)
        .into_iter()
        .map(|p| (SetId::S, p))
        .chain(expand(&inst.t).into_iter().map(|p| (SetId::T, p)))
        .collect();
    stream.shuffle(&mut rng(seed));
    for (set, p) in stream {
        st.insert(set, p, 1).unwrap();
    }
    let est = st.estimate().unwrap();
    let emd = exact_emd(&inst.s, &inst.t).unwrap().cost;
    let per_reduce_ok = st
        .reduces()
        .iter()
        .all(|r| r.epsilon <= 0.1 && r.movement_l2 <= r.epsilon * r.bicriteria_cost * (1.0 + 1e-9) + 1e-9);
    // Σ_p d(p, T) is a valid k-median upper bound since T has at most k sites.
    let upper: f64 = inst
        .s
        .iter()
        .map(|(p, w)| w * inst.t.points().map(|q| l2(p, q)).fold(f64::INFINITY, f64::min))
        .sum();
    let sandwich = (est.emd - emd).abs() <= est.movement_l1 + 1e-6;
    (
        est.emd / emd,
        est.movement_l2 / upper.max(f64::MIN_POSITIVE),
        per_reduce_ok && sandwich,
        est.movement_l2,
        upper,
        st.reduces().len(),
    )
}

fn criterion_8() -> Outcome {
    let domain = Domain::new(64).unwrap();
    let mut failures = 0;
    let mut reduces = 0;
    let (mut rmin, mut rmax, mut worst_share) = (f64::INFINITY, 0.0f64, 0.0f64);
    for id in 0..100u64 {
        let mut r = rng(0x8000 + id);
        let k = r.gen_range(1..=4usize);
        let n = r.gen_range(k as u64..=500);
        let inst = generate(&InstanceSpec {
            n,
            k,
            domain,
            generator: if id % 2 == 0 { Generator::Uniform } else { Generator::Clustered },
            seed: r.gen(),
        })
        .unwrap();
        for bucket in [None, Some(64)] {
            let (ratio, share, ok, moved, upper, nr) = coreset_run(&inst, bucket, id);
            reduces += nr;
            rmin = rmin.min(ratio);
            rmax = rmax.max(ratio);
            worst_share = worst_share.max(share);
            let in_band = (1.0 - 0.4..=1.0 + 0.4).contains(&ratio);
            if !(in_band && ok && moved <= 0.1 * upper + 1e-9) {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0,
        format!(
            "100 instances x {{default b, b = 64}}, {reduces} reduces, ratio in [{rmin:.4}, {rmax:.4}], movement <= {worst_share:.4} x upper bound, {failures} failures"
        ),
    )
}

fn criterion_9() -> Outcome {
    let (n, eps) = (100u64, 0.1);
    let domain = Domain::new(128).unwrap();
    let demo = weight_perturbation_demo(domain, n, eps).unwrap();
    let half = n as f64 / 2.0;
    let sep = 128.0;
    let expected_emd = n as f64;
    let expected_perturbed = half * (2.0 - eps) + eps * half * sep;
    let factor = demo.perturbed_emd / demo.emd;
    outcome(
        demo.emd == expected_emd && (demo.perturbed_emd - expected_perturbed).abs() < 1e-6 && factor > 2.0,
        format!("EMD {} -> {} under (1 +/- {eps}) weights, factor {factor:.2}", demo.emd, demo.perturbed_emd),
    )
}

fn criterion_10() -> Outcome {
    let (eps, delta) = (0.1, 0.05);
    let need = ((1.0 - delta - 0.03) * 200.0f64).ceil() as usize;
    let mut ok_l1 = 0;
    let mut ok_l0 = 0;
    for trial in 0..200u64 {
        let mut r = rng(0x1010 + trial);
        let mut s = L1Sketch::new(eps, delta, 1 << 20, trial as u128 + 1).unwrap();
        let mut dense: BTreeMap<u64, i64> = BTreeMap::new();
        for _ in 0..r.gen_range(1..=100) {
            let coord = r.gen_range(0..1u64 << 20);
            let v = r.gen_range(-20i64..=20);
            s.update(coord, v);
            *dense.entry(coord).or_insert(0) += v;
        }
        let truth: i64 = dense.values().map(|v| v.abs()).sum();
        if (s.estimate() - truth as f64).abs() <= eps * truth as f64 {
            ok_l1 += 1;
        }

        let mut z = L0Sketch::new(eps, delta, 1 << 32, (trial as u128) << 64 | 7).unwrap();
        let target = 10f64.powf(r.gen_range(1.0..4.3)) as u64;
        let mut live: BTreeMap<u64, i64> = BTreeMap::new();
        for _ in 0..target {
            let coord = r.gen_range(0..1u64 << 32);
            let c = r.gen_range(1..=3);
            z.update(coord, c);
            *live.entry(coord).or_insert(0) += c;
        }
        let doomed: Vec<u64> = live.keys().copied().filter(|_| r.gen_bool(0.3)).collect();
        for coord in doomed {
            z.update(coord, -live[&coord]);
            live.remove(&coord);
        }
        let truth = live.len() as f64;
        if (z.estimate().unwrap() - truth).abs() <= eps * truth {
            ok_l0 += 1;
        }
    }
    outcome(
        ok_l1 >= need && ok_l0 >= need,
        format!("l1 {ok_l1}/200, l0 {ok_l0}/200 within (1 +/- {eps}); need {need}"),
    )
}

fn criterion_11() -> Outcome {
    let domain = Domain::new(16).unwrap();
    let mut broken = 0;
    for trial in 0..50u64 {
        let mut r = rng(0x11 + trial);
        let k = r.gen_range(1..=3);
        let inst = generate(&InstanceSpec {
            n: r.gen_range(k as u64..=20),
            k,
            domain,
            generator: Generator::Uniform,
            seed: r.gen(),
        })
        .unwrap();
        let base = inst.updates();
        let noisy = with_cancelling_pairs(&base, r.gen_range(1..=10), domain, &mut r);

        let cfg = MultigridConfig::new(domain, trial);
        let mut a = CombinedState::new(&cfg).unwrap();
        let mut b = a.clone();
        for u in &base {
            a.update(u);
        }
        for u in &noisy {
            b.update(u);
        }
        let (ea, eb) = (a.estimate().unwrap(), b.estimate().unwrap());
        let same_combined = ea.z.to_bits() == eb.z.to_bits()
            && ea.baseline.to_bits() == eb.baseline.to_bits()
            && ea.combined.to_bits() == eb.combined.to_bits()
            && a.checkpoint().unwrap() == b.checkpoint().unwrap();

        let mut m = MultigridState::new(&cfg).unwrap();
        m.update_batch(&noisy);
        let mut bl = BaselineState::new(&BaselineConfig::matching(&cfg)).unwrap();
        bl.update_batch(&noisy);
        let same_parts = m.estimate().unwrap().z.to_bits() == ea.z.to_bits()
            && bl.estimate().unwrap().to_bits() == ea.baseline.to_bits();

        let same_runs = [Algorithm::Exact, Algorithm::Multigrid, Algorithm::Baseline, Algorithm::Combined]
            .into_iter()
            .all(|alg| {
                let mut rc = RunConfig::new(domain, alg);
                rc.seed = trial;
                run(&rc, &base).unwrap().estimate.to_bits() == run(&rc, &noisy).unwrap().estimate.to_bits()
            });
        if !(same_combined && same_parts && same_runs) {
            broken += 1;
        }
    }
    outcome(broken == 0, format!("50 trials, {broken} with differing output"))
}

fn criterion_12() -> Outcome {
    let domain = Domain::new(4).unwrap();
    let mut exact_mismatch = 0;
    let mut combined_out = 0;
    let (lo, hi) = envelope(0.1, 2);
    let mut worst: f64 = 0.0;
    for id in 0..20u64 {
        let mut r = rng(0xCA9 + id);
        let n = r.gen_range(2..=8u64);
        let pts: Vec<Point> = (0..n).map(|_| random_point(4, &mut r)).collect();
        let capacity = n.div_ceil(2) + r.gen_range(0..=2);
        let updates: Vec<StreamUpdate> = pts.iter().map(|p| StreamUpdate::insert(SetId::S, *p, 1)).collect();
        let p = WeightedPointSet::from_points(pts.iter().copied());
        let opt = exact_capacitated_kmedian(&p, 2, capacity, domain).unwrap().cost;
        let cfg = MultigridConfig::new(domain, id);
        let exact = capacitated_search(&updates, 2, capacity, CapEstimator::Exact, &cfg).unwrap();
        if exact.estimated_cost != opt || exact.exact_cost != opt {
            exact_mismatch += 1;
        }
        let combined = capacitated_search(&updates, 2, capacity, CapEstimator::Combined, &cfg).unwrap();
        let ok = if opt == 0.0 {
            combined.exact_cost == 0.0
        } else {
            let ratio = combined.exact_cost / opt;
            worst = worst.max(ratio);
            (lo..=hi).contains(&ratio)
        };
        if !ok {
            combined_out += 1;
        }
    }
    outcome(
        exact_mismatch == 0 && combined_out == 0,
        format!(
            "20 instances, exact search mismatches {exact_mismatch}, combined outside envelope {combined_out}, worst cost ratio {worst:.3}"
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut timed = |id: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let started = Instant::now();
        let o = f();
        let secs = started.elapsed().as_secs_f64();
        println!(
            "criterion {id:>2} {} {name}: {} ({secs:.1} s)",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o, secs));
    };

    timed(1, "exact oracle matches brute force", &|| {
        let started = Instant::now();
        let o = criterion_1();
        let secs = started.elapsed().as_secs_f64();
        outcome(o.passed && secs < 10.0, o.detail)
    });

    let started = Instant::now();
    let triples = grid_triples();
    let shared = started.elapsed().as_secs_f64();
    timed(2, "degree imbalance equals cell-count difference", &|| {
        outcome(
            triples.imbalance_violations == 0 && triples.gamma_violations == 0 && shared < 60.0,
            format!(
                "{} triples, {} violations (graph builder {}), {shared:.1} s",
                triples.triples, triples.imbalance_violations, triples.gamma_violations
            ),
        )
    });
    timed(3, "long-edge count bound", &|| {
        outcome(
            triples.long_edge_violations == 0,
            format!("{} triples, {} violations", triples.triples, triples.long_edge_violations),
        )
    });
    timed(4, "bad-grid probability", &criterion_4);
    timed(5, "crossing bound", &|| {
        outcome(
            triples.crossing_violations == 0,
            format!("{} triples, {} violations", triples.triples, triples.crossing_violations),
        )
    });
    timed(6, "multigrid ratio envelope", &criterion_6);
    timed(7, "exact-mode closed form", &criterion_7);
    timed(8, "coreset estimate and movement", &criterion_8);
    timed(9, "coreset weight sensitivity", &criterion_9);
    timed(10, "sketch accuracy envelopes", &criterion_10);
    timed(11, "turnstile cancellation", &criterion_11);
    timed(12, "capacitated k-median search", &criterion_12);

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    println!("{}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
