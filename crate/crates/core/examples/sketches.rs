//! The two linear sketches on their own: an l1 norm estimate and a
//! distinct-count estimate for a turnstile vector, next to the truth.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emd_stream::sketch::{l1_rows, L0Sketch, L1Sketch};

fn main() {
    let (eps, delta) = (0.1, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut l1 = L1Sketch::new(eps, delta, 1 << 24, 11).unwrap();
    let mut l0 = L0Sketch::new(eps, delta, 1 << 24, 12).unwrap();
    let mut truth: BTreeMap<u64, i64> = BTreeMap::new();

    for _ in 0..5000 {
        let coord = rng.gen_range(0..1u64 << 24);
        let v = rng.gen_range(1..=4);
        l1.update(coord, v);
        l0.update(coord, v);
        *truth.entry(coord).or_default() += v;
    }
    // delete a third of the coordinates again
    let gone: Vec<(u64, i64)> = truth.iter().map(|(c, v)| (*c, *v)).step_by(3).collect();
    for (c, v) in gone {
        l1.update(c, -v);
        l0.update(c, -v);
        truth.remove(&c);
    }

    let norm: i64 = truth.values().sum();
    println!("rows = {} ({} bytes)", l1_rows(eps, delta), l1.memory_bytes());
    println!("l1: estimate {:.1}, truth {norm}", l1.estimate());
    println!(
        "l0: estimate {:.1}, truth {} ({} bytes)",
        l0.estimate().unwrap(),
        truth.len(),
        l0.memory_bytes()
    );
}
