//! Insertion-only coreset estimate. A small bucket size forces several
//! merge-and-reduce rounds so the movement bookkeeping is visible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emd_stream::coreset::{CoresetConfig, CoresetState};
use emd_stream::geometry::{Domain, Point, SetId, WeightedPointSet};
use emd_stream::oracle::exact_emd;

fn main() {
    let domain = Domain::new(1024).unwrap();
    let mut config = CoresetConfig::new(domain, 2, 0.9, 9);
    config.bucket_size = 256;
    config.max_depth = 1;
    let mut st = CoresetState::new(config).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sites = [Point::new(200, 200), Point::new(800, 700)];
    let mut s = WeightedPointSet::new();
    let mut t = WeightedPointSet::new();
    for i in 0..4000 {
        let c = sites[i % 2];
        let p = Point::new(
            (c.x as i64 + rng.gen_range(-40..=40)) as u32,
            (c.y as i64 + rng.gen_range(-40..=40)) as u32,
        );
        st.insert(SetId::S, p, 1).unwrap();
        st.insert(SetId::T, c, 1).unwrap();
        s.add(p, 1.0);
        t.add(c, 1.0);
    }

    for r in st.reduces().iter().take(6) {
        println!(
            "depth {} : {} -> {} points, movement {:.1} <= {:.1}",
            r.depth, r.input_distinct, r.output_distinct, r.movement_l2, r.bound
        );
    }
    let est = st.estimate().unwrap();
    let emd = exact_emd(&s, &t).unwrap().cost;
    println!(
        "{} reduces, coreset {} of {} distinct points",
        est.reduces,
        est.core_distinct,
        s.len()
    );
    println!(
        "estimate {:.0}, EMD {emd}, gap {:.0} <= l1 movement {:.0}",
        est.emd,
        (est.emd - emd).abs(),
        est.movement_l1
    );
}
