//! Multigrid estimate over a turnstile stream: points arrive, some leave,
//! and the estimate is read off the sketches at the end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emd_stream::estimators::{MultigridConfig, MultigridState};
use emd_stream::geometry::{Domain, Point, SetId, StreamUpdate, WeightedPointSet};
use emd_stream::oracle::exact_emd;

fn main() {
    let domain = Domain::new(64).unwrap();
    let config = MultigridConfig::new(domain, 42);
    let mut st = MultigridState::new(&config).unwrap();
    println!(
        "{} sketches x {} rows, {} KiB",
        config.sketch_count(),
        config.rows(),
        st.memory_bytes() / 1024
    );

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sites = [Point::new(10, 12), Point::new(50, 40), Point::new(30, 60)];
    let mut s = WeightedPointSet::new();
    let mut t = WeightedPointSet::new();
    for i in 0..90 {
        let site = sites[i % 3];
        let p = Point::new(
            (site.x as i64 + rng.gen_range(-6..=6)).clamp(1, 64) as u32,
            (site.y as i64 + rng.gen_range(-6..=3)).clamp(1, 64) as u32,
        );
        st.update(&StreamUpdate::insert(SetId::S, p, 1));
        st.update(&StreamUpdate::insert(SetId::T, site, 1));
        s.add(p, 1.0);
        t.add(site, 1.0);
    }
    // a stray pair that is later withdrawn
    let stray = StreamUpdate::insert(SetId::S, Point::new(1, 64), 3);
    st.update(&stray);
    st.update(&StreamUpdate::insert(SetId::T, Point::new(64, 1), 3));
    st.update(&stray.inverse());
    st.update(&StreamUpdate::delete(SetId::T, Point::new(64, 1), 3));

    let est = st.estimate().unwrap();
    let emd = exact_emd(&s, &t).unwrap().cost;
    for l in &est.levels {
        println!("level {}: grid {} chosen, C = {:.1}", l.level, l.chosen_grid, l.c_hat);
    }
    println!("k_hat = {:.2}", est.k_hat);
    println!("Z = {:.1}, EMD = {emd}, ratio {:.2}", est.z, est.z / emd);
}
