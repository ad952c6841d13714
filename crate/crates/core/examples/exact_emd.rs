//! Exact earth-mover distance between two small point sets, with the
//! optimal matching printed edge by edge.

use emd_stream::geometry::{Point, WeightedPointSet};
use emd_stream::oracle::{brute_force_emd, exact_emd};

fn main() {
    let s = WeightedPointSet::from_weighted([
        (Point::new(1, 1), 2.0),
        (Point::new(4, 2), 1.0),
        (Point::new(7, 7), 1.0),
    ]);
    let t = WeightedPointSet::from_weighted([
        (Point::new(2, 1), 1.0),
        (Point::new(1, 3), 1.0),
        (Point::new(8, 8), 2.0),
    ]);

    let m = exact_emd(&s, &t).expect("balanced inputs");
    for e in &m.edges {
        println!("{} -> {}  x{}  length {}", e.from, e.to, e.multiplicity, e.l1_length);
    }
    println!("EMD = {}", m.cost);
    println!("brute force agrees: {}", brute_force_emd(&s, &t).unwrap() == m.cost);
}
