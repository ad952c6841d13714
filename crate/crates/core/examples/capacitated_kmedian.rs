//! Capacitated 2-median on a 4x4 grid by exhaustive search, scored with
//! every estimator and checked against the flow-based optimum.

use emd_stream::estimators::MultigridConfig;
use emd_stream::geometry::{Domain, Point, SetId, StreamUpdate, WeightedPointSet};
use emd_stream::harness::{capacitated_search, CapEstimator};
use emd_stream::oracle::exact_capacitated_kmedian;

fn main() {
    let domain = Domain::new(4).unwrap();
    let pts = [(1, 1), (1, 2), (2, 1), (4, 4), (4, 3), (3, 4), (1, 4)].map(|(x, y)| Point::new(x, y));
    let updates: Vec<StreamUpdate> = pts.iter().map(|p| StreamUpdate::insert(SetId::S, *p, 1)).collect();
    let capacity = 4;

    let opt = exact_capacitated_kmedian(&WeightedPointSet::from_points(pts), 2, capacity, domain).unwrap();
    println!("optimum {} at {:?} with loads {:?}", opt.cost, opt.centers, opt.capacities);

    let config = MultigridConfig::new(domain, 8);
    for est in CapEstimator::ALL {
        let r = capacitated_search(&updates, 2, capacity, est, &config).unwrap();
        println!(
            "{est:?}: centers {:?} loads {:?}, estimated {:.2}, true cost {} ({} candidates)",
            r.centers, r.capacities, r.estimated_cost, r.exact_cost, r.candidates
        );
    }
}
