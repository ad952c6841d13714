//! Builds the cell graph of an optimal matching on one shifted grid and
//! walks through its structure: imbalance, long edges, and the path
//! decomposition that peels them off.

use emd_stream::geometry::{Domain, GridSpec};
use emd_stream::harness::{generate, Generator, InstanceSpec};
use emd_stream::matching_graph::{
    build_gamma, check_no_long_cycle, crossing_count, distinct_k, is_good_grid, long_edge_bound,
    path_decompose,
};
use emd_stream::geometry::SparseCellCounts;
use emd_stream::oracle::exact_emd;

fn main() {
    let domain = Domain::new(64).unwrap();
    let inst = generate(&InstanceSpec {
        n: 60,
        k: 3,
        domain,
        generator: Generator::Uniform,
        seed: 17,
    })
    .unwrap();
    let m = exact_emd(&inst.s, &inst.t).unwrap();
    let k = distinct_k(&inst.s, &inst.t);

    for level in [1, 2, 3] {
        let grid = GridSpec::new(level, 3 % (1 << level), (1 << level) - 1).unwrap();
        let gamma = build_gamma(&m, &grid).unwrap();
        let norm = SparseCellCounts::from_sets(grid, &inst.s, &inst.t).l1();
        let threshold = gamma.long_threshold(k);
        println!("level {level}: {} cells, {} edges", gamma.vertices().len(), gamma.edges().len());
        println!("  imbalance {} == cell norm {norm}", gamma.imbalance());
        println!("  crossings {}", crossing_count(&m, &grid).unwrap());
        let b = long_edge_bound(&m, &inst.s, &inst.t, &grid, k).unwrap();
        println!("  long edges {} vs (k/2)C = {}", b.long_edges, k * b.cell_norm / 2);
        println!("  no long cycle: {}", check_no_long_cycle(&gamma, threshold));
        println!("  good grid: {}", is_good_grid(&grid, &m, k));
        match path_decompose(&gamma, threshold) {
            Ok(d) => println!(
                "  {} paths, imbalance {} -> {}, longest path {} edges",
                d.paths.len(),
                d.imbalance_trace[0],
                d.imbalance_trace.last().unwrap(),
                d.paths.iter().map(|p| p.len()).max().unwrap_or(0)
            ),
            Err(e) => println!("  decomposition refused: {e}"),
        }
    }
}
