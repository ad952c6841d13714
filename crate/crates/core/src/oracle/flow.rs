//! Successive-shortest-path min-cost flow with Johnson potentials.
//!
//! Costs are `f64` so the same solver serves the ℓ1 (integral) and ℓ2 ground
//! distances; with integral costs every potential is an exact integer.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    rev: usize,
    cap: i64,
    cost: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MinCostFlow {
    graph: Vec<Vec<Arc>>,
}

/// Handle to a forward arc, used to read its flow back after solving.
#[derive(Debug, Clone, Copy)]
pub struct ArcRef {
    from: usize,
    index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl MinCostFlow {
    pub fn new(nodes: usize) -> Self {
        Self {
            graph: vec![Vec::new(); nodes],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> ArcRef {
        debug_assert!(cost >= 0.0, "negative arc costs are not supported");
        let index = self.graph[from].len();
        let rev = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Arc { to, rev, cap, cost });
        self.graph[to].push(Arc {
            to: from,
            rev: index,
            cap: 0,
            cost: -cost,
        });
        ArcRef { from, index }
    }

    pub fn flow_on(&self, arc: ArcRef) -> i64 {
        let a = &self.graph[arc.from][arc.index];
        self.graph[a.to][a.rev].cap
    }

    /// Pushes up to `limit` units from `source` to `sink` along cheapest
    /// paths. Returns `(flow, cost)`.
    pub fn solve(&mut self, source: usize, sink: usize, limit: i64) -> (i64, f64) {
        let n = self.graph.len();
        let mut potential = vec![0.0f64; n];
        let mut dist = vec![f64::INFINITY; n];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut flow = 0i64;
        let mut cost = 0.0f64;

        while flow < limit {
            dist.iter_mut().for_each(|d| *d = f64::INFINITY);
            prev.iter_mut().for_each(|p| *p = None);
            dist[source] = 0.0;
            let mut heap = BinaryHeap::new();
            heap.push(Entry {
                dist: 0.0,
                node: source,
            });
            while let Some(Entry { dist: d, node: v }) = heap.pop() {
                if d > dist[v] {
                    continue;
                }
                for (i, arc) in self.graph[v].iter().enumerate() {
                    if arc.cap <= 0 {
                        continue;
                    }
                    // Reduced costs are nonnegative up to rounding in the
                    // real-valued case.
                    let reduced = (arc.cost + potential[v] - potential[arc.to]).max(0.0);
                    let nd = d + reduced;
                    if nd < dist[arc.to] {
                        dist[arc.to] = nd;
                        prev[arc.to] = Some((v, i));
                        heap.push(Entry {
                            dist: nd,
                            node: arc.to,
                        });
                    }
                }
            }
            if !dist[sink].is_finite() {
                break;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    potential[v] += dist[v];
                }
            }

            let mut push = limit - flow;
            let mut v = sink;
            while let Some((u, i)) = prev[v] {
                push = push.min(self.graph[u][i].cap);
                v = u;
            }
            let mut v = sink;
            while let Some((u, i)) = prev[v] {
                let rev = self.graph[u][i].rev;
                self.graph[u][i].cap -= push;
                self.graph[v][rev].cap += push;
                cost += push as f64 * self.graph[u][i].cost;
                v = u;
            }
            flow += push;
        }
        (flow, cost)
    }
}
