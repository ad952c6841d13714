//! The directed multigraph of grid cells induced by a matching and a grid,
//! with the degree identities, the long-edge path decomposition, and the
//! good-grid and long-edge predicates as checkable functions.
//!
//! Vertices are cells holding a matching endpoint. Every matching edge whose
//! endpoints fall in different cells becomes one directed edge per unit of
//! multiplicity, from the S-side cell to the T-side cell.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CellId, GridSpec, Point, SparseCellCounts, WeightedPointSet};
use crate::oracle::Matching;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchingGraphError {
    #[error("matching has a fractional multiplicity")]
    NonIntegralMatching,
    #[error("long edge {edge} lies on a directed cycle; the matching is not optimal")]
    CycleEncountered { edge: usize },
    #[error("path extension found no unused edge at cell {0}")]
    Stuck(CellId),
}

/// One unit edge of the multigraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GammaEdge {
    pub from: CellId,
    pub to: CellId,
    pub length: u64,
    pub s: Point,
    pub t: Point,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaGraph {
    grid: GridSpec,
    vertices: BTreeSet<CellId>,
    edges: Vec<GammaEdge>,
    out_deg: BTreeMap<CellId, u64>,
    in_deg: BTreeMap<CellId, u64>,
}

fn integral(m: f64) -> Result<u64, MatchingGraphError> {
    if m < 0.0 || m.fract() != 0.0 {
        return Err(MatchingGraphError::NonIntegralMatching);
    }
    Ok(m as u64)
}

pub fn build_gamma(matching: &Matching, grid: &GridSpec) -> Result<GammaGraph, MatchingGraphError> {
    let mut vertices = BTreeSet::new();
    let mut edges = Vec::new();
    let mut out_deg = BTreeMap::new();
    let mut in_deg = BTreeMap::new();
    for e in &matching.edges {
        let mult = integral(e.multiplicity)?;
        if mult == 0 {
            continue;
        }
        let (a, b) = (grid.cell_of(e.from), grid.cell_of(e.to));
        vertices.insert(a);
        vertices.insert(b);
        if a == b {
            continue;
        }
        *out_deg.entry(a).or_insert(0) += mult;
        *in_deg.entry(b).or_insert(0) += mult;
        let unit = GammaEdge {
            from: a,
            to: b,
            length: e.l1_length,
            s: e.from,
            t: e.to,
        };
        edges.extend(std::iter::repeat_n(unit, mult as usize));
    }
    edges.sort();
    Ok(GammaGraph {
        grid: *grid,
        vertices,
        edges,
        out_deg,
        in_deg,
    })
}

impl GammaGraph {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn vertices(&self) -> &BTreeSet<CellId> {
        &self.vertices
    }

    /// Unit edges in lexicographic `(from, to, length, s, t)` order.
    pub fn edges(&self) -> &[GammaEdge] {
        &self.edges
    }

    pub fn out_degree(&self, v: CellId) -> u64 {
        self.out_deg.get(&v).copied().unwrap_or(0)
    }

    pub fn in_degree(&self, v: CellId) -> u64 {
        self.in_deg.get(&v).copied().unwrap_or(0)
    }

    /// `Σ_v |deg⁺(v) - deg⁻(v)|`.
    pub fn imbalance(&self) -> u64 {
        self.vertices
            .iter()
            .map(|&v| self.out_degree(v).abs_diff(self.in_degree(v)))
            .sum()
    }

    /// Long-edge threshold `k · 2^(i+1)` at this graph's level.
    pub fn long_threshold(&self, k: u64) -> u64 {
        k << (self.grid.level() + 1)
    }

    pub fn long_edge_count(&self, threshold: u64) -> usize {
        self.edges.iter().filter(|e| e.length >= threshold).count()
    }

    fn successors(&self) -> BTreeMap<CellId, BTreeSet<CellId>> {
        let mut adj: BTreeMap<CellId, BTreeSet<CellId>> = BTreeMap::new();
        for e in &self.edges {
            adj.entry(e.from).or_default().insert(e.to);
        }
        adj
    }

    /// Number of edges on the longest simple directed path.
    pub fn longest_simple_path(&self) -> usize {
        fn dfs(
            v: CellId,
            adj: &BTreeMap<CellId, BTreeSet<CellId>>,
            on_path: &mut BTreeSet<CellId>,
        ) -> usize {
            let mut best = 0;
            if let Some(next) = adj.get(&v) {
                for &w in next {
                    if on_path.insert(w) {
                        best = best.max(1 + dfs(w, adj, on_path));
                        on_path.remove(&w);
                    }
                }
            }
            best
        }
        let adj = self.successors();
        adj.keys()
            .map(|&v| {
                let mut on_path = BTreeSet::from([v]);
                dfs(v, &adj, &mut on_path)
            })
            .max()
            .unwrap_or(0)
    }
}

fn reaches(adj: &BTreeMap<CellId, BTreeSet<CellId>>, from: CellId, target: CellId) -> bool {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == target {
            return true;
        }
        for &w in adj.get(&v).into_iter().flatten() {
            if seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    false
}

/// True iff no edge of length `>= threshold` lies on a directed cycle, i.e.
/// no chain `s_1→t_1, s_2→t_2, …` with each `t_r` sharing a cell with
/// `s_{r+1}` closes up through a long edge.
pub fn check_no_long_cycle(g: &GammaGraph, threshold: u64) -> bool {
    first_long_cycle_edge(g, threshold).is_none()
}

fn first_long_cycle_edge(g: &GammaGraph, threshold: u64) -> Option<usize> {
    let adj = g.successors();
    g.edges
        .iter()
        .position(|e| e.length >= threshold && reaches(&adj, e.to, e.from))
}

/// A path from a surplus-S cell to a surplus-T cell through at least one
/// long edge. `edges` index into [`GammaGraph::edges`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaPath {
    pub edges: Vec<usize>,
    pub start: CellId,
    pub end: CellId,
    pub long_edges: usize,
}

impl GammaPath {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub threshold: u64,
    pub paths: Vec<GammaPath>,
    /// `Σ|deg⁺ - deg⁻|` before the first extraction and after each one.
    pub imbalance_trace: Vec<u64>,
    /// Long edges left once extraction stops; always zero on success.
    pub remaining_long: usize,
}

impl Decomposition {
    pub fn removed_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.paths.iter().flat_map(|p| p.edges.iter().copied())
    }

    pub fn long_edges_covered(&self) -> usize {
        self.paths.iter().map(|p| p.long_edges).sum()
    }
}

struct Residual<'a> {
    g: &'a GammaGraph,
    removed: Vec<bool>,
    out_deg: BTreeMap<CellId, u64>,
    in_deg: BTreeMap<CellId, u64>,
    out_edges: BTreeMap<CellId, Vec<usize>>,
    in_edges: BTreeMap<CellId, Vec<usize>>,
}

impl<'a> Residual<'a> {
    fn new(g: &'a GammaGraph) -> Self {
        let mut out_edges: BTreeMap<CellId, Vec<usize>> = BTreeMap::new();
        let mut in_edges: BTreeMap<CellId, Vec<usize>> = BTreeMap::new();
        for (idx, e) in g.edges.iter().enumerate() {
            out_edges.entry(e.from).or_default().push(idx);
            in_edges.entry(e.to).or_default().push(idx);
        }
        Self {
            g,
            removed: vec![false; g.edges.len()],
            out_deg: g.out_deg.clone(),
            in_deg: g.in_deg.clone(),
            out_edges,
            in_edges,
        }
    }

    fn out(&self, v: CellId) -> u64 {
        self.out_deg.get(&v).copied().unwrap_or(0)
    }

    fn inn(&self, v: CellId) -> u64 {
        self.in_deg.get(&v).copied().unwrap_or(0)
    }

    fn imbalance(&self) -> u64 {
        self.g
            .vertices
            .iter()
            .map(|&v| self.out(v).abs_diff(self.inn(v)))
            .sum()
    }

    fn free_edge(&self, list: Option<&Vec<usize>>, in_trail: &BTreeSet<usize>) -> Option<usize> {
        list?
            .iter()
            .copied()
            .find(|&e| !self.removed[e] && !in_trail.contains(&e))
    }

    fn remove(&mut self, idx: usize) {
        let e = self.g.edges[idx];
        self.removed[idx] = true;
        *self.out_deg.get_mut(&e.from).expect("edge tail has out-degree") -= 1;
        *self.in_deg.get_mut(&e.to).expect("edge head has in-degree") -= 1;
    }

    /// Trail through `seed`, extended forward to a cell with `deg⁻ > deg⁺`
    /// and backward to a cell with `deg⁺ > deg⁻`, then loop-erased.
    fn extract(&mut self, seed: usize) -> Result<Vec<usize>, MatchingGraphError> {
        let edges = &self.g.edges;
        let mut trail = VecDeque::from([seed]);
        let mut in_trail = BTreeSet::from([seed]);

        let mut z = edges[seed].to;
        while self.inn(z) <= self.out(z) {
            let next = self
                .free_edge(self.out_edges.get(&z), &in_trail)
                .ok_or(MatchingGraphError::Stuck(z))?;
            trail.push_back(next);
            in_trail.insert(next);
            z = edges[next].to;
        }
        let mut a = edges[seed].from;
        while self.out(a) <= self.inn(a) {
            let prev = self
                .free_edge(self.in_edges.get(&a), &in_trail)
                .ok_or(MatchingGraphError::Stuck(a))?;
            trail.push_front(prev);
            in_trail.insert(prev);
            a = edges[prev].from;
        }

        let mut path: Vec<usize> = Vec::new();
        let mut position = BTreeMap::from([(a, 0usize)]);
        for idx in trail {
            path.push(idx);
            let head = edges[idx].to;
            if let Some(&p) = position.get(&head) {
                let erased = path.split_off(p);
                if erased.contains(&seed) {
                    return Err(MatchingGraphError::CycleEncountered { edge: seed });
                }
                position.retain(|_, &mut q| q <= p);
            } else {
                position.insert(head, path.len());
            }
        }
        if path.is_empty() {
            return Err(MatchingGraphError::CycleEncountered { edge: seed });
        }
        Ok(path)
    }
}

/// Repeatedly extracts a path through a remaining edge of length
/// `>= threshold` and removes its edges, until no long edge is left.
pub fn path_decompose(g: &GammaGraph, threshold: u64) -> Result<Decomposition, MatchingGraphError> {
    if let Some(edge) = first_long_cycle_edge(g, threshold) {
        return Err(MatchingGraphError::CycleEncountered { edge });
    }
    let mut res = Residual::new(g);
    let mut paths = Vec::new();
    let mut trace = vec![res.imbalance()];
    while let Some(seed) =
        (0..g.edges.len()).find(|&i| !res.removed[i] && g.edges[i].length >= threshold)
    {
        let path = res.extract(seed)?;
        for &idx in &path {
            res.remove(idx);
        }
        let long_edges = path.iter().filter(|&&i| g.edges[i].length >= threshold).count();
        paths.push(GammaPath {
            start: g.edges[path[0]].from,
            end: g.edges[*path.last().expect("nonempty path")].to,
            edges: path,
            long_edges,
        });
        trace.push(res.imbalance());
    }
    let remaining_long = (0..g.edges.len())
        .filter(|&i| !res.removed[i] && g.edges[i].length >= threshold)
        .count();
    Ok(Decomposition {
        threshold,
        paths,
        imbalance_trace: trace,
        remaining_long,
    })
}

/// True iff the longest simple path and every path of the long-edge
/// decomposition have at most `k` edges.
pub fn check_simple_path_length(g: &GammaGraph, k: u64) -> bool {
    if g.longest_simple_path() as u64 > k {
        return false;
    }
    match path_decompose(g, g.long_threshold(k)) {
        Ok(d) => d.paths.iter().all(|p| p.len() as u64 <= k),
        Err(_) => false,
    }
}

/// True iff no matching edge with `‖e‖₁ < 2^(i-3)/k` crosses `g`.
pub fn is_good_grid(g: &GridSpec, matching: &Matching, k: u64) -> bool {
    let side = g.cell_size() as u128;
    !matching.edges.iter().any(|e| {
        8 * (k as u128) * (e.l1_length as u128) < side && g.edge_crosses(e.from, e.to)
    })
}

/// Number of matching edges, with multiplicity, that cross `g`.
pub fn crossing_count(matching: &Matching, g: &GridSpec) -> Result<u64, MatchingGraphError> {
    matching
        .edges
        .iter()
        .filter(|e| g.edge_crosses(e.from, e.to))
        .map(|e| integral(e.multiplicity))
        .sum()
}

/// Number of matching edges, with multiplicity, of length `>= threshold`.
pub fn long_edges(matching: &Matching, threshold: u64) -> Result<u64, MatchingGraphError> {
    matching
        .edges
        .iter()
        .filter(|e| e.l1_length >= threshold)
        .map(|e| integral(e.multiplicity))
        .sum()
}

/// `min(distinct S, distinct T)`.
pub fn distinct_k(s: &WeightedPointSet, t: &WeightedPointSet) -> u64 {
    s.len().min(t.len()) as u64
}

/// Both sides of the long-edge bound for one grid:
/// `|{e : ‖e‖₁ >= k·2^(i+1)}| <= (k/2) · ‖V_G(S) - V_G(T)‖₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LongEdgeBound {
    pub long_edges: u64,
    pub cell_norm: u64,
    pub k: u64,
}

impl LongEdgeBound {
    pub fn holds(&self) -> bool {
        2 * self.long_edges <= self.k * self.cell_norm
    }
}

pub fn long_edge_bound(
    matching: &Matching,
    s: &WeightedPointSet,
    t: &WeightedPointSet,
    g: &GridSpec,
    k: u64,
) -> Result<LongEdgeBound, MatchingGraphError> {
    Ok(LongEdgeBound {
        long_edges: long_edges(matching, k << (g.level() + 1))?,
        cell_norm: SparseCellCounts::from_sets(*g, s, t).l1(),
        k,
    })
}
