//! Support graphs, maximal clique/biclique enumeration, edge clique covers,
//! and chordal extensions.
//!
//! Vertex sets are kept as `u128` bitmasks internally (every graph in this
//! crate has well under 128 vertices), which keeps Bron–Kerbosch tight; the
//! public API speaks sorted `Vec<usize>` vertex lists.

use std::collections::BTreeSet;

use ndarray::Array2;

use crate::{Error, Result};

const MAX_VERTICES: usize = 128;

/// Undirected simple graph with canonical `(i < j)` edge storage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        assert!(n <= MAX_VERTICES, "graphs limited to {MAX_VERTICES} vertices");
        Graph {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn with_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Graph::new(n);
        for (i, j) in edges {
            g.add_edge(i, j);
        }
        g
    }

    /// Complete graph K_n.
    pub fn complete(n: usize) -> Self {
        let mut g = Graph::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                g.add_edge(i, j);
            }
        }
        g
    }

    /// Graph whose edge set is "all pairs except the listed ones" — the
    /// co-nonedge graph of an ideal.
    pub fn from_nonedges(n: usize, nonedges: &BTreeSet<(usize, usize)>) -> Self {
        let mut g = Graph::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if !nonedges.contains(&(i, j)) {
                    g.add_edge(i, j);
                }
            }
        }
        g
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        assert!(i != j, "no loops");
        assert!(i < self.n && j < self.n);
        self.edges.insert((i.min(j), i.max(j)));
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Edges in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Non-adjacent pairs `(i < j)`.
    pub fn nonedges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if !self.edges.contains(&(i, j)) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Whether every pair inside `set` is an edge.
    pub fn is_clique(&self, set: &[usize]) -> bool {
        set.iter()
            .enumerate()
            .all(|(a, &i)| set[a + 1..].iter().all(|&j| self.has_edge(i, j)))
    }

    /// Whether the support of an exponent vector is a clique (no nonedge pair).
    pub fn supports_monomial(&self, e: &crate::Exponent) -> bool {
        let supp = e.support();
        self.is_clique(&supp)
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let adj = self.adjacency_masks();
        let mut seen: u128 = 1;
        let mut frontier: u128 = 1;
        while frontier != 0 {
            let mut next: u128 = 0;
            let mut f = frontier;
            while f != 0 {
                let v = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= adj[v];
            }
            frontier = next & !seen;
            seen |= next;
        }
        seen.count_ones() as usize == self.n
    }

    fn adjacency_masks(&self) -> Vec<u128> {
        let mut adj = vec![0u128; self.n];
        for &(i, j) in &self.edges {
            adj[i] |= 1 << j;
            adj[j] |= 1 << i;
        }
        adj
    }
}

/// Ordered list of vertex sets, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliqueList {
    pub cliques: Vec<Vec<usize>>,
}

impl CliqueList {
    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.cliques.iter()
    }
}

/// Bipartite graph on `U = {0..m}` and `W = {m..m+n}`; edges cross sides.
#[derive(Clone, Debug)]
pub struct BipartiteGraph {
    pub m: usize,
    pub n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl BipartiteGraph {
    pub fn new(m: usize, n: usize) -> Self {
        assert!(m + n <= MAX_VERTICES);
        BipartiteGraph {
            m,
            n,
            edges: BTreeSet::new(),
        }
    }

    /// Add the edge between left vertex `u < m` and right vertex `w < n`
    /// (right vertices are offset by `m` in the combined numbering).
    pub fn add_edge(&mut self, u: usize, w: usize) {
        assert!(u < self.m && w < self.n);
        self.edges.insert((u, self.m + w));
    }

    pub fn has_edge(&self, u: usize, w: usize) -> bool {
        self.edges.contains(&(u, self.m + w))
    }

    /// Edges in combined numbering, `(u, m + w)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Bipartite non-adjacent pairs in combined numbering.
    pub fn nonedges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.m {
            for w in 0..self.n {
                if !self.has_edge(u, w) {
                    out.push((u, self.m + w));
                }
            }
        }
        out
    }
}

/// Support graph of a symmetric matrix: edge `{i,j}` iff `|A_ij| > zero_tol`.
///
/// Rejects matrices whose relative asymmetry exceeds `1e-12`.
pub fn support_graph(a: &Array2<f64>, zero_tol: f64) -> Result<Graph> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Parse(format!(
            "support graph needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    if asym > 1e-12 * scale {
        return Err(Error::AsymmetricMatrix(asym));
    }
    let mut g = Graph::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if a[[i, j]].abs() > zero_tol {
                g.add_edge(i, j);
            }
        }
    }
    Ok(g)
}

fn mask_to_vec(mut mask: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    while mask != 0 {
        out.push(mask.trailing_zeros() as usize);
        mask &= mask - 1;
    }
    out
}

/// All inclusion-maximal cliques via Bron–Kerbosch with pivoting, seeded by a
/// degeneracy ordering.  Isolated vertices appear as singleton cliques.
pub fn maximal_cliques(g: &Graph) -> CliqueList {
    let n = g.n();
    let adj = g.adjacency_masks();
    let order = degeneracy_order(n, &adj);
    let mut pos = vec![0usize; n];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &v in &order {
        let later: u128 = adj[v]
            & order
                .iter()
                .filter(|&&u| pos[u] > pos[v])
                .fold(0u128, |m, &u| m | (1 << u));
        let earlier = adj[v] & !later;
        bron_kerbosch(1u128 << v, later, earlier, &adj, &mut out);
    }
    out.sort();
    CliqueList { cliques: out }
}

fn degeneracy_order(n: usize, adj: &[u128]) -> Vec<usize> {
    let mut alive: u128 = if n == 128 { !0 } else { (1u128 << n) - 1 };
    let mut order = Vec::with_capacity(n);
    while alive != 0 {
        let v = mask_to_vec(alive)
            .into_iter()
            .min_by_key(|&v| (adj[v] & alive).count_ones())
            .unwrap();
        order.push(v);
        alive &= !(1u128 << v);
    }
    order
}

fn bron_kerbosch(r: u128, mut p: u128, mut x: u128, adj: &[u128], out: &mut Vec<Vec<usize>>) {
    if p == 0 && x == 0 {
        out.push(mask_to_vec(r));
        return;
    }
    // pivot: vertex of P ∪ X with the most neighbours in P
    let pivot = mask_to_vec(p | x)
        .into_iter()
        .max_by_key(|&u| (adj[u] & p).count_ones())
        .unwrap();
    for v in mask_to_vec(p & !adj[pivot]) {
        let vbit = 1u128 << v;
        bron_kerbosch(r | vbit, p & adj[v], x & adj[v], adj, out);
        p &= !vbit;
        x |= vbit;
    }
}

/// All inclusion-maximal bicliques `(A, B)` with `A ⊆ U`, `B ⊆ W`, both
/// nonempty, and `A × B ⊆ E`, returned as combined vertex sets `A ∪ B`.
///
/// Implemented by completing each side into a clique and running the maximal
/// clique enumerator: cliques of the completion are exactly the sets whose
/// cross pairs are edges, and one-sided results are dropped afterwards.
pub fn maximal_bicliques(b: &BipartiteGraph) -> CliqueList {
    let total = b.m + b.n;
    let mut completion = Graph::new(total);
    for i in 0..b.m {
        for j in (i + 1)..b.m {
            completion.add_edge(i, j);
        }
    }
    for i in b.m..total {
        for j in (i + 1)..total {
            completion.add_edge(i, j);
        }
    }
    for (u, w) in b.edges() {
        completion.add_edge(u, w);
    }
    let cliques = maximal_cliques(&completion);
    let two_sided = cliques
        .cliques
        .into_iter()
        .filter(|c| c.iter().any(|&v| v < b.m) && c.iter().any(|&v| v >= b.m))
        .collect();
    CliqueList { cliques: two_sided }
}

/// Fractional edge clique cover: minimize `Σ x_k` subject to
/// `Σ_{k : {i,j} ⊆ V_k} x_k ≥ 1` for every target edge and `x ≥ 0`.
///
/// Returns the optimal value and the optimizer. Errors if some target edge
/// lies in no clique.
pub fn frac_cover(
    cliques: &CliqueList,
    target_edges: &[(usize, usize)],
) -> Result<(f64, Vec<f64>)> {
    let p = cliques.len();
    let mut rows = Vec::with_capacity(target_edges.len());
    for &(i, j) in target_edges {
        let mut row = vec![0.0; p];
        let mut covered = false;
        for (k, v) in cliques.iter().enumerate() {
            if v.binary_search(&i).is_ok() && v.binary_search(&j).is_ok() {
                row[k] = 1.0;
                covered = true;
            }
        }
        if !covered {
            return Err(Error::UncoveredEdge(i, j));
        }
        rows.push(row);
    }
    if p == 0 || target_edges.is_empty() {
        return Ok((0.0, vec![0.0; p]));
    }
    let c = vec![1.0; p];
    let b = vec![1.0; rows.len()];
    crate::conic::lp_solve(&c, &rows, &b)
}

/// Greedy edge clique cover: repeatedly take the clique covering the most
/// still-uncovered edges, ties broken by lowest clique index.
pub fn greedy_edge_clique_cover(g: &Graph, cliques: &CliqueList) -> CliqueList {
    let mut uncovered: BTreeSet<(usize, usize)> = g.edges().collect();
    let mut chosen = Vec::new();
    while !uncovered.is_empty() {
        let mut best: Option<(usize, usize)> = None; // (gain, index)
        for (k, v) in cliques.iter().enumerate() {
            let gain = uncovered
                .iter()
                .filter(|&&(i, j)| {
                    v.binary_search(&i).is_ok() && v.binary_search(&j).is_ok()
                })
                .count();
            if gain > 0 && best.map_or(true, |(bg, _)| gain > bg) {
                best = Some((gain, k));
            }
        }
        let Some((_, k)) = best else {
            break; // cliques do not cover E; callers validate beforehand
        };
        let v = &cliques.cliques[k];
        uncovered.retain(|&(i, j)| {
            !(v.binary_search(&i).is_ok() && v.binary_search(&j).is_ok())
        });
        chosen.push(v.clone());
    }
    CliqueList { cliques: chosen }
}

/// Minimum-fill greedy chordal extension.
///
/// Returns the extension `Ĝ ⊇ G` and its maximal cliques ordered to satisfy
/// the running intersection property.
pub fn chordal_extension(g: &Graph) -> (Graph, CliqueList) {
    let n = g.n();
    let mut adj = g.adjacency_masks();
    let mut ext = g.clone();
    let mut alive: u128 = if n == 0 { 0 } else { (1u128 << n) - 1 };
    while alive != 0 {
        // vertex with the fewest missing edges among its remaining neighbours
        let (v, _) = mask_to_vec(alive)
            .into_iter()
            .map(|v| {
                let nb = mask_to_vec(adj[v] & alive);
                let fill = nb
                    .iter()
                    .enumerate()
                    .map(|(a, &i)| {
                        nb[a + 1..]
                            .iter()
                            .filter(|&&j| adj[i] & (1 << j) == 0)
                            .count()
                    })
                    .sum::<usize>();
                (v, fill)
            })
            .min_by_key(|&(v, fill)| (fill, v))
            .unwrap();
        let nb = mask_to_vec(adj[v] & alive);
        for (a, &i) in nb.iter().enumerate() {
            for &j in &nb[a + 1..] {
                if adj[i] & (1 << j) == 0 {
                    adj[i] |= 1 << j;
                    adj[j] |= 1 << i;
                    ext.add_edge(i, j);
                }
            }
        }
        alive &= !(1u128 << v);
    }
    let cliques = maximal_cliques(&ext);
    let ordered = rip_order(cliques);
    (ext, ordered)
}

/// Reorder the maximal cliques of a chordal graph so that each clique's
/// intersection with the union of its predecessors is contained in a single
/// earlier clique (running intersection property).  Greedy max-intersection
/// selection realizes this for clique trees of chordal graphs.
fn rip_order(list: CliqueList) -> CliqueList {
    let cliques = list.cliques;
    if cliques.len() <= 1 {
        return CliqueList { cliques };
    }
    let mut used = vec![false; cliques.len()];
    let mut ordered: Vec<Vec<usize>> = vec![cliques[0].clone()];
    used[0] = true;
    let mut union: BTreeSet<usize> = cliques[0].iter().copied().collect();
    for _ in 1..cliques.len() {
        let (k, _) = cliques
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, c)| (k, c.iter().filter(|v| union.contains(v)).count()))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .unwrap();
        used[k] = true;
        union.extend(cliques[k].iter().copied());
        ordered.push(cliques[k].clone());
    }
    debug_assert!(satisfies_rip(&ordered));
    CliqueList { cliques: ordered }
}

/// Check the running intersection property of an ordered clique list.
pub fn satisfies_rip(cliques: &[Vec<usize>]) -> bool {
    for k in 1..cliques.len() {
        let union: BTreeSet<usize> = cliques[..k].iter().flatten().copied().collect();
        let inter: BTreeSet<usize> = cliques[k]
            .iter()
            .copied()
            .filter(|v| union.contains(v))
            .collect();
        if !cliques[..k]
            .iter()
            .any(|c| inter.iter().all(|v| c.contains(v)))
        {
            return false;
        }
    }
    true
}

/// Check that an elimination order is perfect for `g` (later neighbours of
/// each vertex form a clique) — the defining property of chordality.
pub fn is_perfect_elimination_order(g: &Graph, order: &[usize]) -> bool {
    let mut pos = vec![0usize; g.n()];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    for &v in order {
        let later: Vec<usize> = (0..g.n())
            .filter(|&u| u != v && g.has_edge(u, v) && pos[u] > pos[v])
            .collect();
        if !g.is_clique(&later) {
            return false;
        }
    }
    true
}

/// Whether `g` is chordal, via repeated simplicial-vertex elimination.
pub fn is_chordal(g: &Graph) -> bool {
    let n = g.n();
    let mut adj = g.adjacency_masks();
    let mut alive: u128 = if n == 0 { 0 } else { (1u128 << n) - 1 };
    'outer: while alive != 0 {
        for v in mask_to_vec(alive) {
            let nb = mask_to_vec(adj[v] & alive);
            let simplicial = nb
                .iter()
                .enumerate()
                .all(|(a, &i)| nb[a + 1..].iter().all(|&j| adj[i] & (1 << j) != 0));
            if simplicial {
                alive &= !(1u128 << v);
                for &u in &nb {
                    adj[u] &= !(1u128 << v);
                }
                continue 'outer;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn cycle(n: usize) -> Graph {
        Graph::with_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// Crown graph: K_{n,n} minus a perfect matching.
    fn crown(n: usize) -> BipartiteGraph {
        let mut b = BipartiteGraph::new(n, n);
        for u in 0..n {
            for w in 0..n {
                if u != w {
                    b.add_edge(u, w);
                }
            }
        }
        b
    }

    /// Brute-force maximal cliques over all vertex subsets (n ≤ 20).
    fn brute_force_cliques(g: &Graph) -> Vec<Vec<usize>> {
        let n = g.n();
        let mut cliques: Vec<Vec<usize>> = Vec::new();
        for mask in 1u32..(1 << n) {
            let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            if g.is_clique(&set) {
                cliques.push(set);
            }
        }
        let mut maximal: Vec<Vec<usize>> = cliques
            .iter()
            .filter(|c| {
                !cliques
                    .iter()
                    .any(|d| d.len() > c.len() && c.iter().all(|v| d.contains(v)))
            })
            .cloned()
            .collect();
        maximal.sort();
        maximal
    }

    /// Brute-force maximal bicliques (both sides nonempty).
    fn brute_force_bicliques(b: &BipartiteGraph) -> Vec<Vec<usize>> {
        let (m, n) = (b.m, b.n);
        let ok = |am: u32, bm: u32| -> bool {
            (0..m).all(|u| {
                am & (1 << u) == 0 || (0..n).all(|w| bm & (1 << w) == 0 || b.has_edge(u, w))
            })
        };
        let mut all: Vec<(u32, u32)> = Vec::new();
        for am in 1u32..(1 << m) {
            for bm in 1u32..(1 << n) {
                if ok(am, bm) {
                    all.push((am, bm));
                }
            }
        }
        let mut maximal: Vec<Vec<usize>> = all
            .iter()
            .filter(|&&(am, bm)| {
                !all.iter().any(|&(cm, dm)| {
                    (cm, dm) != (am, bm) && cm & am == am && dm & bm == bm
                })
            })
            .map(|&(am, bm)| {
                let mut v: Vec<usize> = (0..m).filter(|u| am & (1 << u) != 0).collect();
                v.extend((0..n).filter(|w| bm & (1 << w) != 0).map(|w| m + w));
                v
            })
            .collect();
        maximal.sort();
        maximal
    }

    #[test]
    fn support_graph_of_identity_is_empty() {
        let a = Array2::<f64>::eye(3);
        let g = support_graph(&a, 0.0).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn support_graph_of_all_ones_is_complete() {
        let a = Array2::<f64>::ones((4, 4));
        let g = support_graph(&a, 0.0).unwrap();
        assert_eq!(g, Graph::complete(4));
    }

    #[test]
    fn support_graph_rejects_asymmetry() {
        let a = arr2(&[[1.0, 2.0], [2.1, 1.0]]);
        assert!(matches!(
            support_graph(&a, 0.0),
            Err(Error::AsymmetricMatrix(_))
        ));
    }

    #[test]
    fn cliques_of_cycle_are_edges() {
        let cl = maximal_cliques(&cycle(5));
        assert_eq!(cl.len(), 5);
        assert!(cl.iter().all(|c| c.len() == 2));
    }

    #[test]
    fn cliques_of_complete_graph() {
        let cl = maximal_cliques(&Graph::complete(6));
        assert_eq!(cl.cliques, vec![(0..6).collect::<Vec<_>>()]);
    }

    #[test]
    fn tripartite_complete_graph_has_product_cliques() {
        // complete tripartite K_{4,4,4}: one vertex per part, 4^3 cliques
        let mut g = Graph::new(12);
        for i in 0..12 {
            for j in (i + 1)..12 {
                if i / 4 != j / 4 {
                    g.add_edge(i, j);
                }
            }
        }
        assert_eq!(maximal_cliques(&g).len(), 64);
    }

    #[test]
    fn cliques_match_brute_force_on_small_graphs() {
        let graphs = [
            cycle(5),
            cycle(6),
            Graph::complete(4),
            Graph::new(5), // empty: five singleton cliques
            Graph::with_edges(7, [(0, 1), (1, 2), (0, 2), (2, 3), (4, 5)]),
            Graph::with_edges(8, [(0, 1), (2, 3), (4, 5), (6, 7), (0, 7), (1, 6)]),
        ];
        for g in &graphs {
            assert_eq!(maximal_cliques(g).cliques, brute_force_cliques(g));
        }
    }

    #[test]
    fn bicliques_of_complete_bipartite_and_single_edge() {
        let mut full = BipartiteGraph::new(3, 2);
        for u in 0..3 {
            for w in 0..2 {
                full.add_edge(u, w);
            }
        }
        let cl = maximal_bicliques(&full);
        assert_eq!(cl.cliques, vec![vec![0, 1, 2, 3, 4]]);

        let mut single = BipartiteGraph::new(2, 2);
        single.add_edge(0, 1);
        let cl = maximal_bicliques(&single);
        assert_eq!(cl.cliques, vec![vec![0, 3]]);
    }

    #[test]
    fn crown_bicliques_match_brute_force() {
        // Each maximal biclique of the crown graph is A ∪ (W ∖ match(A)) with
        // ∅ ≠ A ⊊ U, giving 2^n − 2 sets of n vertices apiece.
        for n in 3..=5usize {
            let b = crown(n);
            let got = maximal_bicliques(&b);
            let want = brute_force_bicliques(&b);
            assert_eq!(got.cliques, want, "crown n={n}");
            assert_eq!(got.len(), (1 << n) - 2, "crown n={n} count");
            assert!(got.iter().all(|c| c.len() == n));
        }
    }

    #[test]
    fn isolated_bipartite_vertices_join_no_biclique() {
        let mut b = BipartiteGraph::new(3, 3);
        b.add_edge(0, 0);
        b.add_edge(1, 0);
        // left vertex 2 and right vertices 1, 2 are isolated
        let cl = maximal_bicliques(&b);
        assert_eq!(cl.cliques, vec![vec![0, 1, 3]]);
    }

    #[test]
    fn greedy_cover_on_complete_graph_is_single_clique() {
        let g = Graph::complete(4);
        let cl = maximal_cliques(&g);
        let cover = greedy_edge_clique_cover(&g, &cl);
        assert_eq!(cover.cliques, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn greedy_cover_on_cycle_takes_all_edges() {
        let g = cycle(5);
        let cl = maximal_cliques(&g);
        let cover = greedy_edge_clique_cover(&g, &cl);
        assert_eq!(cover.len(), 5);
    }

    #[test]
    fn greedy_ties_break_by_lowest_index() {
        // two disjoint triangles: both cover 3 edges; lower-indexed first
        let g = Graph::with_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
        let cl = maximal_cliques(&g);
        let cover = greedy_edge_clique_cover(&g, &cl);
        assert_eq!(cover.cliques[0], cl.cliques[0]);
        assert_eq!(cover.len(), 2);
    }

    #[test]
    fn chordal_inputs_are_untouched() {
        let tree = Graph::with_edges(6, [(0, 1), (1, 2), (1, 3), (3, 4), (3, 5)]);
        let (ext, cliques) = chordal_extension(&tree);
        assert_eq!(ext, tree);
        assert_eq!(cliques.len(), 5);
        assert!(satisfies_rip(&cliques.cliques));

        let (ext, cliques) = chordal_extension(&Graph::complete(5));
        assert_eq!(ext, Graph::complete(5));
        assert_eq!(cliques.len(), 1);
    }

    #[test]
    fn cycle_extensions_triangulate() {
        let (ext4, cl4) = chordal_extension(&cycle(4));
        assert!(is_chordal(&ext4));
        assert_eq!(ext4.edge_count(), 5); // one chord
        assert_eq!(cl4.len(), 2);
        assert!(cl4.iter().all(|c| c.len() == 3));
        assert!(satisfies_rip(&cl4.cliques));

        let (ext5, cl5) = chordal_extension(&cycle(5));
        assert!(is_chordal(&ext5));
        assert!(cl5.len() <= 3);
        assert!(cl5.iter().all(|c| c.len() == 3));
        assert!(satisfies_rip(&cl5.cliques));
    }

    #[test]
    fn frac_cover_of_triangle_is_one() {
        let g = Graph::complete(3);
        let cl = maximal_cliques(&g);
        let edges: Vec<_> = g.edges().collect();
        let (val, x) = frac_cover(&cl, &edges).unwrap();
        assert!((val - 1.0).abs() < 1e-7);
        assert!((x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn frac_cover_of_cycle_needs_every_edge() {
        // C_5 is triangle-free: cliques are its edges, each covering itself
        let g = cycle(5);
        let cl = maximal_cliques(&g);
        let edges: Vec<_> = g.edges().collect();
        let (val, _) = frac_cover(&cl, &edges).unwrap();
        assert!((val - 5.0).abs() < 1e-6);
    }

    #[test]
    fn frac_cover_of_complete_bipartite_with_edge_cliques() {
        // K_{3,3} with the edge list as cover candidates: 9 edges, 9 weight
        let mut b = BipartiteGraph::new(3, 3);
        for u in 0..3 {
            for w in 0..3 {
                b.add_edge(u, w);
            }
        }
        let edges: Vec<_> = b.edges().collect();
        let cl = CliqueList {
            cliques: edges.iter().map(|&(u, w)| vec![u, w]).collect(),
        };
        let (val, _) = frac_cover(&cl, &edges).unwrap();
        assert!((val - 9.0).abs() < 1e-6);
    }

    #[test]
    fn frac_biclique_cover_of_crown_four() {
        // Optimum 3: weight 1/2 on each of the six balanced bicliques covers
        // every edge twice; the uniform dual 3/16 per edge certifies it.
        let b = crown(4);
        let cl = maximal_bicliques(&b);
        let edges: Vec<_> = b.edges().collect();
        let (val, x) = frac_cover(&cl, &edges).unwrap();
        assert!((val - 3.0).abs() < 1e-6, "bc_frac(crown_4) = {val}");
        // returned weights must form a feasible fractional cover
        for &(u, w) in &edges {
            let mut covered = 0.0;
            for (k, v) in cl.iter().enumerate() {
                if v.contains(&u) && v.contains(&w) {
                    covered += x[k];
                }
            }
            assert!(covered >= 1.0 - 1e-6);
        }
    }

    #[test]
    fn frac_cover_never_exceeds_greedy() {
        let graphs = [
            cycle(6),
            Graph::with_edges(7, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5), (5, 6)]),
            Graph::complete(5),
        ];
        for g in &graphs {
            let cl = maximal_cliques(g);
            let edges: Vec<_> = g.edges().collect();
            let (frac, _) = frac_cover(&cl, &edges).unwrap();
            let greedy = greedy_edge_clique_cover(g, &cl);
            assert!(frac <= greedy.len() as f64 + 1e-6);
        }
    }

    #[test]
    fn triangle_free_cover_equals_edge_count() {
        // with no triangles every clique is an edge, so c_frac = |E|
        for g in [cycle(5), cycle(7), Graph::with_edges(6, [(0, 1), (2, 3), (4, 5)])] {
            let cl = maximal_cliques(&g);
            let edges: Vec<_> = g.edges().collect();
            let (val, _) = frac_cover(&cl, &edges).unwrap();
            assert!((val - edges.len() as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn uncovered_edge_is_an_error() {
        let cl = CliqueList { cliques: vec![vec![0, 1]] };
        let err = frac_cover(&cl, &[(0, 1), (1, 2)]).unwrap_err();
        assert!(matches!(err, Error::UncoveredEdge(1, 2)));
    }

    #[test]
    fn random_extensions_are_chordal_with_rip() {
        // deterministic pseudo-random edge sets via a simple LCG
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as usize
        };
        for n in 4..=9usize {
            for _ in 0..8 {
                let mut g = Graph::new(n);
                for i in 0..n {
                    for j in (i + 1)..n {
                        if next() % 3 == 0 {
                            g.add_edge(i, j);
                        }
                    }
                }
                let (ext, cliques) = chordal_extension(&g);
                assert!(is_chordal(&ext));
                assert!(g.edges().all(|(i, j)| ext.has_edge(i, j)));
                assert!(cliques.len() <= n.max(1));
                assert!(satisfies_rip(&cliques.cliques));
                for c in cliques.iter() {
                    assert!(ext.is_clique(c));
                }
            }
        }
    }
}
