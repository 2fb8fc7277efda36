//! Box-kernel instances built from regular graphs.
//!
//! Vertices embed as rows of the graph's vertex–edge incidence matrix,
//! scaled by `1/√A` with `A = (1 − 1/k)(Δ − 1)`. A set of `k` scaled
//! centers fits in a unit ball exactly when the vertices form a `k`-clique,
//! so the box-kernel mode value separates clique from clique-free instances
//! with a gap. The verifier checks that correspondence by exact subset
//! enumeration at desk scale.

use std::collections::HashSet;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kde::{Dataset, KdeInstance};
use crate::kernels::{KernelKind, KernelSpec};
use crate::meb::min_enclosing_ball;
use crate::util::dist_sq;

/// Guard on exact subset enumeration.
pub const MAX_ENUMERATION_VERTICES: usize = 25;

/// An undirected Δ-regular graph with no self-loops or duplicate edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularGraph {
    vertices: usize,
    edges: Vec<(usize, usize)>,
    degree: usize,
}

impl RegularGraph {
    pub fn new(vertices: usize, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        if vertices == 0 {
            return Err(Error::Domain("graph needs at least one vertex".into()));
        }
        let mut degrees = vec![0usize; vertices];
        let mut seen = HashSet::new();
        for e in edges.iter_mut() {
            let (u, v) = *e;
            if u == v {
                return Err(Error::Domain(format!("self-loop at vertex {u}")));
            }
            if u >= vertices || v >= vertices {
                return Err(Error::Domain(format!("edge ({u}, {v}) out of range")));
            }
            *e = (u.min(v), u.max(v));
            if !seen.insert(*e) {
                return Err(Error::Domain(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            degrees[u] += 1;
            degrees[v] += 1;
        }
        let degree = degrees[0];
        if degrees.iter().any(|&d| d != degree) {
            return Err(Error::Domain("graph is not regular".into()));
        }
        Ok(Self { vertices, edges, degree })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Parses an edge-list: one `u v` pair per line, 0-indexed. Blank lines
    /// and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_vertex = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (u, v) = match (it.next(), it.next(), it.next()) {
                (Some(u), Some(v), None) => (u, v),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected `u v`, got `{line}`",
                        lineno + 1
                    )))
                }
            };
            let u: usize = u
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad vertex `{u}`", lineno + 1)))?;
            let v: usize = v
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad vertex `{v}`", lineno + 1)))?;
            max_vertex = max_vertex.max(u).max(v);
            edges.push((u, v));
        }
        if edges.is_empty() {
            return Err(Error::Parse("edge list is empty".into()));
        }
        Self::new(max_vertex + 1, edges)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path.as_ref())?)
    }

    /// The complete graph on `k` vertices.
    pub fn complete(k: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for u in 0..k {
            for v in (u + 1)..k {
                edges.push((u, v));
            }
        }
        Self::new(k, edges)
    }

    /// The complete bipartite graph `K_{a,a}` (equal sides keep it regular).
    pub fn complete_bipartite(a: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for u in 0..a {
            for v in 0..a {
                edges.push((u, a + v));
            }
        }
        Self::new(2 * a, edges)
    }

    /// The Petersen graph: 3-regular, triangle-free, 10 vertices.
    pub fn petersen() -> Self {
        let mut edges = Vec::new();
        for i in 0..5 {
            edges.push((i, (i + 1) % 5)); // outer cycle
            edges.push((5 + i, 5 + (i + 2) % 5)); // inner pentagram
            edges.push((i, 5 + i)); // spokes
        }
        Self::new(10, edges).expect("petersen graph is 3-regular")
    }

    /// A random `degree`-regular graph via the pairing model, rejecting
    /// self-loops and duplicates. Deterministic given the seed.
    pub fn random_regular(n: usize, degree: usize, seed: u64) -> Result<Self> {
        if n * degree % 2 != 0 {
            return Err(Error::Domain("n * degree must be even".into()));
        }
        if degree >= n {
            return Err(Error::Domain("degree must be below the vertex count".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        'attempt: for _ in 0..10_000 {
            let mut stubs: Vec<usize> =
                (0..n).flat_map(|v| std::iter::repeat(v).take(degree)).collect();
            stubs.shuffle(&mut rng);
            let mut seen = HashSet::new();
            let mut edges = Vec::with_capacity(n * degree / 2);
            for pair in stubs.chunks_exact(2) {
                let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                if u == v || !seen.insert((u, v)) {
                    continue 'attempt;
                }
                edges.push((u, v));
            }
            return Self::new(n, edges);
        }
        Err(Error::Domain(format!(
            "could not sample a simple {degree}-regular graph on {n} vertices"
        )))
    }

    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        let key = (u.min(v), u.max(v));
        self.edges.contains(&key)
    }

    /// Whether the graph contains a complete subgraph on `k` vertices,
    /// decided by direct backtracking over candidate extensions.
    pub fn has_clique(&self, k: usize) -> bool {
        if k == 0 {
            return true;
        }
        if k == 1 {
            return self.vertices > 0;
        }
        let mut adj = vec![vec![false; self.vertices]; self.vertices];
        for &(u, v) in &self.edges {
            adj[u][v] = true;
            adj[v][u] = true;
        }
        let mut chosen = Vec::new();
        self.extend_clique(&adj, &mut chosen, 0, k)
    }

    fn extend_clique(
        &self,
        adj: &[Vec<bool>],
        chosen: &mut Vec<usize>,
        start: usize,
        k: usize,
    ) -> bool {
        if chosen.len() == k {
            return true;
        }
        // Not enough vertices left to finish the clique.
        if self.vertices - start < k - chosen.len() {
            return false;
        }
        for v in start..self.vertices {
            if chosen.iter().all(|&u| adj[u][v]) {
                chosen.push(v);
                if self.extend_clique(adj, chosen, v + 1, k) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
}

/// A scaled incidence embedding ready for box-kernel mode finding.
#[derive(Debug, Clone)]
pub struct GadgetInstance {
    pub instance: KdeInstance,
    /// The squared-radius scale `A = (1 − 1/k)(Δ − 1)`.
    pub scale: f64,
    pub k: usize,
}

/// Embeds vertices as rows of the incidence matrix: `n = |V|` points in
/// `d = |E|` dimensions, each with exactly Δ ones.
pub fn incidence_embed(g: &RegularGraph) -> Dataset {
    let n = g.vertex_count();
    let d = g.edge_count();
    let mut flat = vec![0.0; n * d];
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        flat[u * d + e] = 1.0;
        flat[v * d + e] = 1.0;
    }
    Dataset::from_flat(flat, n, d).expect("incidence matrix is a valid dataset")
}

/// Builds the box-kernel instance for deciding `k`-cliques: incidence rows
/// divided by `√A`.
pub fn build_gadget(g: &RegularGraph, k: usize) -> Result<GadgetInstance> {
    if k < 2 {
        return Err(Error::Domain(format!("k must be at least 2, got {k}")));
    }
    if g.degree() < 2 {
        return Err(Error::Degenerate(
            "gadget scale vanishes for graphs of degree below 2".into(),
        ));
    }
    let scale = (1.0 - 1.0 / k as f64) * (g.degree() as f64 - 1.0);
    let raw = incidence_embed(g);
    let inv_sqrt = 1.0 / scale.sqrt();
    let flat: Vec<f64> = raw.as_flat().iter().map(|v| v * inv_sqrt).collect();
    let data = Dataset::from_flat(flat, raw.len(), raw.dim())?;
    let kernel = KernelSpec::new(KernelKind::Box, 1.0)?;
    Ok(GadgetInstance { instance: KdeInstance::new(data, kernel), scale, k })
}

/// The exact maximum number of centers enclosable by a radius-1 ball,
/// found by enumerating subsets in decreasing size and checking each
/// minimum enclosing ball. Radius comparisons use a `1e−9` tolerance, far
/// below the `2/(k²A)` separation the construction guarantees.
pub fn max_covered(gadget: &GadgetInstance) -> Result<usize> {
    let data = gadget.instance.data();
    let n = data.len();
    if n > MAX_ENUMERATION_VERTICES {
        return Err(Error::BudgetExceeded {
            points: 1u128 << n,
            cap: 1u128 << MAX_ENUMERATION_VERTICES,
        });
    }
    const RADIUS_SQ_TOL: f64 = 1e-9;
    // Pairs farther than a diameter apart can never share a unit ball.
    let mut pair_ok = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            pair_ok[i][j] = dist_sq(data.point(i), data.point(j)) <= 4.0 + RADIUS_SQ_TOL;
        }
    }
    for size in (1..=n).rev() {
        let mut chosen = Vec::with_capacity(size);
        if covered_subset_exists(data, &pair_ok, &mut chosen, 0, size, RADIUS_SQ_TOL) {
            return Ok(size);
        }
    }
    Ok(0)
}

fn covered_subset_exists(
    data: &Dataset,
    pair_ok: &[Vec<bool>],
    chosen: &mut Vec<usize>,
    start: usize,
    size: usize,
    tol: f64,
) -> bool {
    if chosen.len() == size {
        let pts: Vec<Vec<f64>> = chosen.iter().map(|&i| data.point(i).to_vec()).collect();
        let ball = min_enclosing_ball(&pts).expect("subset is nonempty");
        return ball.radius_sq <= 1.0 + tol;
    }
    if data.len() - start < size - chosen.len() {
        return false;
    }
    for i in start..data.len() {
        if chosen.iter().all(|&j| pair_ok[j][i]) {
            chosen.push(i);
            if covered_subset_exists(data, pair_ok, chosen, i + 1, size, tol) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

/// Checks the clique ↔ mode-value correspondence: a unit ball covers at
/// least `k` centers exactly when the graph has a `k`-clique.
pub fn verify_gadget(g: &RegularGraph, k: usize) -> Result<bool> {
    let gadget = build_gadget(g, k)?;
    let covered = max_covered(&gadget)?;
    Ok((covered >= k) == g.has_clique(k))
}
