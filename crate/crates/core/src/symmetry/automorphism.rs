use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonians::{interaction_graph, ProblemGraph};
use crate::pauli::PauliSum;
use crate::seed::derive_seed;

/// Largest vertex count searched.
pub const MAX_VERTICES: usize = 16;
/// Largest group enumerated element by element.
pub const MAX_GROUP_ORDER: usize = 100_000;

/// Full automorphism group with orbit partitions.
///
/// Element `π` sends vertex `v` to `π[v]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AutomorphismGroup {
    pub elements: Vec<Vec<usize>>,
    pub vertex_orbits: Vec<Vec<usize>>,
    pub edge_orbits: Vec<Vec<(usize, usize)>>,
}

impl AutomorphismGroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains(&self, perm: &[usize]) -> bool {
        self.elements.binary_search_by(|e| e.as_slice().cmp(perm)).is_ok()
    }

    /// Pairwise composition closure.
    pub fn is_closed(&self) -> bool {
        self.elements.iter().all(|a| {
            self.elements
                .iter()
                .all(|b| self.contains(&compose(a, b)))
        })
    }

    /// Orbit index of every vertex.
    pub fn vertex_orbit_index(&self) -> Vec<usize> {
        let n = self.vertex_orbits.iter().map(Vec::len).sum();
        let mut idx = vec![0; n];
        for (k, orbit) in self.vertex_orbits.iter().enumerate() {
            for &v in orbit {
                idx[v] = k;
            }
        }
        idx
    }
}

/// `(a ∘ b)[v] = a[b[v]]`.
pub fn compose(a: &[usize], b: &[usize]) -> Vec<usize> {
    b.iter().map(|&v| a[v]).collect()
}

pub fn inverse(a: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; a.len()];
    for (v, &w) in a.iter().enumerate() {
        inv[w] = v;
    }
    inv
}

/// All vertex permutations preserving adjacency.
pub fn graph_automorphisms(g: &ProblemGraph) -> Result<AutomorphismGroup> {
    let colors = vec![0u64; g.num_vertices()];
    let elements = search(g, &colors, |_| true)?;
    Ok(assemble(g, elements))
}

/// Qubit permutations `π` with `πHπ⁻¹ = H` term by term (types and
/// coefficients included), searched over the interaction graph of `h`.
pub fn hamiltonian_automorphisms(h: &PauliSum) -> Result<AutomorphismGroup> {
    let g = interaction_graph(h);
    let n = h.num_qubits();
    // colour qubits by their single-qubit content so the search prunes early;
    // wrapping addition keeps the colour independent of term order
    let mut colors = vec![0u64; n];
    for (c, p) in h.terms() {
        if let [q] = p.support()[..] {
            let code = derive_seed(c.to_bits(), &[p.pauli_at(q) as u64]);
            colors[q] = colors[q].wrapping_add(code);
        }
    }
    let elements = search(&g, &colors, |perm| h.permuted(perm).approx_eq(h, 0.0))?;
    Ok(assemble(&g, elements))
}

fn search<F>(g: &ProblemGraph, colors: &[u64], accept: F) -> Result<Vec<Vec<usize>>>
where
    F: Fn(&[usize]) -> bool,
{
    let n = g.num_vertices();
    if n > MAX_VERTICES {
        return Err(Error::BudgetExceeded(format!(
            "{n} vertices exceeds the search budget of {MAX_VERTICES}"
        )));
    }
    let adj = g.neighbors();
    let deg = g.degrees();
    let invariant: Vec<(u64, usize, Vec<usize>)> = (0..n)
        .map(|v| {
            let mut nd: Vec<usize> = adj[v].iter().map(|&w| deg[w]).collect();
            nd.sort_unstable();
            (colors[v], deg[v], nd)
        })
        .collect();
    let mut matrix = vec![vec![false; n]; n];
    for &(u, v) in g.edges() {
        matrix[u][v] = true;
        matrix[v][u] = true;
    }
    let mut state = Search {
        n,
        invariant,
        matrix,
        perm: vec![usize::MAX; n],
        used: vec![false; n],
        found: Vec::new(),
    };
    state.extend(0, &accept)?;
    state.found.sort();
    Ok(state.found)
}

struct Search {
    n: usize,
    invariant: Vec<(u64, usize, Vec<usize>)>,
    matrix: Vec<Vec<bool>>,
    perm: Vec<usize>,
    used: Vec<bool>,
    found: Vec<Vec<usize>>,
}

impl Search {
    fn extend<F: Fn(&[usize]) -> bool>(&mut self, v: usize, accept: &F) -> Result<()> {
        if v == self.n {
            if accept(&self.perm) {
                if self.found.len() == MAX_GROUP_ORDER {
                    return Err(Error::BudgetExceeded(format!(
                        "automorphism group larger than {MAX_GROUP_ORDER}"
                    )));
                }
                self.found.push(self.perm.clone());
            }
            return Ok(());
        }
        for w in 0..self.n {
            if self.used[w] || self.invariant[w] != self.invariant[v] {
                continue;
            }
            let consistent = (0..v).all(|u| self.matrix[u][v] == self.matrix[self.perm[u]][w]);
            if !consistent {
                continue;
            }
            self.perm[v] = w;
            self.used[w] = true;
            self.extend(v + 1, accept)?;
            self.used[w] = false;
        }
        self.perm[v] = usize::MAX;
        Ok(())
    }
}

fn assemble(g: &ProblemGraph, elements: Vec<Vec<usize>>) -> AutomorphismGroup {
    let n = g.num_vertices();
    let mut vs = UnionFind::new(n);
    let edges = g.edges();
    let mut es = UnionFind::new(edges.len());
    for perm in &elements {
        for v in 0..n {
            vs.union(v, perm[v]);
        }
        for (i, &(u, v)) in edges.iter().enumerate() {
            let (a, b) = (perm[u].min(perm[v]), perm[u].max(perm[v]));
            let j = edges.binary_search(&(a, b)).expect("automorphism maps edges to edges");
            es.union(i, j);
        }
    }
    AutomorphismGroup {
        elements,
        vertex_orbits: vs.classes(),
        edge_orbits: es.classes().into_iter().map(|c| c.into_iter().map(|i| edges[i]).collect()).collect(),
    }
}

/// Disjoint sets over `0..n`; classes come out sorted by smallest member.
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    pub(crate) fn classes(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
        for x in 0..n {
            let r = self.find(x);
            by_root[r].push(x);
        }
        by_root.into_iter().filter(|c| !c.is_empty()).collect()
    }
}
