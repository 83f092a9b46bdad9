//! Problem Hamiltonians, random problem graphs and identity embeddings.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::seed::rng;
use crate::symmetry::SubspaceBasis;

const REGULAR_ATTEMPTS: usize = 10_000;

/// Simple undirected graph; edges are stored as sorted `(u, v)` with `u < v`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemGraph {
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl ProblemGraph {
    pub fn new<I>(num_vertices: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= num_vertices || v >= num_vertices {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) outside {num_vertices} vertices"
                )));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop at {u}")));
            }
            if !set.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(Self {
            num_vertices,
            edges: set.into_iter().collect(),
            seed: None,
        })
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|v| (v - 1, v))).expect("valid path")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs three vertices");
        Self::new(n, (0..n).map(|v| (v, (v + 1) % n))).expect("valid cycle")
    }

    pub fn complete(n: usize) -> Self {
        Self::new(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)))).expect("valid")
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.num_vertices];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_vertices];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.num_vertices == 0 {
            return true;
        }
        let adj = self.neighbors();
        let mut seen = vec![false; self.num_vertices];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// `"n m"` followed by one `"u v"` line per edge.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.num_vertices, self.edges.len());
        for (u, v) in &self.edges {
            writeln!(s, "{u} {v}").expect("write to string");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty graph file".into()))?;
        let [n, m] = parse_pair(header)?;
        let edges: Vec<_> = lines
            .map(|l| parse_pair(l).map(|[u, v]| (u, v)))
            .collect::<Result<_>>()?;
        if edges.len() != m {
            return Err(Error::Parse(format!(
                "header announces {m} edges, found {}",
                edges.len()
            )));
        }
        Self::new(n, edges)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn parse_pair(line: &str) -> Result<[usize; 2]> {
    let mut it = line.split_whitespace().map(|t| {
        t.parse::<usize>()
            .map_err(|e| Error::Parse(format!("{t:?}: {e}")))
    });
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok([a?, b?]),
        _ => Err(Error::Parse(format!("expected two integers, got {line:?}"))),
    }
}

/// `-Σ Z_j Z_{j+1} - h Σ X_j` with open boundary. X terms come first.
pub fn build_tfim(n: usize, h: f64) -> Result<PauliSum> {
    if n < 2 {
        return Err(Error::InvalidArgument("TFIM needs at least two qubits".into()));
    }
    let mut out = PauliSum::new(n);
    for j in 0..n {
        out.add_term(-h, PauliString::single(n, j, Pauli::X)?)?;
    }
    for j in 0..n - 1 {
        out.add_term(-1.0, zz(n, j, j + 1)?)?;
    }
    Ok(out)
}

fn zz(n: usize, u: usize, v: usize) -> Result<PauliString> {
    PauliString::from_sparse(n, &[(u, Pauli::Z), (v, Pauli::Z)])
}

/// Negated cut operator `-½ Σ_{(u,v)} (I - Z_u Z_v)`; its minimum is `-maxcut`.
pub fn build_maxcut(g: &ProblemGraph) -> Result<PauliSum> {
    if g.num_edges() == 0 {
        return Err(Error::InvalidArgument("MaxCut needs at least one edge".into()));
    }
    let n = g.num_vertices();
    let mut out = PauliSum::new(n);
    out.add_term(-0.5 * g.num_edges() as f64, PauliString::identity(n))?;
    for &(u, v) in g.edges() {
        out.add_term(0.5, zz(n, u, v)?)?;
    }
    Ok(out)
}

/// Exhaustive maximum cut; for oracles on small graphs.
pub fn max_cut_brute_force(g: &ProblemGraph) -> usize {
    let n = g.num_vertices();
    assert!(n <= 24, "brute force limited to 24 vertices");
    (0u64..1 << n)
        .map(|b| {
            g.edges()
                .iter()
                .filter(|&&(u, v)| (b >> u ^ b >> v) & 1 == 1)
                .count()
        })
        .max()
        .unwrap_or(0)
}

/// G(n, p): each unordered pair, visited in lexicographic order, is kept
/// independently with probability `p`.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<ProblemGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("edge probability {p} not in [0, 1]")));
    }
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let mut g = ProblemGraph::new(n, edges)?;
    g.seed = Some(seed);
    Ok(g)
}

/// Uniform `d`-regular graph by the pairing model with rejection.
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<ProblemGraph> {
    if (n * d) % 2 == 1 {
        return Err(Error::InvalidArgument(format!("n·d = {} is odd", n * d)));
    }
    if d >= n && !(n == 0 && d == 0) {
        return Err(Error::InvalidArgument(format!("degree {d} needs more than {n} vertices")));
    }
    let mut r = rng(seed);
    let mut points: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(d)).collect();
    'attempt: for _ in 0..REGULAR_ATTEMPTS {
        points.shuffle(&mut r);
        let mut set = BTreeSet::new();
        for pair in points.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u == v || !set.insert((u, v)) {
                continue 'attempt;
            }
        }
        let mut g = ProblemGraph::new(n, set)?;
        g.seed = Some(seed);
        return Ok(g);
    }
    Err(Error::BudgetExceeded(format!(
        "no simple {d}-regular pairing on {n} vertices after {REGULAR_ATTEMPTS} attempts"
    )))
}

/// Vertices are qubits, edges are the supports of two-qubit terms.
pub fn interaction_graph(h: &PauliSum) -> ProblemGraph {
    let mut edges = BTreeSet::new();
    for (_, p) in h.terms() {
        if let [u, v] = p.support()[..] {
            edges.insert((u, v));
        }
    }
    ProblemGraph::new(h.num_qubits(), edges).expect("supports are valid edges")
}

/// `H ⊗ I^{⊗m}` together with its effective factor.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedHamiltonian {
    pub effective: PauliSum,
    pub redundant_qubits: usize,
    pub full: PauliSum,
}

impl EmbeddedHamiltonian {
    pub fn num_qubits(&self) -> usize {
        self.full.num_qubits()
    }

    pub fn effective_qubits(&self) -> usize {
        self.effective.num_qubits()
    }
}

pub fn embed_identity(h: &PauliSum, m: usize) -> EmbeddedHamiltonian {
    EmbeddedHamiltonian {
        effective: h.clone(),
        redundant_qubits: m,
        full: h.padded(m),
    }
}

/// `Tr(H²) = 2^n Σ α_j²`.
pub fn trace_h_squared(h: &PauliSum) -> f64 {
    h.trace_h_squared()
}

/// `P†HP` in the coordinates of `basis`.
pub fn project_hamiltonian(h: &PauliSum, basis: &SubspaceBasis) -> Result<CMatrix> {
    basis.check_orthonormal(1e-10)?;
    if h.num_qubits() != basis.num_qubits() {
        return Err(Error::QubitMismatch {
            expected: basis.num_qubits(),
            found: h.num_qubits(),
        });
    }
    let images: Vec<_> = basis
        .columns()
        .iter()
        .map(|c| apply_sum_raw(h, c))
        .collect();
    let d = basis.dim();
    let mut out = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = crate::state::inner(&basis.columns()[i], &images[j]);
        }
    }
    Ok(out)
}

pub(crate) fn apply_sum_raw(
    h: &PauliSum,
    v: &[num_complex::Complex64],
) -> Vec<num_complex::Complex64> {
    let mut out = vec![num_complex::Complex64::new(0.0, 0.0); v.len()];
    for (c, p) in h.terms() {
        let x = p.x_mask() as usize;
        for (b, a) in v.iter().enumerate() {
            out[b ^ x] += p.coeff_on(b as u64) * a * *c;
        }
    }
    out
}
