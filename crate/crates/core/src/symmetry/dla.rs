use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};

/// Default acceptance threshold for a new Lie direction.
pub const DLA_TOL: f64 = 1e-8;

/// Lie closure of a generator set.
///
/// Basis element `k` stands for the skew-Hermitian `i·basis[k]`. Elements are
/// orthonormal under `⟨A, B⟩ = Tr(A†B) / 2^n`, i.e. unit coefficient vectors.
#[derive(Clone, Debug, Serialize)]
pub struct DlaResult {
    pub dimension: usize,
    #[serde(skip)]
    pub basis: Vec<PauliSum>,
    pub capped: bool,
}

type Key = (u64, u64);
type Element = HashMap<Key, f64>;

fn dot(a: &Element, b: &Element) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .filter_map(|(k, x)| large.get(k).map(|y| x * y))
        .sum()
}

fn norm(a: &Element) -> f64 {
    a.values().map(|x| x * x).sum::<f64>().sqrt()
}

/// `i[A, B]` for Hermitian `A`, `B`; Hermitian again.
fn bracket(a: &Element, b: &Element, n: usize) -> Element {
    let mut out = Element::new();
    for (&(ax, az), &ca) in a {
        let p = PauliString::from_masks(n, ax, az).expect("valid masks");
        for (&(bx, bz), &cb) in b {
            let q = PauliString::from_masks(n, bx, bz).expect("valid masks");
            if p.commutes_with(&q) {
                continue;
            }
            // PQ = ±iR, so i[P, Q] = 2i·PQ = ∓2R
            let r = p.mul(&q);
            let sign = if r.phase() == 1 { -2.0 } else { 2.0 };
            *out.entry((r.x_mask(), r.z_mask())).or_insert(0.0) += sign * ca * cb;
        }
    }
    out.retain(|_, v| *v != 0.0);
    out
}

fn to_sum(e: &Element, n: usize) -> PauliSum {
    let mut keys: Vec<_> = e.keys().copied().collect();
    keys.sort_unstable();
    PauliSum::from_terms(
        n,
        keys.into_iter()
            .map(|(x, z)| (e[&(x, z)], PauliString::from_masks(n, x, z).expect("valid masks"))),
    )
    .expect("hermitian terms")
}

fn push_orthogonal(basis: &mut Vec<Element>, mut w: Element, tol: f64) -> bool {
    for _ in 0..2 {
        for b in basis.iter() {
            let r = dot(b, &w);
            if r != 0.0 {
                for (k, v) in b {
                    *w.entry(*k).or_insert(0.0) -= r * v;
                }
            }
        }
    }
    let nrm = norm(&w);
    if nrm <= tol {
        return false;
    }
    w.retain(|_, v| v.abs() > f64::EPSILON * nrm);
    w.values_mut().for_each(|v| *v /= nrm);
    basis.push(w);
    true
}

/// Span of all nested brackets of `{iG_k}`; stops at fixpoint or at `cap`.
pub fn dla_closure(generators: &[PauliSum], tol: f64, cap: usize) -> Result<DlaResult> {
    if generators.is_empty() {
        return Ok(DlaResult {
            dimension: 0,
            basis: Vec::new(),
            capped: false,
        });
    }
    if cap < generators.len() {
        return Err(Error::InvalidArgument(format!(
            "cap {cap} below generator count {}",
            generators.len()
        )));
    }
    let n = generators[0].num_qubits();
    let gens: Vec<Element> = generators
        .iter()
        .map(|g| {
            if g.num_qubits() != n {
                return Err(Error::QubitMismatch {
                    expected: n,
                    found: g.num_qubits(),
                });
            }
            Ok(g
                .non_identity_terms()
                .map(|(c, p)| ((p.x_mask(), p.z_mask()), *c))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut basis = Vec::new();
    for g in &gens {
        push_orthogonal(&mut basis, g.clone(), tol);
    }
    let mut capped = false;
    let mut next = 0;
    // right-nested brackets with generators span the whole algebra
    'outer: while next < basis.len() {
        for g in &gens {
            if basis.len() >= cap {
                capped = true;
                break 'outer;
            }
            let w = bracket(g, &basis[next], n);
            push_orthogonal(&mut basis, w, tol);
        }
        next += 1;
    }
    if capped {
        // hitting the cap exactly at the fixpoint is not truncation
        capped = !is_closed(&basis, &gens, n, tol);
    }
    Ok(DlaResult {
        dimension: basis.len(),
        basis: basis.iter().map(|e| to_sum(e, n)).collect(),
        capped,
    })
}

fn is_closed(basis: &[Element], gens: &[Element], n: usize, tol: f64) -> bool {
    let mut probe = basis.to_vec();
    basis
        .iter()
        .all(|b| gens.iter().all(|g| !push_orthogonal(&mut probe, bracket(g, b, n), tol)))
}

/// Maximal Lie dimension on `n` qubits, `4^n - 1`.
pub fn default_cap(num_qubits: usize) -> usize {
    (1usize << (2 * num_qubits)) - 1
}

/// Convenience for Pauli-string generators.
pub fn dla_of_strings(generators: &[PauliString], tol: f64, cap: usize) -> Result<DlaResult> {
    let sums = generators
        .iter()
        .map(|g| PauliSum::from_string(g.clone()))
        .collect::<Result<Vec<_>>>()?;
    dla_closure(&sums, tol, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::build_tfim;
    use crate::linalg::CMatrix;
    use num_complex::Complex64;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    /// Independent closure over dense skew-Hermitian matrices.
    fn dense_dla(gens: &[CMatrix], tol: f64) -> usize {
        let flat = |m: &CMatrix| -> Vec<f64> {
            m.as_slice().iter().flat_map(|z| [z.re, z.im]).collect()
        };
        let mut basis: Vec<(CMatrix, Vec<f64>)> = Vec::new();
        let add = |m: CMatrix, basis: &mut Vec<(CMatrix, Vec<f64>)>| {
            let mut v = flat(&m);
            for _ in 0..2 {
                for (_, b) in basis.iter() {
                    let r: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= r * y);
                }
            }
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > tol {
                v.iter_mut().for_each(|x| *x /= nrm);
                let data: Vec<Complex64> = v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
                let d = m.rows();
                let cols: Vec<Vec<Complex64>> =
                    (0..d).map(|j| (0..d).map(|i| data[i * d + j]).collect()).collect();
                basis.push((CMatrix::from_columns(d, &cols), v));
            }
        };
        for g in gens {
            add(g.clone(), &mut basis);
        }
        let mut i = 0;
        while i < basis.len() {
            for g in gens {
                let c = g.commutator(&basis[i].0);
                add(c, &mut basis);
            }
            i += 1;
        }
        basis.len()
    }

    #[test]
    fn small_examples() {
        let r = dla_of_strings(&[ps("X")], DLA_TOL, 3).unwrap();
        assert_eq!((r.dimension, r.capped), (1, false));
        let r = dla_of_strings(&[ps("X"), ps("Z")], DLA_TOL, 3).unwrap();
        assert_eq!((r.dimension, r.capped), (3, false));
        assert!(dla_of_strings(&[ps("X"), ps("Z")], DLA_TOL, 1).is_err());
    }

    #[test]
    fn basis_is_orthonormal_and_closed() {
        let gens: Vec<_> = build_tfim(4, 1.0).unwrap().terms().iter().map(|(_, p)| p.clone()).collect();
        let r = dla_of_strings(&gens, DLA_TOL, default_cap(4)).unwrap();
        assert_eq!(r.dimension, 4 * 7);
        for (i, a) in r.basis.iter().enumerate() {
            for (j, b) in r.basis.iter().enumerate() {
                let d: f64 = a.terms().iter().map(|(c, p)| c * b.coefficient(p)).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn matches_dense_closure() {
        let i = Complex64::new(0.0, 1.0);
        for n in 2..=3 {
            let h = build_tfim(n, 1.0).unwrap();
            let strings: Vec<_> = h.terms().iter().map(|(_, p)| p.clone()).collect();
            let dense: Vec<_> = strings.iter().map(|p| p.to_dense().scaled(i)).collect();
            let r = dla_of_strings(&strings, DLA_TOL, default_cap(n)).unwrap();
            assert_eq!(r.dimension, dense_dla(&dense, 1e-8), "n = {n}");
            // shared-parameter generators
            let xs = PauliSum::from_terms(n, h.terms().iter().filter(|(_, p)| p.weight() == 1).cloned()).unwrap();
            let zz = PauliSum::from_terms(n, h.terms().iter().filter(|(_, p)| p.weight() == 2).cloned()).unwrap();
            let r = dla_closure(&[xs.clone(), zz.clone()], DLA_TOL, default_cap(n)).unwrap();
            let dense = [xs.to_dense().scaled(i), zz.to_dense().scaled(i)];
            assert_eq!(r.dimension, dense_dla(&dense, 1e-8), "n = {n}");
        }
    }

    #[test]
    fn shared_tfim_dimension_is_n_squared() {
        for n in 3..=5 {
            let h = build_tfim(n, 1.0).unwrap();
            let xs = PauliSum::from_terms(n, h.terms().iter().filter(|(_, p)| p.weight() == 1).cloned()).unwrap();
            let zz = PauliSum::from_terms(n, h.terms().iter().filter(|(_, p)| p.weight() == 2).cloned()).unwrap();
            assert_eq!(dla_closure(&[xs, zz], DLA_TOL, default_cap(n)).unwrap().dimension, n * n);
        }
    }

    #[test]
    fn cap_is_reported() {
        let r = dla_of_strings(&[ps("XI"), ps("ZI"), ps("IX"), ps("IZ"), ps("ZZ")], DLA_TOL, 6).unwrap();
        assert!(r.capped);
        assert_eq!(r.dimension, 6);
        let full = dla_of_strings(&[ps("XI"), ps("ZI"), ps("IX"), ps("IZ"), ps("ZZ")], DLA_TOL, 15).unwrap();
        assert_eq!((full.dimension, full.capped), (15, false));
    }
}
