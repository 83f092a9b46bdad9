use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonians::apply_sum_raw;
use crate::linalg::CMatrix;
use crate::pauli::{PauliString, PauliSum};
use crate::state::{inner, StateVector};

/// Default residual above which a new direction is accepted.
pub const CLOSURE_TOL: f64 = 1e-10;

/// Orthonormal columns spanning a subspace of the `2^n` register.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    num_qubits: usize,
    columns: Vec<Vec<Complex64>>,
}

impl SubspaceBasis {
    pub fn full(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        let columns = (0..dim)
            .map(|b| StateVector::basis(num_qubits, b).into_amplitudes())
            .collect();
        Self {
            num_qubits,
            columns,
        }
    }

    /// Validates orthonormality to `1e-10`.
    pub fn from_columns(num_qubits: usize, columns: Vec<Vec<Complex64>>) -> Result<Self> {
        let b = Self::from_columns_unchecked(num_qubits, columns);
        b.check_orthonormal(1e-10)?;
        Ok(b)
    }

    pub fn from_columns_unchecked(num_qubits: usize, columns: Vec<Vec<Complex64>>) -> Self {
        assert!(
            columns.iter().all(|c| c.len() == 1 << num_qubits),
            "column length must be 2^n"
        );
        Self {
            num_qubits,
            columns,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// `d_eff`.
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn parent_dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn columns(&self) -> &[Vec<Complex64>] {
        &self.columns
    }

    /// The `2^n × d` isometry `P`.
    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_columns(self.parent_dim(), &self.columns)
    }

    /// Largest deviation of `P†P` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.columns.iter().enumerate() {
            for (j, b) in self.columns.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((inner(a, b) - target).norm());
            }
        }
        worst
    }

    pub fn check_orthonormal(&self, tol: f64) -> Result<()> {
        let defect = self.orthonormality_defect();
        if defect > tol {
            return Err(Error::NotOrthonormal(defect));
        }
        Ok(())
    }

    /// Coordinates `P†v`.
    pub fn coordinates(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.columns.iter().map(|c| inner(c, v)).collect()
    }

    /// `P c`.
    pub fn lift(&self, coords: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.parent_dim()];
        for (c, col) in coords.iter().zip(&self.columns) {
            for (o, x) in out.iter_mut().zip(col) {
                *o += c * x;
            }
        }
        out
    }

    /// `‖(I - Π)v‖`.
    pub fn residual(&self, v: &[Complex64]) -> f64 {
        let back = self.lift(&self.coordinates(v));
        v.iter()
            .zip(&back)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest `‖(I - Π)G v‖` over generators and columns.
    pub fn leak(&self, generators: &[PauliSum]) -> f64 {
        generators
            .iter()
            .flat_map(|g| self.columns.iter().map(move |c| self.residual(&apply_sum_raw(g, c))))
            .fold(0.0, f64::max)
    }
}

/// Smallest subspace containing `seed` and closed under every generator.
pub fn invariant_subspace(
    generators: &[PauliString],
    seed: &StateVector,
    tol: f64,
) -> Result<SubspaceBasis> {
    let sums = generators
        .iter()
        .map(|g| PauliSum::from_string(g.clone()))
        .collect::<Result<Vec<_>>>()?;
    invariant_subspace_of_sums(&sums, seed, tol)
}

/// As [`invariant_subspace`], for generators that are Pauli sums (shared-parameter blocks).
pub fn invariant_subspace_of_sums(
    generators: &[PauliSum],
    seed: &StateVector,
    tol: f64,
) -> Result<SubspaceBasis> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("closure tolerance {tol} must be positive")));
    }
    let n = seed.num_qubits();
    if let Some(g) = generators.iter().find(|g| g.num_qubits() != n) {
        return Err(Error::QubitMismatch {
            expected: n,
            found: g.num_qubits(),
        });
    }
    let mut columns: Vec<Vec<Complex64>> = Vec::new();
    push_orthogonal(&mut columns, seed.amplitudes().to_vec(), tol);
    let mut next = 0;
    while next < columns.len() {
        for g in generators {
            if columns.len() == 1 << n {
                break;
            }
            let w = apply_sum_raw(g, &columns[next]);
            push_orthogonal(&mut columns, w, tol);
        }
        next += 1;
    }
    Ok(SubspaceBasis {
        num_qubits: n,
        columns,
    })
}

/// Modified Gram-Schmidt with one re-orthogonalisation pass.
fn push_orthogonal(columns: &mut Vec<Vec<Complex64>>, mut w: Vec<Complex64>, tol: f64) -> bool {
    for _ in 0..2 {
        for c in columns.iter() {
            let r = inner(c, &w);
            for (x, y) in w.iter_mut().zip(c) {
                *x -= r * y;
            }
        }
    }
    let norm = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm <= tol {
        return false;
    }
    for x in &mut w {
        *x /= norm;
    }
    columns.push(w);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::build_tfim;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn tfim_generators(n: usize) -> Vec<PauliString> {
        build_tfim(n, 1.0).unwrap().terms().iter().map(|(_, p)| p.clone()).collect()
    }

    #[test]
    fn small_examples() {
        let zero = StateVector::zero(1);
        assert_eq!(invariant_subspace(&[ps("Z")], &zero, CLOSURE_TOL).unwrap().dim(), 1);
        assert_eq!(invariant_subspace(&[ps("X")], &zero, CLOSURE_TOL).unwrap().dim(), 2);
        assert!(invariant_subspace(&[ps("X")], &zero, 0.0).is_err());
    }

    #[test]
    fn tfim_dimensions_from_zero_and_plus() {
        // |0…0> straddles both parity sectors of ∏X, |+…+> sits in one
        for n in 3..=6 {
            let g = tfim_generators(n);
            let p = invariant_subspace(&g, &StateVector::plus(n), CLOSURE_TOL).unwrap();
            assert_eq!(p.dim(), 1 << (n - 1));
            let z = invariant_subspace(&g, &StateVector::zero(n), CLOSURE_TOL).unwrap();
            assert_eq!(z.dim(), 1 << n);
            z.check_orthonormal(1e-10).unwrap();
            let sums: Vec<_> = g.iter().map(|p| PauliSum::from_string(p.clone()).unwrap()).collect();
            assert!(z.leak(&sums) < 1e-8);
        }
    }

    #[test]
    fn closure_is_order_independent() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for trial in 0..20 {
            let n = 3 + trial % 3;
            let mut g = tfim_generators(n);
            if trial % 2 == 1 {
                g.push(PauliString::single(n, 0, crate::pauli::Pauli::Y).unwrap());
            }
            let seed = StateVector::zero(n);
            let base = invariant_subspace(&g, &seed, CLOSURE_TOL).unwrap().dim();
            g.shuffle(&mut rng);
            assert_eq!(invariant_subspace(&g, &seed, CLOSURE_TOL).unwrap().dim(), base);
        }
    }

    #[test]
    fn residual_and_lift() {
        let b = invariant_subspace(&[ps("XI")], &StateVector::zero(2), CLOSURE_TOL).unwrap();
        let inside = StateVector::basis(2, 1);
        let outside = StateVector::basis(2, 2);
        assert!(b.residual(inside.amplitudes()) < 1e-15);
        assert!((b.residual(outside.amplitudes()) - 1.0).abs() < 1e-15);
        let c = b.coordinates(inside.amplitudes());
        assert!(StateVector::from_amplitudes(b.lift(&c)).unwrap().max_abs_diff(&inside) < 1e-15);
    }
}
