//! Dense statevectors and the gate primitives used by every circuit.
//!
//! Basis label `b` has qubit `q` in state `(b >> q) & 1`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix};
use crate::pauli::{PauliString, PauliSum};

/// Largest register simulated densely.
pub const MAX_STATE_QUBITS: usize = 24;
/// Largest register handed to the dense eigensolver.
pub const MAX_DIAG_QUBITS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0>`.
    pub fn zero(num_qubits: usize) -> Self {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, label: usize) -> Self {
        assert!(num_qubits <= MAX_STATE_QUBITS, "register too large");
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[label] = Complex64::new(1.0, 0.0);
        Self {
            num_qubits,
            amplitudes,
        }
    }

    /// `|+>^{⊗n}`.
    pub fn plus(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        let a = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        Self {
            num_qubits,
            amplitudes: vec![a; dim],
        }
    }

    /// Wraps amplitudes; the length must be a power of two. No normalisation.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude count {dim} is not a power of two"
            )));
        }
        Ok(Self {
            num_qubits: dim.trailing_zeros() as usize,
            amplitudes,
        })
    }

    /// Haar-random pure state.
    pub fn random<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> Self {
        let dim = 1usize << num_qubits;
        let amplitudes = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let mut s = Self {
            num_qubits,
            amplitudes,
        };
        s.normalize();
        s
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amplitudes {
                *a /= n;
            }
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// `self ⊗ other`, with `self` on the low qubits.
    pub fn tensor(&self, high: &StateVector) -> StateVector {
        let mut amplitudes = Vec::with_capacity(self.dim() * high.dim());
        for h in &high.amplitudes {
            for l in &self.amplitudes {
                amplitudes.push(l * h);
            }
        }
        StateVector {
            num_qubits: self.num_qubits + high.num_qubits,
            amplitudes,
        }
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn check_qubits(&self, n: usize) -> Result<()> {
        if n != self.num_qubits {
            return Err(Error::QubitMismatch {
                expected: self.num_qubits,
                found: n,
            });
        }
        Ok(())
    }

    /// `|ψ> <- P|ψ>`.
    pub fn apply_pauli_in_place(&mut self, p: &PauliString) -> Result<()> {
        self.check_qubits(p.num_qubits())?;
        let x = p.x_mask();
        if x == 0 {
            for (b, a) in self.amplitudes.iter_mut().enumerate() {
                *a *= p.coeff_on(b as u64);
            }
        } else {
            let low = 1u64 << (63 - x.leading_zeros());
            for b in 0..self.dim() as u64 {
                if b & low != 0 {
                    continue;
                }
                let b2 = b ^ x;
                let (i, j) = (b as usize, b2 as usize);
                let ai = self.amplitudes[i];
                let aj = self.amplitudes[j];
                self.amplitudes[j] = p.coeff_on(b) * ai;
                self.amplitudes[i] = p.coeff_on(b2) * aj;
            }
        }
        Ok(())
    }

    /// `|ψ> <- e^{-iθP}|ψ> = cos θ |ψ> - i sin θ P|ψ>`; needs `P² = I`.
    pub fn rotate_in_place(&mut self, p: &PauliString, theta: f64) -> Result<()> {
        self.check_qubits(p.num_qubits())?;
        if !p.is_hermitian() {
            return Err(Error::NonHermitian);
        }
        let (s, c) = theta.sin_cos();
        let ms = Complex64::new(0.0, -s);
        let x = p.x_mask();
        if x == 0 {
            for (b, a) in self.amplitudes.iter_mut().enumerate() {
                *a *= c + ms * p.coeff_on(b as u64);
            }
        } else {
            let low = 1u64 << (63 - x.leading_zeros());
            for b in 0..self.dim() as u64 {
                if b & low != 0 {
                    continue;
                }
                let b2 = b ^ x;
                let (i, j) = (b as usize, b2 as usize);
                let ai = self.amplitudes[i];
                let aj = self.amplitudes[j];
                self.amplitudes[i] = ai * c + ms * p.coeff_on(b2) * aj;
                self.amplitudes[j] = aj * c + ms * p.coeff_on(b) * ai;
            }
        }
        Ok(())
    }

    pub fn cnot_in_place(&mut self, control: usize, target: usize) -> Result<()> {
        for q in [control, target] {
            if q >= self.num_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    num_qubits: self.num_qubits,
                });
            }
        }
        if control == target {
            return Err(Error::SameControlTarget(control));
        }
        let (cb, tb) = (1usize << control, 1usize << target);
        for b in 0..self.dim() {
            if b & cb != 0 && b & tb == 0 {
                self.amplitudes.swap(b, b | tb);
            }
        }
        Ok(())
    }

    /// `H|ψ>` for a Pauli sum (not normalised).
    pub fn apply_sum(&self, h: &PauliSum) -> Result<StateVector> {
        self.check_qubits(h.num_qubits())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (c, p) in h.terms() {
            let x = p.x_mask();
            for (b, a) in self.amplitudes.iter().enumerate() {
                out[b ^ x as usize] += p.coeff_on(b as u64) * a * *c;
            }
        }
        Ok(StateVector {
            num_qubits: self.num_qubits,
            amplitudes: out,
        })
    }
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}


/// `P|ψ>`.
pub fn apply_pauli_string(state: &StateVector, p: &PauliString) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply_pauli_in_place(p)?;
    Ok(out)
}

/// `e^{-iθP}|ψ>` (no factor ½ in the exponent).
pub fn apply_pauli_rotation(state: &StateVector, p: &PauliString, theta: f64) -> Result<StateVector> {
    let mut out = state.clone();
    out.rotate_in_place(p, theta)?;
    Ok(out)
}

pub fn apply_cnot(state: &StateVector, control: usize, target: usize) -> Result<StateVector> {
    let mut out = state.clone();
    out.cnot_in_place(control, target)?;
    Ok(out)
}

/// `<ψ|H|ψ>`; fails if the imaginary residue exceeds `1e-8`.
pub fn expectation(state: &StateVector, h: &PauliSum) -> Result<f64> {
    state.check_qubits(h.num_qubits())?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (c, p) in h.terms() {
        let x = p.x_mask() as usize;
        let mut t = Complex64::new(0.0, 0.0);
        for (b, a) in state.amplitudes.iter().enumerate() {
            t += state.amplitudes[b ^ x].conj() * p.coeff_on(b as u64) * a;
        }
        acc += t * *c;
    }
    if acc.im.abs() > 1e-8 {
        return Err(Error::ImaginaryExpectation(acc.im));
    }
    Ok(acc.re)
}

/// Minimum eigenvalue and a unit eigenvector of `h`.
pub fn exact_ground(h: &PauliSum) -> Result<(f64, StateVector)> {
    let n = h.num_qubits();
    if h.is_diagonal() && n <= MAX_STATE_QUBITS {
        let (label, energy) = diagonal_energies(h)
            .into_iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (b, e)| if e < best.1 { (b, e) } else { best });
        return Ok((energy, StateVector::basis(n, label)));
    }
    if n > MAX_DIAG_QUBITS {
        return Err(Error::TooLarge {
            num_qubits: n,
            budget: MAX_DIAG_QUBITS,
        });
    }
    let eig = hermitian_eigen(&h.to_dense())?;
    let v = StateVector::from_amplitudes(eig.vector(0))?;
    Ok((eig.values[0], v))
}

/// Diagonal of a diagonal Pauli sum, summed term by term so that integer
/// spectra stay exact.
pub fn diagonal_energies(h: &PauliSum) -> Vec<f64> {
    let dim = 1usize << h.num_qubits();
    (0..dim as u64)
        .map(|b| {
            h.terms()
                .iter()
                .map(|(c, p)| if (b & p.z_mask()).count_ones() % 2 == 0 { *c } else { -c })
                .sum()
        })
        .collect()
}

/// Full spectrum of `h`, ascending.
pub fn spectrum(h: &PauliSum) -> Result<Vec<f64>> {
    let n = h.num_qubits();
    if n > MAX_DIAG_QUBITS {
        return Err(Error::TooLarge {
            num_qubits: n,
            budget: MAX_DIAG_QUBITS,
        });
    }
    Ok(hermitian_eigen(&h.to_dense())?.values)
}

/// Dense unitary of a state map, built column by column from basis states.
pub fn unitary_of<F>(num_qubits: usize, mut circuit: F) -> Result<CMatrix>
where
    F: FnMut(&mut StateVector) -> Result<()>,
{
    let dim = 1usize << num_qubits;
    let mut cols = Vec::with_capacity(dim);
    for b in 0..dim {
        let mut s = StateVector::basis(num_qubits, b);
        circuit(&mut s)?;
        cols.push(s.into_amplitudes());
    }
    Ok(CMatrix::from_columns(dim, &cols))
}
