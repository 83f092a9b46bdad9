//! Pauli strings in symplectic (x, z) bitmask form and real-weighted sums of them.
//!
//! A [`PauliString`] stores `i^phase · ⊗_j σ_j` where `σ_j` is read off the
//! bit pair `(x_j, z_j)`: `(0,0) = I`, `(1,0) = X`, `(0,1) = Z`, `(1,1) = Y`.
//! Qubit 0 is the least-significant bit of basis-state labels, and the text
//! literal lists qubit 0 first (`"XIZ"` is `X` on qubit 0, `Z` on qubit 2).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Largest register a bitmask Pauli string can describe.
pub const MAX_QUBITS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    num_qubits: usize,
    x: u64,
    z: u64,
    /// Power of `i` in the global phase, always in `0..4`.
    phase: u8,
}

fn mask_for(num_qubits: usize) -> u64 {
    if num_qubits >= 64 {
        u64::MAX
    } else {
        (1u64 << num_qubits) - 1
    }
}

impl PauliString {
    pub fn identity(num_qubits: usize) -> Self {
        assert!(num_qubits <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        Self {
            num_qubits,
            x: 0,
            z: 0,
            phase: 0,
        }
    }

    pub fn from_masks(num_qubits: usize, x: u64, z: u64) -> Result<Self> {
        if num_qubits > MAX_QUBITS {
            return Err(Error::TooLarge {
                num_qubits,
                budget: MAX_QUBITS,
            });
        }
        let mask = mask_for(num_qubits);
        if (x | z) & !mask != 0 {
            return Err(Error::InvalidArgument(format!(
                "mask bits beyond qubit {}",
                num_qubits.saturating_sub(1)
            )));
        }
        Ok(Self {
            num_qubits,
            x,
            z,
            phase: 0,
        })
    }

    /// Single-qubit Pauli `p` on `qubit`, identity elsewhere.
    pub fn single(num_qubits: usize, qubit: usize, p: Pauli) -> Result<Self> {
        Self::from_sparse(num_qubits, &[(qubit, p)])
    }

    pub fn from_sparse(num_qubits: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        let mut s = Self::identity(num_qubits);
        for &(q, p) in ops {
            if q >= num_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    num_qubits,
                });
            }
            s.set(q, p);
        }
        Ok(s)
    }

    fn set(&mut self, qubit: usize, p: Pauli) {
        let (xb, zb) = p.bits();
        let bit = 1u64 << qubit;
        self.x = if xb { self.x | bit } else { self.x & !bit };
        self.z = if zb { self.z | bit } else { self.z & !bit };
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Phase as a power of `i`.
    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn with_phase(mut self, phase: u8) -> Self {
        self.phase = phase % 4;
        self
    }

    pub fn phase_factor(&self) -> Complex64 {
        i_pow(self.phase as u32)
    }

    pub fn pauli_at(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(self.x >> qubit & 1 == 1, self.z >> qubit & 1 == 1)
    }

    /// Qubits acted on non-trivially, ascending.
    pub fn support(&self) -> Vec<usize> {
        let s = self.x | self.z;
        (0..self.num_qubits).filter(|&q| s >> q & 1 == 1).collect()
    }

    pub fn support_mask(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase % 2 == 0
    }

    /// Same operator content with the phase dropped.
    pub fn unsigned(&self) -> Self {
        Self { phase: 0, ..*self }
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &PauliString) -> PauliString {
        debug_assert_eq!(self.num_qubits, other.num_qubits);
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        // i^{|x&z|} X^x Z^z form for each factor, then move Z^{z1} past X^{x2}.
        let k = self.phase as u32
            + other.phase as u32
            + (self.x & self.z).count_ones()
            + (other.x & other.z).count_ones()
            + 2 * (self.z & other.x).count_ones()
            + 3 * (x & z).count_ones();
        PauliString {
            num_qubits: self.num_qubits,
            x,
            z,
            phase: (k % 4) as u8,
        }
    }

    /// Amplitude map: `P|b> = coeff(b) |b ^ x>`.
    #[inline]
    pub(crate) fn coeff_on(&self, basis: u64) -> Complex64 {
        let k = self.phase as u32 + (self.x & self.z).count_ones() + 2 * (basis & self.z).count_ones();
        i_pow(k)
    }

    /// Relabel qubits: qubit `q` is sent to `perm[q]`.
    pub fn permuted(&self, perm: &[usize]) -> PauliString {
        let mut out = PauliString::identity(self.num_qubits).with_phase(self.phase);
        for q in self.support() {
            out.set(perm[q], self.pauli_at(q));
        }
        out
    }

    /// Extend to `num_qubits + extra` qubits with identity on the new ones.
    pub fn padded(&self, extra: usize) -> PauliString {
        PauliString {
            num_qubits: self.num_qubits + extra,
            ..*self
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        let dim = 1usize << self.num_qubits;
        let mut m = CMatrix::zeros(dim, dim);
        for b in 0..dim as u64 {
            m[((b ^ self.x) as usize, b as usize)] = self.coeff_on(b);
        }
        m
    }

    /// Literal with qubit 0 first, without phase.
    pub fn label(&self) -> String {
        (0..self.num_qubits).map(|q| self.pauli_at(q).as_char()).collect()
    }
}

#[inline]
pub(crate) fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "",
            1 => "i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{prefix}{}", self.label())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses `[+|-|i|-i]` followed by one of `IXYZ` per qubit.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (0, rest)
        } else {
            (0, s)
        };
        let n = body.chars().count();
        if n > MAX_QUBITS {
            return Err(Error::TooLarge {
                num_qubits: n,
                budget: MAX_QUBITS,
            });
        }
        let mut out = PauliString::identity(n).with_phase(phase);
        for (q, c) in body.chars().enumerate() {
            let p = match c {
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                other => return Err(Error::Parse(format!("bad Pauli character {other:?}"))),
            };
            out.set(q, p);
        }
        Ok(out)
    }
}

/// Real-weighted sum of Hermitian Pauli strings with unique `(x, z)` content.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    num_qubits: usize,
    terms: Vec<(f64, PauliString)>,
    index: HashMap<(u64, u64), usize>,
}

impl PauliSum {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            terms: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn from_terms<I>(num_qubits: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, PauliString)>,
    {
        let mut s = Self::new(num_qubits);
        for (c, p) in terms {
            s.add_term(c, p)?;
        }
        Ok(s)
    }

    pub fn from_string(p: PauliString) -> Result<Self> {
        Self::from_terms(p.num_qubits(), [(1.0, p)])
    }

    /// Adds `coeff · p`, folding a `-1` phase into the coefficient and merging
    /// with an existing term of the same content.
    pub fn add_term(&mut self, coeff: f64, p: PauliString) -> Result<()> {
        if p.num_qubits() != self.num_qubits {
            return Err(Error::QubitMismatch {
                expected: self.num_qubits,
                found: p.num_qubits(),
            });
        }
        if !p.is_hermitian() {
            return Err(Error::NonHermitian);
        }
        let c = if p.phase() == 2 { -coeff } else { coeff };
        let key = (p.x_mask(), p.z_mask());
        match self.index.get(&key) {
            Some(&i) => self.terms[i].0 += c,
            None => {
                self.index.insert(key, self.terms.len());
                self.terms.push((c, p.unsigned()));
            }
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, p: &PauliString) -> f64 {
        self.index
            .get(&(p.x_mask(), p.z_mask()))
            .map(|&i| self.terms[i].0)
            .unwrap_or(0.0)
    }

    /// Terms with non-zero coefficient and non-identity content.
    pub fn non_identity_terms(&self) -> impl Iterator<Item = &(f64, PauliString)> {
        self.terms
            .iter()
            .filter(|(c, p)| *c != 0.0 && !p.is_identity())
    }

    /// `Tr(H^2) = 2^n Σ α_j²` by orthogonality of Pauli strings.
    pub fn trace_h_squared(&self) -> f64 {
        let sq: f64 = self.terms.iter().map(|(c, _)| c * c).sum();
        sq * (self.num_qubits as f64).exp2()
    }

    /// `H ⊗ I^{⊗extra}`.
    pub fn padded(&self, extra: usize) -> PauliSum {
        let mut out = PauliSum::new(self.num_qubits + extra);
        for (c, p) in &self.terms {
            out.add_term(*c, p.padded(extra))
                .expect("padding preserves hermiticity");
        }
        out
    }

    pub fn permuted(&self, perm: &[usize]) -> PauliSum {
        let mut out = PauliSum::new(self.num_qubits);
        for (c, p) in &self.terms {
            out.add_term(*c, p.permuted(perm)).expect("hermitian");
        }
        out
    }

    /// True when both sums hold the same terms up to `tol` per coefficient.
    pub fn approx_eq(&self, other: &PauliSum, tol: f64) -> bool {
        if self.num_qubits != other.num_qubits {
            return false;
        }
        let close = |a: &PauliSum, b: &PauliSum| {
            a.terms
                .iter()
                .all(|(c, p)| (c - b.coefficient(p)).abs() <= tol)
        };
        close(self, other) && close(other, self)
    }

    pub fn to_dense(&self) -> CMatrix {
        let dim = 1usize << self.num_qubits;
        let mut m = CMatrix::zeros(dim, dim);
        for (c, p) in &self.terms {
            for b in 0..dim as u64 {
                m[((b ^ p.x_mask()) as usize, b as usize)] += p.coeff_on(b) * *c;
            }
        }
        m
    }

    /// True when every term is diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|(_, p)| p.x_mask() == 0)
    }
}
