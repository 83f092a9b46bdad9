use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::ansatz::{sample_params, AnsatzDesign, ParamVector};
use crate::error::{Error, Result};
use crate::hamiltonians::{apply_sum_raw, project_hamiltonian};
use crate::linalg::CMatrix;
use crate::pauli::PauliSum;
use crate::seed::derive_seed;
use crate::training::{residual_and_gradient, GradientMethod, LossSpec};

use super::subspace::{invariant_subspace_of_sums, SubspaceBasis, CLOSURE_TOL};

/// Largest tolerated `‖(I - Π)GP‖` or input-state leak.
pub const LEAK_TOL: f64 = 1e-8;

/// `Q = ‖∇ε‖²` (the residual gradient, not the loss gradient).
pub fn qntk(a: &AnsatzDesign, p: &ParamVector, spec: &LossSpec) -> Result<f64> {
    let (_, g) = residual_and_gradient(a, p, spec, GradientMethod::Adjoint)?;
    Ok(g.iter().map(|x| x * x).sum())
}

/// The kernel evaluated inside the coordinates of an invariant subspace.
///
/// Each block `b` (see [`AnsatzDesign::blocks`]) contributes
/// `⟨φ_b|i[G_b*, M_b*]|φ_b⟩`, where `φ_b` is the projected state after the
/// block and `M_b* = U*†_{>b} H* U*_{>b}`; contributions of one slot add up.
pub fn eqntk_projected(
    a: &AnsatzDesign,
    p: &ParamVector,
    spec: &LossSpec,
    basis: &SubspaceBasis,
) -> Result<f64> {
    a.check_params(p)?;
    let input = spec.input_state();
    let leak = basis.residual(input.amplitudes());
    if leak > LEAK_TOL {
        return Err(Error::SubspaceLeak(leak));
    }
    let blocks = a.blocks();
    let mut gens = Vec::with_capacity(blocks.len());
    for b in &blocks {
        let leak = basis.leak(std::slice::from_ref(&b.generator));
        if leak > LEAK_TOL {
            return Err(Error::SubspaceLeak(leak));
        }
        gens.push(project_sum(&b.generator, basis));
    }
    let h_star = project_hamiltonian(&spec.hamiltonian, basis)?;
    let gates: Vec<_> = a.gates().collect();
    // block unitaries P† U_b P, built column by column in the full register
    let units: Vec<CMatrix> = blocks
        .iter()
        .map(|b| {
            let cols: Vec<Vec<Complex64>> = basis
                .columns()
                .iter()
                .map(|c| {
                    let mut s = crate::state::StateVector::from_amplitudes(c.clone())?;
                    for g in &gates[b.start..b.end] {
                        g.apply(&mut s, &p.values)?;
                    }
                    Ok(basis.coordinates(s.amplitudes()))
                })
                .collect::<Result<_>>()?;
            Ok(CMatrix::from_columns(basis.dim(), &cols))
        })
        .collect::<Result<_>>()?;
    let mut phis = Vec::with_capacity(blocks.len());
    let mut phi = basis.coordinates(input.amplitudes());
    for u in &units {
        phi = u.matvec(&phi);
        phis.push(phi.clone());
    }
    let mut d = vec![0.0; a.num_free_params()];
    let mut m = h_star;
    for k in (0..blocks.len()).rev() {
        if let Some(slot) = blocks[k].slot {
            let c = gens[k].commutator(&m);
            let v = c.matvec(&phis[k]);
            let val: Complex64 = phis[k].iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            // i⟨φ|[G, M]|φ> is real because [G, M] is anti-Hermitian
            d[slot] += -val.im;
        }
        m = units[k].adjoint().matmul(&m).matmul(&units[k]);
    }
    Ok(d.iter().map(|x| x * x).sum())
}

fn project_sum(g: &PauliSum, basis: &SubspaceBasis) -> CMatrix {
    let cols: Vec<Vec<Complex64>> = basis
        .columns()
        .iter()
        .map(|c| basis.coordinates(&apply_sum_raw(g, c)))
        .collect();
    CMatrix::from_columns(basis.dim(), &cols)
}

/// Smallest subspace containing the loss input and closed under the ansatz blocks.
pub fn ansatz_subspace(a: &AnsatzDesign, spec: &LossSpec) -> Result<SubspaceBasis> {
    invariant_subspace_of_sums(&a.closure_generators(), &spec.input_state(), CLOSURE_TOL)
}

fn qbar(num_params: usize, trace_h2: f64, dim: f64) -> f64 {
    num_params as f64 * trace_h2 / (dim * dim)
}

/// `LK · Tr(H²) / 4^n`.
pub fn theory_qbar(num_params: usize, h: &PauliSum) -> f64 {
    qbar(num_params, h.trace_h_squared(), (h.num_qubits() as f64).exp2())
}

/// `Tr(A²)` and `Tr(A⁴)` of a Hermitian matrix.
pub fn trace_powers(h_star: &CMatrix) -> (f64, f64) {
    let sum_sq = |m: &CMatrix| m.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>();
    (sum_sq(h_star), sum_sq(&h_star.matmul(h_star)))
}

fn check_dim(h_star: &CMatrix, d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidArgument("effective dimension must be positive".into()));
    }
    if h_star.rows() != h_star.cols() {
        return Err(Error::InvalidArgument("projected Hamiltonian must be square".into()));
    }
    Ok(())
}

/// `LK · Tr(H*²) / d_eff²`; `h_star` must be `d_eff × d_eff`.
pub fn theory_qbar_s(num_params: usize, h_star: &CMatrix, d_eff: usize) -> Result<f64> {
    check_dim(h_star, d_eff)?;
    if h_star.rows() != d_eff {
        return Err(Error::InvalidArgument(format!(
            "projected Hamiltonian is {}×{}, expected {d_eff}×{d_eff}",
            h_star.rows(),
            h_star.cols()
        )));
    }
    Ok(qbar(num_params, trace_powers(h_star).0, d_eff as f64))
}

/// `LK · Tr(H*²) / d_g²`, with the Lie dimension in place of `d_eff`.
pub fn theory_qbar_dla(num_params: usize, h_star: &CMatrix, d_g: usize) -> Result<f64> {
    check_dim(h_star, d_g)?;
    Ok(qbar(num_params, trace_powers(h_star).0, d_g as f64))
}

/// Leading-order standard deviation `ΔQ` with
/// `ΔQ² = LK/d⁴ · (8 Tr²(H*²) + 12 Tr(H*⁴))`.
pub fn theory_fluctuation(num_params: usize, h_star: &CMatrix, d_eff: usize) -> Result<f64> {
    check_dim(h_star, d_eff)?;
    let (t2, t4) = trace_powers(h_star);
    let d4 = (d_eff as f64).powi(4);
    Ok((num_params as f64 / d4 * (8.0 * t2 * t2 + 12.0 * t4)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelSamples {
    pub mean: f64,
    pub std_dev: f64,
    pub samples: Vec<f64>,
}

/// `Q` at `trials` uniform draws; trial `i` uses seed `derive(seed, i)`.
pub fn monte_carlo_kernel(
    a: &AnsatzDesign,
    spec: &LossSpec,
    trials: usize,
    seed: u64,
) -> Result<KernelSamples> {
    if trials < 2 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least two trials".into()));
    }
    let samples = (0..trials)
        .into_par_iter()
        .map(|i| qntk(a, &sample_params(a, derive_seed(seed, &[i as u64])), spec))
        .collect::<Result<Vec<f64>>>()?;
    let n = trials as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(KernelSamples {
        mean,
        std_dev: var.sqrt(),
        samples,
    })
}

/// Kernel value at one parameter point next to the subspace theory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelReport {
    pub q_value: f64,
    pub theory_mean: f64,
    pub theory_fluctuation: f64,
    pub num_params: usize,
    pub d_eff: usize,
}

pub fn kernel_report(a: &AnsatzDesign, p: &ParamVector, spec: &LossSpec) -> Result<KernelReport> {
    let basis = ansatz_subspace(a, spec)?;
    let h_star = project_hamiltonian(&spec.hamiltonian, &basis)?;
    let k = a.num_free_params();
    Ok(KernelReport {
        q_value: qntk(a, p, spec)?,
        theory_mean: theory_qbar_s(k, &h_star, basis.dim())?,
        theory_fluctuation: theory_fluctuation(k, &h_star, basis.dim())?,
        num_params: k,
        d_eff: basis.dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{build_hea, build_hva, GateSpec};
    use crate::hamiltonians::{build_tfim, embed_identity};
    use crate::pauli::PauliString;
    use crate::pruning::{sp3_spatial_prune, symmetric_prune};
    use crate::training::{gradient, InputState};

    fn one_gate() -> (AnsatzDesign, LossSpec) {
        let x: PauliString = "X".parse().unwrap();
        let a = AnsatzDesign::new(1, vec![vec![GateSpec::Rotation { generator: x, slot: 0 }]]).unwrap();
        let spec = LossSpec::ground(&PauliSum::from_string("Z".parse().unwrap()).unwrap()).unwrap();
        (a, spec)
    }

    #[test]
    fn qntk_examples() {
        let (a, spec) = one_gate();
        for th in [-0.7, 0.2, 1.0] {
            let q = qntk(&a, &ParamVector::new(vec![th]).unwrap(), &spec).unwrap();
            assert!((q - 4.0 * (2.0 * th).sin().powi(2)).abs() < 1e-13);
        }
        // ZZ-only generators commute with a diagonal Hamiltonian
        let h = build_tfim(3, 0.0).unwrap();
        let a = build_hva(&h, 2).unwrap();
        let spec = LossSpec::ground(&h).unwrap().with_input(InputState::Plus(3));
        assert!(qntk(&a, &sample_params(&a, 3), &spec).unwrap().abs() < 1e-20);
    }

    #[test]
    fn qntk_is_loss_gradient_over_residual() {
        let h = build_tfim(3, 1.0).unwrap();
        let a = build_hea(3, 1).unwrap();
        let spec = LossSpec::ground(&h).unwrap();
        for s in 0..5 {
            let th = sample_params(&a, s);
            let eps = crate::training::residual(&a, &th, &spec).unwrap();
            let g = gradient(&a, &th, &spec).unwrap();
            let q = g.iter().map(|x| (x / eps).powi(2)).sum::<f64>();
            assert!((q - qntk(&a, &th, &spec).unwrap()).abs() < 1e-10 * q.max(1.0));
        }
    }

    #[test]
    fn eqntk_full_space_equals_qntk() {
        let h = build_tfim(3, 1.0).unwrap();
        let a = build_hea(3, 2).unwrap();
        let spec = LossSpec::ground(&h).unwrap();
        let full = SubspaceBasis::full(3);
        for s in 0..5 {
            let th = sample_params(&a, s);
            let q = qntk(&a, &th, &spec).unwrap();
            assert!((eqntk_projected(&a, &th, &spec, &full).unwrap() - q).abs() < 1e-10);
        }
    }

    #[test]
    fn eqntk_on_sp3_subspace_equals_qntk() {
        for (n, input) in [(3, InputState::Zero), (4, InputState::Plus(4))] {
            let h = build_tfim(n, 1.0).unwrap();
            let a = sp3_spatial_prune(&build_hva(&h, 3).unwrap(), &h).unwrap();
            let spec = LossSpec::ground(&h).unwrap().with_input(input);
            let basis = ansatz_subspace(&a, &spec).unwrap();
            assert!(basis.dim() < 1 << n);
            for s in 0..10 {
                let th = sample_params(&a, s);
                let q = qntk(&a, &th, &spec).unwrap();
                assert!((eqntk_projected(&a, &th, &spec, &basis).unwrap() - q).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn eqntk_detects_leaks() {
        let h = build_tfim(3, 1.0).unwrap();
        let sp3 = sp3_spatial_prune(&build_hva(&h, 1).unwrap(), &h).unwrap();
        let spec = LossSpec::ground(&h).unwrap();
        let basis = ansatz_subspace(&sp3, &spec).unwrap();
        let hea = build_hea(3, 1).unwrap();
        let r = eqntk_projected(&hea, &sample_params(&hea, 0), &spec, &basis);
        assert!(matches!(r, Err(Error::SubspaceLeak(_))));
    }

    #[test]
    fn theory_examples() {
        let h = build_tfim(2, 1.0).unwrap();
        assert_eq!(theory_qbar(0, &h), 0.0);
        assert_eq!(theory_qbar(12, &h), 9.0);
        assert_eq!(theory_qbar(24, &h), 2.0 * theory_qbar(12, &h));
        for n in 2..=4 {
            let h = build_tfim(n, 1.0).unwrap();
            let k = 7 * n;
            assert_eq!(theory_qbar_s(k, &h.to_dense(), 1 << n).unwrap(), theory_qbar(k, &h));
        }
        let hd = h.to_dense();
        assert_eq!(theory_qbar_s(10, &hd, 4).unwrap() * 2.0, theory_qbar_s(20, &hd, 4).unwrap());
        assert!(theory_qbar_s(10, &hd, 0).is_err());
        assert!(theory_qbar_s(10, &hd, 3).is_err());
        assert_eq!(theory_fluctuation(0, &hd, 4).unwrap(), 0.0);
        // relative fluctuation ∝ 1/√LK
        let r = |k| theory_fluctuation(k, &hd, 4).unwrap() / theory_qbar_s(k, &hd, 4).unwrap();
        assert!((r(100) / r(400) - 2.0).abs() < 1e-12);
        assert_eq!(theory_qbar_dla(4, &hd, 2).unwrap(), 4.0 * theory_qbar_s(4, &hd, 4).unwrap());
    }

    #[test]
    fn monte_carlo_examples() {
        let h = build_tfim(3, 1.0).unwrap();
        let a = build_hea(3, 1).unwrap();
        let spec = LossSpec::ground(&h).unwrap();
        assert_eq!(monte_carlo_kernel(&a, &spec, 2, 7).unwrap(), monte_carlo_kernel(&a, &spec, 2, 7).unwrap());
        assert!(monte_carlo_kernel(&a, &spec, 1, 7).is_err());
        let hz = build_tfim(3, 0.0).unwrap();
        let az = build_hva(&hz, 2).unwrap();
        let sz = LossSpec::ground(&hz).unwrap();
        let mc = monte_carlo_kernel(&az, &sz, 5, 1).unwrap();
        assert_eq!((mc.mean, mc.std_dev), (0.0, 0.0));
    }

    #[test]
    fn report_and_stage_dimensions() {
        let h = embed_identity(&build_tfim(4, 1.0).unwrap(), 1);
        let stages = symmetric_prune(&build_hea(5, 2).unwrap(), &h).unwrap();
        let spec = LossSpec::ground(&h.full).unwrap();
        let dims: Vec<usize> = stages
            .iter()
            .skip(1)
            .map(|s| ansatz_subspace(&s.ansatz, &spec).unwrap().dim())
            .collect();
        assert!(dims.windows(2).all(|w| w[1] <= w[0]), "{dims:?}");
        let r = kernel_report(&stages[3].ansatz, &sample_params(&stages[3].ansatz, 0), &spec).unwrap();
        assert_eq!(r.d_eff, dims[2]);
        assert!(r.q_value >= 0.0 && r.theory_mean > 0.0);
    }
}
