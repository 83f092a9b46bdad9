//! Symmetry structure of an ansatz and the kernel predictions built on it.

mod automorphism;
mod dla;
mod kernel;
mod report;
mod subspace;

pub use automorphism::{
    compose, graph_automorphisms, hamiltonian_automorphisms, inverse, AutomorphismGroup,
    MAX_GROUP_ORDER, MAX_VERTICES,
};
pub use dla::{default_cap, dla_closure, dla_of_strings, DlaResult, DLA_TOL};
pub use kernel::{
    ansatz_subspace, eqntk_projected, kernel_report, monte_carlo_kernel, qntk, theory_fluctuation,
    theory_qbar, theory_qbar_dla, theory_qbar_s, trace_powers, KernelReport, KernelSamples,
    LEAK_TOL,
};
pub use report::{symmetry_report, SymmetryReport};
pub use subspace::{invariant_subspace, invariant_subspace_of_sums, SubspaceBasis, CLOSURE_TOL};
