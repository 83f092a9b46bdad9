use std::fmt::Write as _;

use serde::Serialize;

use crate::ansatz::AnsatzDesign;
use crate::error::Result;
use crate::hamiltonians::project_hamiltonian;
use crate::linalg::hermitian_eigen;
use crate::state::exact_ground;
use crate::training::LossSpec;

use super::automorphism::hamiltonian_automorphisms;
use super::dla::{dla_closure, DLA_TOL};
use super::kernel::ansatz_subspace;
use super::subspace::SubspaceBasis;

/// Everything the symmetry analysis knows about one ansatz and Hamiltonian.
#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    pub num_qubits: usize,
    pub d_eff: usize,
    pub d_g: usize,
    pub dla_capped: bool,
    pub automorphism_order: usize,
    pub vertex_orbits: Vec<Vec<usize>>,
    pub edge_orbits: Vec<Vec<(usize, usize)>>,
    /// `‖(I - Π)|ψ*>‖` for the ground vector returned by the eigensolver.
    pub ground_residual: f64,
    /// Lowest eigenvalue of `H*` minus `E₀`; zero when the subspace reaches the ground energy.
    pub subspace_ground_gap: f64,
    #[serde(skip)]
    pub basis: SubspaceBasis,
}

/// Builds the report; `dla_cap` bounds the Lie closure, which is the slow part
/// for unpruned circuits.
pub fn symmetry_report(a: &AnsatzDesign, spec: &LossSpec, dla_cap: usize) -> Result<SymmetryReport> {
    let h = &spec.hamiltonian;
    let aut = hamiltonian_automorphisms(h)?;
    let basis = ansatz_subspace(a, spec)?;
    let dla = dla_closure(&a.closure_generators(), DLA_TOL, dla_cap)?;
    let (e0, ground) = exact_ground(h)?;
    let h_star = project_hamiltonian(h, &basis)?;
    let sub_e0 = hermitian_eigen(&h_star)?.values[0];
    Ok(SymmetryReport {
        num_qubits: a.num_qubits(),
        d_eff: basis.dim(),
        d_g: dla.dimension,
        dla_capped: dla.capped,
        automorphism_order: aut.order(),
        vertex_orbits: aut.vertex_orbits,
        edge_orbits: aut.edge_orbits,
        ground_residual: basis.residual(ground.amplitudes()),
        subspace_ground_gap: sub_e0 - e0,
        basis,
    })
}

impl SymmetryReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// `key: value` lines, one orbit per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "num_qubits: {}", self.num_qubits);
        let _ = writeln!(s, "d_eff: {}", self.d_eff);
        let _ = writeln!(s, "d_g: {}", self.d_g);
        let _ = writeln!(s, "dla_capped: {}", self.dla_capped);
        let _ = writeln!(s, "automorphism_order: {}", self.automorphism_order);
        for o in &self.vertex_orbits {
            let _ = writeln!(s, "vertex_orbit: {o:?}");
        }
        for o in &self.edge_orbits {
            let _ = writeln!(s, "edge_orbit: {o:?}");
        }
        let _ = writeln!(s, "ground_residual: {:e}", self.ground_residual);
        let _ = writeln!(s, "subspace_ground_gap: {:e}", self.subspace_ground_gap);
        s
    }
}
