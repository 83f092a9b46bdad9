//! Staged pruning of an over-parameterised ansatz.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ansatz::{build_hva, AnsatzDesign, GateSpec};
use crate::error::{Error, Result};
use crate::hamiltonians::EmbeddedHamiltonian;
use crate::pauli::{PauliString, PauliSum};
use crate::symmetry::{hamiltonian_automorphisms, AutomorphismGroup};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StageLabel {
    SP0,
    SP1,
    SP2,
    SP3,
}

impl StageLabel {
    pub const ALL: [StageLabel; 4] = [StageLabel::SP0, StageLabel::SP1, StageLabel::SP2, StageLabel::SP3];
}

impl fmt::Display for StageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for StageLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StageLabel::ALL
            .into_iter()
            .find(|l| l.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown stage {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PruneStage {
    pub label: StageLabel,
    pub ansatz: AnsatzDesign,
    pub removed_gate_count: usize,
    pub free_param_count: usize,
}

impl PruneStage {
    fn new(label: StageLabel, ansatz: AnsatzDesign, before: usize) -> Self {
        let after = ansatz.gates().count();
        Self {
            label,
            removed_gate_count: before.saturating_sub(after),
            free_param_count: ansatz.num_free_params(),
            ansatz,
        }
    }
}

/// Renumbers slots by first appearance.
fn compact_slots(num_qubits: usize, layers: Vec<Vec<GateSpec>>) -> Result<AnsatzDesign> {
    let mut map = HashMap::new();
    let layers = layers
        .into_iter()
        .map(|layer| {
            layer
                .into_iter()
                .map(|g| match g {
                    GateSpec::Rotation { generator, slot } => {
                        let next = map.len();
                        let slot = *map.entry(slot).or_insert(next);
                        GateSpec::Rotation { generator, slot }
                    }
                    other => other,
                })
                .collect()
        })
        .collect();
    AnsatzDesign::new(num_qubits, layers)
}

/// Drops every gate that touches one of the `m` redundant wires.
pub fn sp1_system_prune(a: &AnsatzDesign, h: &EmbeddedHamiltonian) -> Result<AnsatzDesign> {
    if a.num_qubits() != h.num_qubits() {
        return Err(Error::QubitMismatch {
            expected: h.num_qubits(),
            found: a.num_qubits(),
        });
    }
    let n = h.effective_qubits();
    let layers = a
        .layers()
        .iter()
        .map(|layer| {
            layer
                .iter()
                .filter(|g| g.wire_mask() >> n == 0)
                .cloned()
                .collect()
        })
        .collect();
    compact_slots(a.num_qubits(), layers)
}

/// Replaces every layer by one rotation per Hamiltonian term.
pub fn sp2_structure_prune(a: &AnsatzDesign, h: &PauliSum) -> Result<AnsatzDesign> {
    if a.num_qubits() != h.num_qubits() {
        return Err(Error::QubitMismatch {
            expected: h.num_qubits(),
            found: a.num_qubits(),
        });
    }
    build_hva(h, a.num_layers())
}

/// Canonical key of the orbit of `p` under `group`.
fn orbit_key(p: &PauliString, group: &AutomorphismGroup) -> (u64, u64) {
    group
        .elements
        .iter()
        .map(|perm| {
            let q = p.permuted(perm);
            (q.x_mask(), q.z_mask())
        })
        .min()
        .expect("group contains the identity")
}

/// Ties, within each layer, rotations whose generators are related by a
/// Hamiltonian automorphism. Gates of one slot are made contiguous when the
/// reordering only swaps commuting gates.
pub fn sp3_spatial_prune(a: &AnsatzDesign, h: &PauliSum) -> Result<AnsatzDesign> {
    if a.num_qubits() != h.num_qubits() {
        return Err(Error::QubitMismatch {
            expected: h.num_qubits(),
            found: a.num_qubits(),
        });
    }
    let group = hamiltonian_automorphisms(h)?;
    let mut next_slot = 0;
    let mut layers = Vec::with_capacity(a.num_layers());
    for layer in a.layers() {
        let mut local: HashMap<(u64, u64), usize> = HashMap::new();
        let mut tagged = Vec::with_capacity(layer.len());
        for g in layer {
            let GateSpec::Rotation { generator, .. } = g else {
                return Err(Error::InvalidArgument(
                    "spatial pruning expects a rotation-only (HVA form) ansatz".into(),
                ));
            };
            let key = orbit_key(generator, &group);
            let order = local.len();
            let group_idx = *local.entry(key).or_insert(order);
            tagged.push((group_idx, generator.clone()));
        }
        let mut sorted = tagged.clone();
        sorted.sort_by_key(|(k, _)| *k);
        let gens: Vec<&PauliString> = tagged.iter().map(|(_, g)| g).collect();
        let gates = if reorder_is_safe(&tagged, &gens) { sorted } else { tagged };
        let base = next_slot;
        next_slot += local.len();
        layers.push(
            gates
                .into_iter()
                .map(|(k, generator)| GateSpec::Rotation { generator, slot: base + k })
                .collect(),
        );
    }
    AnsatzDesign::new(a.num_qubits(), layers)
}

/// A stable sort by orbit index only moves gate `i` past gate `j` when
/// `key_i > key_j` and `i < j`; each such pair must commute.
fn reorder_is_safe(tagged: &[(usize, PauliString)], gens: &[&PauliString]) -> bool {
    (0..tagged.len()).all(|i| {
        (i + 1..tagged.len()).all(|j| tagged[i].0 <= tagged[j].0 || gens[i].commutes_with(gens[j]))
    })
}

/// `[SP0, SP1, SP2, SP3]` starting from `a`.
pub fn symmetric_prune(a: &AnsatzDesign, h: &EmbeddedHamiltonian) -> Result<Vec<PruneStage>> {
    let n0 = a.gates().count();
    let sp0 = PruneStage::new(StageLabel::SP0, a.clone(), n0);
    let s1 = sp1_system_prune(a, h)?;
    let sp1 = PruneStage::new(StageLabel::SP1, s1, n0);
    let s2 = sp2_structure_prune(&sp1.ansatz, &h.full)?;
    let sp2 = PruneStage::new(StageLabel::SP2, s2, sp1.ansatz.gates().count());
    let s3 = sp3_spatial_prune(&sp2.ansatz, &h.full)?;
    let sp3 = PruneStage::new(StageLabel::SP3, s3, sp2.ansatz.gates().count());
    Ok(vec![sp0, sp1, sp2, sp3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{build_hea, prepare_state, sample_params};
    use crate::hamiltonians::{build_maxcut, build_tfim, embed_identity, ProblemGraph};
    use crate::linalg::CMatrix;
    use crate::state::{unitary_of, StateVector};
    use num_complex::Complex64;
    use rand::SeedableRng;

    #[test]
    fn census_tfim_six_two() {
        let h = embed_identity(&build_tfim(6, 1.0).unwrap(), 2);
        let stages = symmetric_prune(&build_hea(8, 10).unwrap(), &h).unwrap();
        let per_layer: Vec<Vec<usize>> = stages.iter().map(|s| s.ansatz.params_per_layer()).collect();
        for (s, expect) in per_layer.iter().zip([48, 36, 11, 6]) {
            assert!(s.iter().all(|&k| k == expect), "{s:?}");
        }
        let totals: Vec<usize> = stages.iter().map(|s| s.free_param_count).collect();
        assert_eq!(totals, vec![480, 360, 110, 60]);
        let labels: Vec<String> = stages.iter().map(|s| s.label.to_string()).collect();
        assert_eq!(labels, ["SP0", "SP1", "SP2", "SP3"]);
    }

    #[test]
    fn sp1_examples() {
        let h0 = embed_identity(&build_tfim(4, 1.0).unwrap(), 0);
        let a = build_hea(4, 2).unwrap();
        assert_eq!(sp1_system_prune(&a, &h0).unwrap(), a);
        let h = embed_identity(&build_tfim(6, 1.0).unwrap(), 2);
        let p = sp1_system_prune(&build_hea(8, 3).unwrap(), &h).unwrap();
        assert_eq!(p.params_per_layer(), vec![36; 3]);
        assert!(p.gates().all(|g| g.wire_mask() >> 6 == 0));
        // odd pairs (0,1),(2,3),(4,5) and even pairs (1,2),(3,4) survive; (6,7) and (5,6) go
        assert_eq!(p.cnot_count(), 3 * 5);
    }

    fn random_unitary(m: usize, seed: u64) -> CMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = 1 << m;
        let mut cols: Vec<Vec<Complex64>> = Vec::new();
        while cols.len() < d {
            let mut v = StateVector::random(m, &mut rng).into_amplitudes();
            for _ in 0..2 {
                for c in &cols {
                    let r: Complex64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    v.iter_mut().zip(c).for_each(|(x, y)| *x -= r * y);
                }
            }
            let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= n);
            cols.push(v);
        }
        CMatrix::from_columns(d, &cols)
    }

    #[test]
    fn sp1_commutes_with_system_symmetries() {
        let (n, m) = (3, 2);
        let h = embed_identity(&build_tfim(n, 1.0).unwrap(), m);
        let a = sp1_system_prune(&build_hea(n + m, 2).unwrap(), &h).unwrap();
        let th = sample_params(&a, 5);
        let v = unitary_of(n + m, |s| {
            for g in a.gates() {
                g.apply(s, &th.values)?;
            }
            Ok(())
        })
        .unwrap();
        let dn = 1 << n;
        for seed in 0..10 {
            let u = random_unitary(m, seed);
            let d = 1 << (n + m);
            let mut s = CMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    if i % dn == j % dn {
                        s[(i, j)] = u[(i / dn, j / dn)];
                    }
                }
            }
            let lhs = s.matmul(&v).matmul(&s.adjoint());
            assert!(lhs.sub(&v).frobenius_norm() < 1e-10);
        }
    }

    #[test]
    fn sp2_examples() {
        let h = build_tfim(6, 1.0).unwrap();
        let a = sp2_structure_prune(&build_hea(6, 2).unwrap(), &h).unwrap();
        assert_eq!(a.params_per_layer(), vec![11, 11]);
        let mut got: Vec<String> = a.generator_set().iter().map(|p| p.label()).collect();
        let mut expect: Vec<String> = h.terms().iter().map(|(_, p)| p.label()).collect();
        got.sort();
        expect.sort();
        assert_eq!(got, expect);
        assert_eq!(sp2_structure_prune(&a, &h).unwrap(), a);
    }

    #[test]
    fn sp3_examples() {
        let h = build_tfim(6, 1.0).unwrap();
        let a = sp3_spatial_prune(&build_hva(&h, 2).unwrap(), &h).unwrap();
        assert_eq!(a.params_per_layer(), vec![6, 6]);
        let slots: Vec<Vec<String>> = a
            .slot_generators()
            .iter()
            .take(6)
            .map(|s| s.terms().iter().map(|(_, p)| p.label()).collect())
            .collect();
        assert_eq!(
            slots,
            vec![
                vec!["XIIIII", "IIIIIX"],
                vec!["IXIIII", "IIIIXI"],
                vec!["IIXIII", "IIIXII"],
                vec!["ZZIIII", "IIIIZZ"],
                vec!["IZZIII", "IIIZZI"],
                vec!["IIZZII"],
            ]
        );
        // asymmetric: a field on one end kills the reflection
        let mut hb = h.clone();
        hb.add_term(0.5, "ZIIIII".parse().unwrap()).unwrap();
        let hva = build_hva(&hb, 1).unwrap();
        assert_eq!(sp3_spatial_prune(&hva, &hb).unwrap().num_free_params(), hva.num_free_params());
        let k4 = build_maxcut(&ProblemGraph::complete(4)).unwrap();
        assert_eq!(sp3_spatial_prune(&build_hva(&k4, 3).unwrap(), &k4).unwrap().params_per_layer(), vec![1; 3]);
        assert!(sp3_spatial_prune(&build_hea(6, 1).unwrap(), &h).is_err());
    }

    #[test]
    fn sp3_sharing_follows_automorphisms() {
        let h = build_tfim(5, 1.0).unwrap();
        let group = hamiltonian_automorphisms(&h).unwrap();
        let a = sp3_spatial_prune(&build_hva(&h, 2).unwrap(), &h).unwrap();
        for layer in a.layers() {
            for g1 in layer {
                for g2 in layer {
                    let (p1, p2) = (g1.generator().unwrap(), g2.generator().unwrap());
                    let related = group.elements.iter().any(|pi| p1.permuted(pi) == *p2);
                    assert_eq!(g1.param_slot() == g2.param_slot(), related);
                }
            }
        }
    }

    #[test]
    fn sp3_preserves_circuit_at_tied_parameters() {
        let h = build_tfim(5, 1.0).unwrap();
        let sp2 = build_hva(&h, 2).unwrap();
        let sp3 = sp3_spatial_prune(&sp2, &h).unwrap();
        let th = sample_params(&sp3, 1);
        // the equivalent SP2 parameters copy each orbit's angle
        let mut tied = vec![0.0; sp2.num_free_params()];
        for (l, layer) in sp3.layers().iter().enumerate() {
            for g in layer {
                let gen = g.generator().unwrap();
                let pos = sp2.layers()[l].iter().position(|x| x.generator() == Some(gen)).unwrap();
                let slot = sp2.layers()[l][pos].param_slot().unwrap();
                tied[slot] = th.values[g.param_slot().unwrap()];
            }
        }
        let zero = StateVector::zero(5);
        let a = prepare_state(&sp3, &th, &zero).unwrap();
        let b = prepare_state(&sp2, &crate::ansatz::ParamVector::new(tied).unwrap(), &zero).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn asymmetric_unembedded_stages_coincide() {
        let g = ProblemGraph::new(6, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 4), (3, 5)]).unwrap();
        let hm = build_maxcut(&g).unwrap();
        assert_eq!(hamiltonian_automorphisms(&hm).unwrap().order(), 1);
        let stages = symmetric_prune(&build_hea(6, 2).unwrap(), &embed_identity(&hm, 0)).unwrap();
        assert_eq!(stages[0].ansatz, stages[1].ansatz);
        assert_eq!(stages[2].ansatz, stages[3].ansatz);
    }
}
