//! Layered Pauli-rotation circuits with explicit parameter sharing.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};
use crate::seed::rng;
use crate::state::StateVector;

/// One gate: a rotation `e^{-iθP}` bound to a parameter slot, or a fixed CNOT.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GateSpec {
    Rotation { generator: PauliString, slot: usize },
    Cnot { control: usize, target: usize },
}

impl GateSpec {
    pub fn param_slot(&self) -> Option<usize> {
        match self {
            GateSpec::Rotation { slot, .. } => Some(*slot),
            GateSpec::Cnot { .. } => None,
        }
    }

    pub fn generator(&self) -> Option<&PauliString> {
        match self {
            GateSpec::Rotation { generator, .. } => Some(generator),
            GateSpec::Cnot { .. } => None,
        }
    }

    pub fn wire_mask(&self) -> u64 {
        match self {
            GateSpec::Rotation { generator, .. } => generator.support_mask(),
            GateSpec::Cnot { control, target } => (1 << control) | (1 << target),
        }
    }

    pub fn wire_support(&self) -> Vec<usize> {
        let m = self.wire_mask();
        (0..64).filter(|q| m >> q & 1 == 1).collect()
    }

    pub fn apply(&self, state: &mut StateVector, params: &[f64]) -> Result<()> {
        match self {
            GateSpec::Rotation { generator, slot } => state.rotate_in_place(generator, params[*slot]),
            GateSpec::Cnot { control, target } => state.cnot_in_place(*control, *target),
        }
    }

    /// Applies the inverse gate.
    pub fn apply_inverse(&self, state: &mut StateVector, params: &[f64]) -> Result<()> {
        match self {
            GateSpec::Rotation { generator, slot } => state.rotate_in_place(generator, -params[*slot]),
            GateSpec::Cnot { control, target } => state.cnot_in_place(*control, *target),
        }
    }
}

/// Free parameters `θ`, in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite parameter {v}")));
        }
        Ok(Self { values })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// `U(θ) = U_L(θ_L) ⋯ U_1(θ_1)`; layers and the gates inside them apply in order.
#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzDesign {
    num_qubits: usize,
    layers: Vec<Vec<GateSpec>>,
    num_free_params: usize,
    generator_set: Vec<PauliString>,
}

impl AnsatzDesign {
    /// Validates the gates and checks that every slot in `0..k` is used.
    pub fn new(num_qubits: usize, layers: Vec<Vec<GateSpec>>) -> Result<Self> {
        let mut max_slot = None;
        let mut used = HashSet::new();
        let mut seen = HashSet::new();
        let mut generator_set = Vec::new();
        for gate in layers.iter().flatten() {
            match gate {
                GateSpec::Rotation { generator, slot } => {
                    if generator.num_qubits() != num_qubits {
                        return Err(Error::QubitMismatch {
                            expected: num_qubits,
                            found: generator.num_qubits(),
                        });
                    }
                    if generator.phase() != 0 || generator.is_identity() {
                        return Err(Error::InvalidArgument(format!(
                            "rotation generator {generator} must be a non-identity string with phase +1"
                        )));
                    }
                    used.insert(*slot);
                    max_slot = max_slot.max(Some(*slot));
                    if seen.insert((generator.x_mask(), generator.z_mask())) {
                        generator_set.push(generator.clone());
                    }
                }
                GateSpec::Cnot { control, target } => {
                    for q in [*control, *target] {
                        if q >= num_qubits {
                            return Err(Error::QubitOutOfRange {
                                index: q,
                                num_qubits,
                            });
                        }
                    }
                    if control == target {
                        return Err(Error::SameControlTarget(*control));
                    }
                }
            }
        }
        let num_free_params = max_slot.map_or(0, |s| s + 1);
        if used.len() != num_free_params {
            return Err(Error::InvalidArgument(format!(
                "slots must cover 0..{num_free_params} without gaps"
            )));
        }
        Ok(Self {
            num_qubits,
            layers,
            num_free_params,
            generator_set,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Vec<GateSpec>] {
        &self.layers
    }

    pub fn gates(&self) -> impl DoubleEndedIterator<Item = &GateSpec> + Clone {
        self.layers.iter().flatten()
    }

    pub fn num_free_params(&self) -> usize {
        self.num_free_params
    }

    /// Distinct rotation generators in order of first appearance.
    pub fn generator_set(&self) -> &[PauliString] {
        &self.generator_set
    }

    pub fn rotation_count(&self) -> usize {
        self.gates().filter(|g| g.param_slot().is_some()).count()
    }

    pub fn cnot_count(&self) -> usize {
        self.gates().count() - self.rotation_count()
    }

    /// `((layer, position), slot)` for every rotation.
    pub fn sharing(&self) -> Vec<((usize, usize), usize)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| {
                layer
                    .iter()
                    .enumerate()
                    .filter_map(move |(k, g)| g.param_slot().map(|s| ((l, k), s)))
            })
            .collect()
    }

    /// Free parameters per layer (slots first bound within each layer).
    pub fn params_per_layer(&self) -> Vec<usize> {
        let mut seen = HashSet::new();
        self.layers
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .filter_map(GateSpec::param_slot)
                    .filter(|s| seen.insert(*s))
                    .count()
            })
            .collect()
    }

    /// Sum of the generators bound to each slot.
    pub fn slot_generators(&self) -> Vec<PauliSum> {
        let mut out = vec![PauliSum::new(self.num_qubits); self.num_free_params];
        for gate in self.gates() {
            if let GateSpec::Rotation { generator, slot } = gate {
                out[*slot]
                    .add_term(1.0, generator.clone())
                    .expect("validated generator");
            }
        }
        out
    }

    /// The same circuit with one slot per rotation, plus the map to original slots.
    pub fn untied(&self) -> (AnsatzDesign, Vec<usize>) {
        let mut map = Vec::new();
        let layers = self
            .layers
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|g| match g {
                        GateSpec::Rotation { generator, slot } => {
                            map.push(*slot);
                            GateSpec::Rotation {
                                generator: generator.clone(),
                                slot: map.len() - 1,
                            }
                        }
                        other => other.clone(),
                    })
                    .collect()
            })
            .collect();
        let a = AnsatzDesign::new(self.num_qubits, layers).expect("untying keeps validity");
        (a, map)
    }

    /// Maximal runs of consecutive, mutually commuting rotations bound to the
    /// same slot; each CNOT is its own fixed block. A rotation block acts as
    /// `e^{-iθG}` with `G` the sum of its strings.
    pub fn blocks(&self) -> Vec<Block> {
        let gates: Vec<&GateSpec> = self.gates().collect();
        let mut out: Vec<Block> = Vec::new();
        for (i, g) in gates.iter().enumerate() {
            match g {
                GateSpec::Rotation { generator, slot } => {
                    if let Some(last) = out.last_mut() {
                        let joins = last.slot == Some(*slot)
                            && last.end == i
                            && gates[last.start..i]
                                .iter()
                                .all(|h| h.generator().is_some_and(|q| q.commutes_with(generator)));
                        if joins {
                            last.end = i + 1;
                            last.generator
                                .add_term(1.0, generator.clone())
                                .expect("validated generator");
                            continue;
                        }
                    }
                    out.push(Block {
                        slot: Some(*slot),
                        start: i,
                        end: i + 1,
                        generator: PauliSum::from_string(generator.clone()).expect("validated"),
                    });
                }
                GateSpec::Cnot { control, target } => out.push(Block {
                    slot: None,
                    start: i,
                    end: i + 1,
                    generator: cnot_operator(self.num_qubits, *control, *target),
                }),
            }
        }
        out
    }

    /// Distinct block generators; the operators an invariant subspace must absorb.
    pub fn closure_generators(&self) -> Vec<PauliSum> {
        let mut seen = HashSet::new();
        self.blocks()
            .into_iter()
            .filter_map(|b| {
                let mut key: Vec<(u64, u64, u64)> = b
                    .generator
                    .terms()
                    .iter()
                    .map(|(c, p)| (p.x_mask(), p.z_mask(), c.to_bits()))
                    .collect();
                key.sort_unstable();
                seen.insert(key).then_some(b.generator)
            })
            .collect()
    }

    pub fn check_params(&self, p: &ParamVector) -> Result<()> {
        if p.len() != self.num_free_params {
            return Err(Error::ParamMismatch {
                expected: self.num_free_params,
                found: p.len(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = AnsatzFile {
            num_qubits: self.num_qubits,
            num_free_params: self.num_free_params,
            layers: self
                .layers
                .iter()
                .map(|layer| {
                    layer
                        .iter()
                        .map(|g| match g {
                            GateSpec::Rotation { generator, slot } => {
                                GateRecord::Rot("ROT".into(), generator.label(), *slot)
                            }
                            GateSpec::Cnot { control, target } => {
                                GateRecord::Cnot("CNOT".into(), *control, *target)
                            }
                        })
                        .collect()
                })
                .collect(),
            sharing: self
                .sharing()
                .into_iter()
                .map(|((l, k), s)| [l, k, s])
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("serialisable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: AnsatzFile = serde_json::from_str(text)?;
        let layers = file
            .layers
            .into_iter()
            .map(|layer| {
                layer
                    .into_iter()
                    .map(|r| match r {
                        GateRecord::Rot(tag, label, slot) if tag == "ROT" => {
                            let generator = label.parse::<PauliString>()?;
                            Ok(GateSpec::Rotation { generator, slot })
                        }
                        GateRecord::Cnot(tag, control, target) if tag == "CNOT" => {
                            Ok(GateSpec::Cnot { control, target })
                        }
                        GateRecord::Rot(tag, ..) | GateRecord::Cnot(tag, ..) => {
                            Err(Error::Parse(format!("unknown gate tag {tag:?}")))
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let a = AnsatzDesign::new(file.num_qubits, layers)?;
        let sharing: Vec<[usize; 3]> = a.sharing().into_iter().map(|((l, k), s)| [l, k, s]).collect();
        if sharing != file.sharing || a.num_free_params != file.num_free_params {
            return Err(Error::Parse("sharing map disagrees with gate slots".into()));
        }
        Ok(a)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// A run of gates `start..end` in flattened circuit order.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub slot: Option<usize>,
    pub start: usize,
    pub end: usize,
    pub generator: PauliSum,
}

/// CNOT as a Hermitian operator, `(I + Z_c + X_t - Z_c X_t) / 2`.
pub fn cnot_operator(n: usize, control: usize, target: usize) -> PauliSum {
    use crate::pauli::Pauli::{X, Z};
    let s = |ops: &[(usize, crate::pauli::Pauli)]| PauliString::from_sparse(n, ops).expect("valid wires");
    PauliSum::from_terms(
        n,
        [
            (0.5, PauliString::identity(n)),
            (0.5, s(&[(control, Z)])),
            (0.5, s(&[(target, X)])),
            (-0.5, s(&[(control, Z), (target, X)])),
        ],
    )
    .expect("hermitian terms")
}

#[derive(Serialize, Deserialize)]
struct AnsatzFile {
    num_qubits: usize,
    num_free_params: usize,
    layers: Vec<Vec<GateRecord>>,
    sharing: Vec<[usize; 3]>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GateRecord {
    Rot(String, String, usize),
    Cnot(String, usize, usize),
}

/// Hardware-efficient ansatz: per layer, `RX RY RZ` on every qubit, CNOTs on
/// pairs `(0,1), (2,3), …`, `RX RY RZ` again, CNOTs on `(1,2), (3,4), …`.
pub fn build_hea(n: usize, layers: usize) -> Result<AnsatzDesign> {
    if n < 2 || layers < 1 {
        return Err(Error::InvalidArgument("HEA needs n ≥ 2 and L ≥ 1".into()));
    }
    use crate::pauli::Pauli::{X, Y, Z};
    let mut slot = 0;
    let mut rotations = |out: &mut Vec<GateSpec>| -> Result<()> {
        for q in 0..n {
            for p in [X, Y, Z] {
                out.push(GateSpec::Rotation {
                    generator: PauliString::single(n, q, p)?,
                    slot,
                });
                slot += 1;
            }
        }
        Ok(())
    };
    let mut all = Vec::with_capacity(layers);
    for _ in 0..layers {
        let mut layer = Vec::new();
        rotations(&mut layer)?;
        for j in (0..n - 1).step_by(2) {
            layer.push(GateSpec::Cnot { control: j, target: j + 1 });
        }
        rotations(&mut layer)?;
        for j in (1..n - 1).step_by(2) {
            layer.push(GateSpec::Cnot { control: j, target: j + 1 });
        }
        all.push(layer);
    }
    AnsatzDesign::new(n, all)
}

/// Canonical order of Hamiltonian terms: by weight, then support, then label.
pub fn canonical_terms(h: &PauliSum) -> Vec<PauliString> {
    let mut terms: Vec<PauliString> = h.non_identity_terms().map(|(_, p)| p.clone()).collect();
    terms.sort_by_key(|p| (p.weight(), p.support(), p.label()));
    terms
}

/// Hamiltonian variational ansatz: each layer rotates once about every term of `h`.
pub fn build_hva(h: &PauliSum, layers: usize) -> Result<AnsatzDesign> {
    let terms = canonical_terms(h);
    if terms.is_empty() {
        return Err(Error::InvalidArgument("HVA needs at least one non-identity term".into()));
    }
    let q = terms.len();
    let all = (0..layers)
        .map(|l| {
            terms
                .iter()
                .enumerate()
                .map(|(k, p)| GateSpec::Rotation {
                    generator: p.clone(),
                    slot: l * q + k,
                })
                .collect()
        })
        .collect();
    AnsatzDesign::new(h.num_qubits(), all)
}

/// `U(θ)|input>`.
pub fn prepare_state(a: &AnsatzDesign, p: &ParamVector, input: &StateVector) -> Result<StateVector> {
    a.check_params(p)?;
    if input.num_qubits() != a.num_qubits() {
        return Err(Error::QubitMismatch {
            expected: a.num_qubits(),
            found: input.num_qubits(),
        });
    }
    let mut s = input.clone();
    for g in a.gates() {
        g.apply(&mut s, &p.values)?;
    }
    Ok(s)
}

/// I.i.d. uniform on `[-π, π]`.
pub fn sample_params(a: &AnsatzDesign, seed: u64) -> ParamVector {
    let mut r = rng(seed);
    ParamVector {
        values: (0..a.num_free_params())
            .map(|_| r.gen_range(-PI..=PI))
            .collect(),
    }
}
