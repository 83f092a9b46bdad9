//! Loss, gradients and the optimisers that drive them.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{prepare_state, AnsatzDesign, GateSpec, ParamVector};
use crate::error::{Error, Result};
use crate::pauli::PauliSum;
use crate::state::{exact_ground, expectation, inner, StateVector};

/// Input register `|ψ₀>`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputState {
    /// `|0…0>`.
    #[default]
    Zero,
    /// `|+>` on the first `k` qubits, `|0>` on the rest.
    Plus(usize),
}

impl InputState {
    pub fn prepare(&self, num_qubits: usize) -> StateVector {
        match *self {
            InputState::Zero => StateVector::zero(num_qubits),
            InputState::Plus(k) => {
                let k = k.min(num_qubits);
                StateVector::plus(k).tensor(&StateVector::zero(num_qubits - k))
            }
        }
    }
}

/// `ℒ = ½(⟨H⟩ - C)²` with `C ≤ E₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossSpec {
    pub hamiltonian: PauliSum,
    pub target_constant: f64,
    pub ground_energy: f64,
    pub input: InputState,
}

impl LossSpec {
    /// `C = E₀` from exact diagonalisation.
    pub fn ground(h: &PauliSum) -> Result<Self> {
        let (e0, _) = exact_ground(h)?;
        Ok(Self {
            hamiltonian: h.clone(),
            target_constant: e0,
            ground_energy: e0,
            input: InputState::Zero,
        })
    }

    /// General target `C`; rejects `C > E₀ + 1e-9`.
    pub fn with_target(h: &PauliSum, c: f64) -> Result<Self> {
        let mut s = Self::ground(h)?;
        if c > s.ground_energy + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "target constant {c} lies above the ground energy {}",
                s.ground_energy
            )));
        }
        s.target_constant = c;
        Ok(s)
    }

    pub fn with_input(mut self, input: InputState) -> Self {
        self.input = input;
        self
    }

    pub fn input_state(&self) -> StateVector {
        self.input.prepare(self.hamiltonian.num_qubits())
    }
}

/// How the energy gradient is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    /// Two shifted circuits per gate occurrence, `f(θ+π/4) - f(θ-π/4)`.
    ParameterShift,
    /// One backward sweep; equal to the shift rule for involutory generators.
    #[default]
    Adjoint,
}

pub fn energy(a: &AnsatzDesign, p: &ParamVector, spec: &LossSpec) -> Result<f64> {
    let psi = prepare_state(a, p, &spec.input_state())?;
    expectation(&psi, &spec.hamiltonian)
}

/// `ε = ⟨H⟩ - C`.
pub fn residual(a: &AnsatzDesign, p: &ParamVector, spec: &LossSpec) -> Result<f64> {
    Ok(energy(a, p, spec)? - spec.target_constant)
}

pub fn loss(a: &AnsatzDesign, p: &ParamVector, spec: &LossSpec) -> Result<f64> {
    let e = residual(a, p, spec)?;
    Ok(0.5 * e * e)
}

/// `∂⟨H⟩/∂θ` by the parameter-shift rule, summing over every gate bound to a slot.
pub fn energy_gradient_shift(a: &AnsatzDesign, p: &ParamVector, spec: &LossSpec) -> Result<Vec<f64>> {
    a.check_params(p)?;
    let (untied, map) = a.untied();
    let base: Vec<f64> = map.iter().map(|&s| p.values[s]).collect();
    let per_gate = (0..map.len())
        .into_par_iter()
        .map(|k| {
            let shifted = |delta: f64| {
                let mut v = base.clone();
                v[k] += delta;
                energy(&untied, &ParamVector { values: v }, spec)
            };
            Ok(shifted(FRAC_PI_4)? - shifted(-FRAC_PI_4)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut grad = vec![0.0; a.num_free_params()];
    for (d, &s) in per_gate.iter().zip(&map) {
        grad[s] += d;
    }
    Ok(grad)
}

/// `⟨H⟩` and its gradient by back-propagating `H|ψ>` through the circuit.
pub fn energy_and_gradient_adjoint(
    a: &AnsatzDesign,
    p: &ParamVector,
    spec: &LossSpec,
) -> Result<(f64, Vec<f64>)> {
    let mut phi = prepare_state(a, p, &spec.input_state())?;
    let mut lambda = phi.apply_sum(&spec.hamiltonian)?;
    let e = inner(phi.amplitudes(), lambda.amplitudes());
    if e.im.abs() > 1e-8 {
        return Err(Error::ImaginaryExpectation(e.im));
    }
    let mut grad = vec![0.0; a.num_free_params()];
    for gate in a.gates().rev() {
        if let GateSpec::Rotation { generator, slot } = gate {
            // d/dθ ⟨H⟩ = 2 Re⟨λ|(-iP)|φ> = 2 Im⟨λ|P|φ>
            let pphi = crate::state::apply_pauli_string(&phi, generator)?;
            grad[*slot] += 2.0 * inner(lambda.amplitudes(), pphi.amplitudes()).im;
        }
        gate.apply_inverse(&mut phi, &p.values)?;
        gate.apply_inverse(&mut lambda, &p.values)?;
    }
    Ok((e.re, grad))
}

/// `(ε, ∇ε)`.
pub fn residual_and_gradient(
    a: &AnsatzDesign,
    p: &ParamVector,
    spec: &LossSpec,
    method: GradientMethod,
) -> Result<(f64, Vec<f64>)> {
    let (e, g) = match method {
        GradientMethod::Adjoint => energy_and_gradient_adjoint(a, p, spec)?,
        GradientMethod::ParameterShift => (energy(a, p, spec)?, energy_gradient_shift(a, p, spec)?),
    };
    Ok((e - spec.target_constant, g))
}

/// `∇ℒ = ε ∇ε` with the parameter-shift rule.
pub fn gradient(a: &AnsatzDesign, p: &ParamVector, spec: &LossSpec) -> Result<Vec<f64>> {
    let (eps, g) = residual_and_gradient(a, p, spec, GradientMethod::ParameterShift)?;
    Ok(g.into_iter().map(|x| eps * x).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    GradientDescent,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub max_iters: usize,
    pub loss_stop: f64,
    pub plateau_delta: f64,
    pub plateau_count: usize,
    pub gradient: GradientMethod,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            max_iters: 10_000,
            loss_stop: 1e-8,
            plateau_delta: 1e-8,
            plateau_count: 3,
            gradient: GradientMethod::Adjoint,
        }
    }
}

impl OptimizerConfig {
    pub fn gradient_descent(learning_rate: f64, max_iters: usize) -> Self {
        Self {
            kind: OptimizerKind::GradientDescent,
            learning_rate,
            max_iters,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        // a zero rate is allowed: it freezes the parameters
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidArgument("Adam moments must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    LossThreshold,
    Plateau,
    MaxIters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub loss: f64,
    pub eps: f64,
    pub grad_norm: f64,
    /// `Q = ‖∇ε‖²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
    pub final_params: ParamVector,
    pub stop_reason: StopReason,
    pub wall_time_secs: f64,
}

/// Column order of the trace CSV.
pub const TRACE_COLUMNS: [&str; 4] = ["t", "loss", "eps", "grad_norm"];

impl TrainingTrace {
    pub fn to_csv(&self) -> String {
        let mut s = TRACE_COLUMNS.join(",");
        s.push('\n');
        for r in &self.records {
            writeln!(s, "{},{},{},{}", r.t, r.loss, r.eps, r.grad_norm).expect("write to string");
        }
        s
    }

    pub fn records_from_csv(text: &str) -> Result<Vec<TraceRecord>> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header.trim() != TRACE_COLUMNS.join(",") {
            return Err(Error::Parse(format!("unexpected trace header {header:?}")));
        }
        lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 4 {
                    return Err(Error::Parse(format!("bad trace row {l:?}")));
                }
                let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
                Ok(TraceRecord {
                    t: f[0].trim().parse().map_err(|e| Error::Parse(format!("{:?}: {e}", f[0])))?,
                    loss: num(f[1])?,
                    eps: num(f[2])?,
                    grad_norm: num(f[3])?,
                    kernel: None,
                })
            })
            .collect()
    }

    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.loss)
    }

    pub fn eps_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.eps).collect()
    }
}

/// Runs the optimiser from `init` and records every iteration, including the last.
pub fn train(
    a: &AnsatzDesign,
    spec: &LossSpec,
    opt: &OptimizerConfig,
    init: &ParamVector,
) -> Result<TrainingTrace> {
    opt.validate()?;
    a.check_params(init)?;
    let start = Instant::now();
    let mut theta = init.values.clone();
    let k = theta.len();
    let (mut m, mut v) = (vec![0.0; k], vec![0.0; k]);
    let mut records = Vec::new();
    let mut flat = 0;
    let mut t = 0;
    let stop_reason = loop {
        let p = ParamVector { values: theta.clone() };
        let (eps, de) = residual_and_gradient(a, &p, spec, opt.gradient)?;
        let loss = 0.5 * eps * eps;
        if !loss.is_finite() || theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged { iteration: t, loss });
        }
        let q: f64 = de.iter().map(|x| x * x).sum();
        let grad: Vec<f64> = de.iter().map(|x| eps * x).collect();
        records.push(TraceRecord {
            t,
            loss,
            eps,
            grad_norm: eps.abs() * q.sqrt(),
            kernel: Some(q),
        });
        if loss < opt.loss_stop {
            break StopReason::LossThreshold;
        }
        if t > 0 {
            let prev = records[records.len() - 2].loss;
            flat = if (loss - prev).abs() < opt.plateau_delta { flat + 1 } else { 0 };
            if flat >= opt.plateau_count {
                break StopReason::Plateau;
            }
        }
        if t == opt.max_iters {
            break StopReason::MaxIters;
        }
        t += 1;
        match opt.kind {
            OptimizerKind::GradientDescent => {
                for (x, g) in theta.iter_mut().zip(&grad) {
                    *x -= opt.learning_rate * g;
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2) = (opt.beta1, opt.beta2);
                let c1 = 1.0 - b1.powi(t as i32);
                let c2 = 1.0 - b2.powi(t as i32);
                for i in 0..k {
                    m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                    theta[i] -= opt.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + opt.eps_adam);
                }
            }
        }
    };
    Ok(TrainingTrace {
        records,
        final_params: ParamVector { values: theta },
        stop_reason,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// First iteration whose loss is at most `eps`.
pub fn steps_to_epsilon(trace: &TrainingTrace, eps: f64) -> Option<usize> {
    trace.records.iter().find(|r| r.loss <= eps).map(|r| r.t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub gamma: f64,
    pub r_squared: f64,
    /// First and last index used by the fit.
    pub window: (usize, usize),
}

/// Least-squares fit of `log ε_t = c - γt`.
pub fn fit_decay_rate(trace: &TrainingTrace) -> Result<DecayFit> {
    fit_decay_series(&trace.eps_series())
}

/// As [`fit_decay_rate`] for a bare residual series indexed by iteration.
///
/// Skips the first 5% of iterations and keeps `ε_t ∈ [1e-10, ε₀/2]`.
pub fn fit_decay_series(eps: &[f64]) -> Result<DecayFit> {
    let live = eps.iter().filter(|e| **e > 1e-12).count();
    if live < 20 {
        return Err(Error::InsufficientWindow(format!(
            "{live} iterations above 1e-12, need 20"
        )));
    }
    let e0 = eps[0];
    let skip = eps.len() / 20;
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .enumerate()
        .skip(skip)
        .filter(|(_, e)| **e >= 1e-10 && **e <= 0.5 * e0)
        .map(|(t, e)| (t as f64, e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientWindow(format!(
            "{} points inside [1e-10, ε₀/2]",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(DecayFit {
        gamma: -slope,
        r_squared,
        window: (pts[0].0 as usize, pts[pts.len() - 1].0 as usize),
    })
}
