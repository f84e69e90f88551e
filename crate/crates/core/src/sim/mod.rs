//! Gate-level density-matrix simulation with depolarizing/damping noise,
//! readout confusion, and seeded shot sampling.

mod density;
mod noise;
mod sample;
mod statevector;

pub use density::DensityState;
pub use noise::{DeviceCalibration, DampingTimes, NoiseModel, PairCalibration, QubitCalibration, QubitNoise, ReadoutError};
pub use sample::{apply_readout, measured_probabilities, multinomial, sample, ShotTable};
pub use statevector::apply_gate_to_vector;

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::pauli::Basis;

/// A rotation angle: fixed, or `scale * params[slot]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Fixed(f64),
    Slot { slot: usize, scale: f64 },
}

impl Angle {
    pub fn resolve(&self, params: &[f64]) -> Result<f64> {
        match *self {
            Angle::Fixed(a) => Ok(a),
            Angle::Slot { slot, scale } => params.get(slot).map(|t| scale * t).ok_or(Error::UnboundParameter(slot)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    /// `exp(-i a X / 2)`.
    Rx(usize, Angle),
    /// `exp(-i a Z / 2)`.
    Rz(usize, Angle),
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Rx(q, _) | Gate::Rz(q, _) => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot { .. })
    }

    fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "h",
            Gate::X(_) => "x",
            Gate::Rx(..) => "rx",
            Gate::Rz(..) => "rz",
            Gate::Cnot { .. } => "cx",
        }
    }
}

/// Gates that rotate the measurement basis of each qubit onto `Z`.
pub fn basis_rotation_gates(basis: &[Basis]) -> Vec<Gate> {
    basis
        .iter()
        .enumerate()
        .filter_map(|(q, b)| match b {
            Basis::Z => None,
            Basis::X => Some(Gate::H(q)),
            // Rx(π/2) Y Rx(-π/2) = Z
            Basis::Y => Some(Gate::Rx(q, Angle::Fixed(FRAC_PI_2))),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    /// Names of the variational parameters, indexed by slot.
    pub parameter_names: Vec<String>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new(), parameter_names: Vec::new() }
    }

    pub fn push(&mut self, g: Gate) {
        self.gates.push(g);
    }

    pub fn extend(&mut self, other: &Circuit) {
        self.gates.extend(other.gates.iter().copied());
        if self.parameter_names.len() < other.parameter_names.len() {
            self.parameter_names = other.parameter_names.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.gates {
            let qs = g.qubits();
            if qs.iter().any(|&q| q >= self.n_qubits) {
                return Err(Error::Circuit(format!("gate {g:?} outside {} qubits", self.n_qubits)));
            }
            if qs.len() == 2 && qs[0] == qs[1] {
                return Err(Error::Circuit(format!("gate {g:?} repeats a qubit")));
            }
        }
        Ok(())
    }

    pub fn n_parameters(&self) -> usize {
        self.parameter_names.len()
    }

    /// Layer count under as-soon-as-possible scheduling.
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.n_qubits];
        for g in &self.gates {
            let qs = g.qubits();
            let l = qs.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
            for q in qs {
                level[q] = l;
            }
        }
        level.into_iter().max().unwrap_or(0)
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    /// Text netlist, one `gate qubits [angle-or-slot]` line per gate.
    ///
    /// Slot angles print as `<scale>*theta[<slot>]`.
    pub fn to_netlist(&self) -> String {
        let mut out = format!("qubits {}\n", self.n_qubits);
        for g in &self.gates {
            let qs: Vec<String> = g.qubits().iter().map(|q| q.to_string()).collect();
            let _ = write!(out, "{} {}", g.name(), qs.join(" "));
            if let Gate::Rx(_, a) | Gate::Rz(_, a) = g {
                match a {
                    Angle::Fixed(v) => {
                        let _ = write!(out, " {v:?}");
                    }
                    Angle::Slot { slot, scale } => {
                        let _ = write!(out, " {scale:?}*theta[{slot}]");
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_netlist(text: &str) -> Result<Circuit> {
        let bad = |i: usize, m: &str| Error::Circuit(format!("netlist line {}: {m}", i + 1));
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (i0, first) = lines.next().ok_or_else(|| bad(0, "empty netlist"))?;
        let n: usize = first
            .trim()
            .strip_prefix("qubits ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad(i0, "expected `qubits <n>`"))?;
        let mut c = Circuit::new(n);
        let mut max_slot: Option<usize> = None;
        for (i, line) in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            let q = |k: usize| -> Result<usize> {
                t.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| bad(i, "bad qubit index"))
            };
            let angle = |k: usize| -> Result<Angle> {
                let v = t.get(k).ok_or_else(|| bad(i, "missing angle"))?;
                if let Some((s, rest)) = v.split_once("*theta[") {
                    let scale: f64 = s.parse().map_err(|_| bad(i, "bad scale"))?;
                    let slot: usize =
                        rest.strip_suffix(']').and_then(|x| x.parse().ok()).ok_or_else(|| bad(i, "bad slot"))?;
                    Ok(Angle::Slot { slot, scale })
                } else {
                    v.parse().map(Angle::Fixed).map_err(|_| bad(i, "bad angle"))
                }
            };
            let g = match t[0] {
                "h" => Gate::H(q(1)?),
                "x" => Gate::X(q(1)?),
                "rx" => Gate::Rx(q(1)?, angle(2)?),
                "rz" => Gate::Rz(q(1)?, angle(2)?),
                "cx" => Gate::Cnot { control: q(1)?, target: q(2)? },
                other => return Err(bad(i, &format!("unknown gate `{other}`"))),
            };
            if let Gate::Rx(_, Angle::Slot { slot, .. }) | Gate::Rz(_, Angle::Slot { slot, .. }) = g {
                max_slot = Some(max_slot.map_or(slot, |m| m.max(slot)));
            }
            c.push(g);
        }
        if let Some(m) = max_slot {
            c.parameter_names = (0..=m).map(|k| format!("theta{k}")).collect();
        }
        c.validate()?;
        Ok(c)
    }

    /// Runs the circuit from `|0...0>`.
    pub fn run(&self, params: &[f64], noise: Option<&NoiseModel>) -> Result<DensityState> {
        let mut st = DensityState::zero(self.n_qubits);
        st.run(self, params, noise)?;
        Ok(st)
    }
}
