use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::{basis_rotation_gates, DensityState, NoiseModel};
use crate::error::{Error, Result};
use crate::pauli::Basis;

/// Measured bitstring counts for one measurement setting.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShotTable {
    /// Index of the measurement group this table belongs to.
    pub group: usize,
    pub n_qubits: usize,
    pub counts: BTreeMap<u64, u64>,
    /// Shots taken, before post-selection.
    pub shots: u64,
    /// Shots removed by post-selection.
    pub discarded: u64,
}

impl ShotTable {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Shots remaining after post-selection.
    pub fn kept(&self) -> u64 {
        self.shots - self.discarded
    }

    /// Empirical probability vector over `2^n` outcomes.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut p = vec![0.0; 1 << self.n_qubits];
        let t = self.total() as f64;
        if t > 0.0 {
            for (&b, &c) in &self.counts {
                p[b as usize] = c as f64 / t;
            }
        }
        p
    }
}

/// Applies independent per-qubit readout confusion to a probability vector.
pub fn apply_readout(probs: &mut [f64], noise: &NoiseModel) {
    let n = probs.len().trailing_zeros() as usize;
    for q in 0..n {
        let c = noise.readout(q).matrix();
        if c[1][0] == 0.0 && c[0][1] == 0.0 {
            continue;
        }
        let m = 1usize << q;
        for i0 in (0..probs.len()).filter(|i| i & m == 0) {
            let (a, b) = (probs[i0], probs[i0 | m]);
            probs[i0] = c[0][0] * a + c[0][1] * b;
            probs[i0 | m] = c[1][0] * a + c[1][1] * b;
        }
    }
}

/// Multinomial draw of `shots` outcomes from `probs`.
pub fn multinomial<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> BTreeMap<u64, u64> {
    let mut out = BTreeMap::new();
    let mut left = shots;
    let mut mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (b, &p) in probs.iter().enumerate() {
        if left == 0 || mass <= 0.0 {
            break;
        }
        let p = p.max(0.0);
        let k = if p >= mass {
            left
        } else {
            Binomial::new(left, (p / mass).clamp(0.0, 1.0)).expect("valid binomial").sample(rng)
        };
        if k > 0 {
            out.insert(b as u64, k);
        }
        left -= k;
        mass -= p;
    }
    out
}

/// Outcome distribution after rotating a copy of `state` into `basis` and
/// applying readout error. Basis-change gates pick up gate noise from `noise`.
pub fn measured_probabilities(state: &DensityState, basis: &[Basis], noise: Option<&NoiseModel>) -> Result<Vec<f64>> {
    if basis.len() != state.n_qubits() {
        return Err(Error::QubitMismatch { left: basis.len(), right: state.n_qubits() });
    }
    let mut probs = if basis.iter().all(|b| *b == Basis::Z) {
        state.probabilities()
    } else {
        let mut rotated = state.clone();
        for g in basis_rotation_gates(basis) {
            rotated.apply_noisy(&g, &[], noise)?;
        }
        rotated.probabilities()
    };
    if let Some(nm) = noise {
        apply_readout(&mut probs, nm);
    }
    Ok(probs)
}

/// Draws `shots` outcomes from [`measured_probabilities`].
pub fn sample<R: Rng + ?Sized>(
    state: &DensityState,
    group: usize,
    basis: &[Basis],
    shots: u64,
    noise: Option<&NoiseModel>,
    rng: &mut R,
) -> Result<ShotTable> {
    let probs = measured_probabilities(state, basis, noise)?;
    Ok(ShotTable { group, n_qubits: state.n_qubits(), counts: multinomial(&probs, shots, rng), shots, discarded: 0 })
}

#[cfg(test)]
mod tests {
    use super::super::{Circuit, Gate};
    use super::*;
    use crate::rng::task_rng;

    #[test]
    fn seeded_sampling_is_deterministic() {
        let mut c = Circuit::new(2);
        c.push(Gate::H(0));
        c.push(Gate::Cnot { control: 0, target: 1 });
        let st = c.run(&[], None).unwrap();
        let z = [Basis::Z, Basis::Z];
        let a = sample(&st, 0, &z, 1000, None, &mut task_rng(7, &[1])).unwrap();
        let b = sample(&st, 0, &z, 1000, None, &mut task_rng(7, &[1])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total(), 1000);
        assert!(a.counts.keys().all(|&k| k == 0 || k == 3));
        let x = sample(&st, 1, &[Basis::X, Basis::X], 500, None, &mut task_rng(7, &[2])).unwrap();
        assert!(x.counts.keys().all(|&k| k == 0 || k == 3));
    }

    #[test]
    fn readout_flips_deterministic_state() {
        let st = DensityState::zero(1);
        let nm = NoiseModel::uniform(1, 0.0, 0.0, 0.25);
        let t = sample(&st, 0, &[Basis::Z], 100_000, Some(&nm), &mut task_rng(3, &[])).unwrap();
        let f = t.frequencies();
        assert!((f[1] - 0.25).abs() < 0.01);
    }

    #[test]
    fn y_basis_rotation() {
        // Rx(-pi/2)|0> is the +1 eigenstate of Y
        let mut st = DensityState::zero(1);
        st.apply_gate(&Gate::Rx(0, super::super::Angle::Fixed(-std::f64::consts::FRAC_PI_2)), &[]).unwrap();
        let t = sample(&st, 0, &[Basis::Y], 200, None, &mut task_rng(1, &[])).unwrap();
        assert_eq!(t.counts.get(&0), Some(&200));
    }
}
