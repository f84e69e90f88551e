use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{Circuit, Gate, NoiseModel};
use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};

/// Largest register simulated as a dense density matrix.
pub const MAX_DENSITY_QUBITS: usize = 10;

type U2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Row-major `2^n x 2^n` density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    n_qubits: usize,
    dim: usize,
    rho: Vec<Complex64>,
}

impl DensityState {
    pub fn zero(n_qubits: usize) -> Self {
        assert!(n_qubits <= MAX_DENSITY_QUBITS, "density register too large");
        let dim = 1usize << n_qubits;
        let mut rho = vec![Complex64::default(); dim * dim];
        rho[0] = c(1.0, 0.0);
        Self { n_qubits, dim, rho }
    }

    pub fn from_pure(psi: &DVector<Complex64>) -> Result<Self> {
        let dim = psi.len();
        if !dim.is_power_of_two() {
            return Err(Error::Invalid(format!("state length {dim} is not a power of two")));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        if n_qubits > MAX_DENSITY_QUBITS {
            return Err(Error::DenseLimit { n: n_qubits, limit: MAX_DENSITY_QUBITS });
        }
        let mut rho = vec![Complex64::default(); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                rho[i * dim + j] = psi[i] * psi[j].conj();
            }
        }
        Ok(Self { n_qubits, dim, rho })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.rho[i * self.dim + j]
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.rho)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.rho[i * self.dim + i].re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Diagonal of `rho`, clipped at zero.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.rho[i * self.dim + i].re.max(0.0)).collect()
    }

    /// `<psi| rho |psi>`.
    pub fn fidelity_with_pure(&self, psi: &DVector<Complex64>) -> Result<f64> {
        if psi.len() != self.dim {
            return Err(Error::QubitMismatch { left: psi.len(), right: self.dim });
        }
        let mut acc = Complex64::default();
        for i in 0..self.dim {
            let mut row = Complex64::default();
            for j in 0..self.dim {
                row += self.rho[i * self.dim + j] * psi[j];
            }
            acc += psi[i].conj() * row;
        }
        Ok(acc.re)
    }

    /// `Tr(rho P)`.
    pub fn expectation_string(&self, p: &PauliString) -> Complex64 {
        let mut acc = Complex64::default();
        for b in 0..self.dim {
            let (k, amp) = p.apply_to_basis(b as u64);
            acc += self.rho[b * self.dim + k as usize] * amp;
        }
        acc
    }

    pub fn expectation(&self, op: &PauliSum) -> Result<Complex64> {
        if op.n_qubits() != self.n_qubits {
            return Err(Error::QubitMismatch { left: op.n_qubits(), right: self.n_qubits });
        }
        Ok(op.iter().map(|(p, w)| w * self.expectation_string(p)).sum())
    }

    pub fn apply_1q(&mut self, q: usize, u: &U2) {
        let d = self.dim;
        let m = 1usize << q;
        // U rho
        for i0 in (0..d).filter(|i| i & m == 0) {
            let i1 = i0 | m;
            for j in 0..d {
                let a = self.rho[i0 * d + j];
                let b = self.rho[i1 * d + j];
                self.rho[i0 * d + j] = u[0][0] * a + u[0][1] * b;
                self.rho[i1 * d + j] = u[1][0] * a + u[1][1] * b;
            }
        }
        // (U rho) U^dagger
        for i in 0..d {
            let row = &mut self.rho[i * d..(i + 1) * d];
            for j0 in (0..d).filter(|j| j & m == 0) {
                let j1 = j0 | m;
                let a = row[j0];
                let b = row[j1];
                row[j0] = a * u[0][0].conj() + b * u[0][1].conj();
                row[j1] = a * u[1][0].conj() + b * u[1][1].conj();
            }
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        let d = self.dim;
        let (cm, tm) = (1usize << control, 1usize << target);
        let perm = |i: usize| if i & cm != 0 { i ^ tm } else { i };
        let old = self.rho.clone();
        for i in 0..d {
            let pi = perm(i);
            for j in 0..d {
                self.rho[pi * d + perm(j)] = old[i * d + j];
            }
        }
    }

    /// `rho -> (1-p) rho + p I/2^k (x) Tr_S(rho)` on the qubits in `mask`.
    pub fn depolarize(&mut self, mask: usize, p: f64) {
        if p == 0.0 || mask == 0 {
            return;
        }
        let d = self.dim;
        let k = mask.count_ones();
        let norm = 1.0 / f64::from(1u32 << k);
        let subsets: Vec<usize> = {
            let mut v = vec![0usize];
            let mut s = mask;
            while s != 0 {
                v.push(s);
                s = (s - 1) & mask;
            }
            v.sort_unstable();
            v.dedup();
            v
        };
        let old = self.rho.clone();
        for i in 0..d {
            for j in 0..d {
                let idx = i * d + j;
                if (i ^ j) & mask != 0 {
                    self.rho[idx] = old[idx] * (1.0 - p);
                } else {
                    let (ib, jb) = (i & !mask, j & !mask);
                    let avg: Complex64 = subsets.iter().map(|&s| old[(ib | s) * d + (jb | s)]).sum::<Complex64>() * norm;
                    self.rho[idx] = old[idx] * (1.0 - p) + avg * p;
                }
            }
        }
    }

    /// Amplitude damping with decay probability `gamma`.
    pub fn amplitude_damp(&mut self, q: usize, gamma: f64) {
        if gamma == 0.0 {
            return;
        }
        let d = self.dim;
        let m = 1usize << q;
        let s = (1.0 - gamma).sqrt();
        let old = self.rho.clone();
        for i in 0..d {
            for j in 0..d {
                let idx = i * d + j;
                self.rho[idx] = match (i & m != 0, j & m != 0) {
                    (false, false) => old[idx] + old[(i | m) * d + (j | m)] * gamma,
                    (true, true) => old[idx] * (1.0 - gamma),
                    _ => old[idx] * s,
                };
            }
        }
    }

    /// Scales coherences on qubit `q` by `factor`.
    pub fn dephase(&mut self, q: usize, factor: f64) {
        if factor == 1.0 {
            return;
        }
        let d = self.dim;
        let m = 1usize << q;
        for i in 0..d {
            for j in 0..d {
                if (i ^ j) & m != 0 {
                    self.rho[i * d + j] *= factor;
                }
            }
        }
    }

    pub fn apply_gate(&mut self, g: &Gate, params: &[f64]) -> Result<()> {
        match *g {
            Gate::H(q) => {
                let h = c(FRAC_1_SQRT_2, 0.0);
                self.apply_1q(q, &[[h, h], [h, -h]]);
            }
            Gate::X(q) => {
                let (z, o) = (c(0.0, 0.0), c(1.0, 0.0));
                self.apply_1q(q, &[[z, o], [o, z]]);
            }
            Gate::Rx(q, a) => {
                let t = a.resolve(params)? / 2.0;
                let (co, si) = (c(t.cos(), 0.0), c(0.0, -t.sin()));
                self.apply_1q(q, &[[co, si], [si, co]]);
            }
            Gate::Rz(q, a) => {
                let t = a.resolve(params)? / 2.0;
                let z = c(0.0, 0.0);
                self.apply_1q(q, &[[c(t.cos(), -t.sin()), z], [z, c(t.cos(), t.sin())]]);
            }
            Gate::Cnot { control, target } => self.apply_cnot(control, target),
        }
        Ok(())
    }

    /// Applies a gate followed by its noise channel.
    pub fn apply_noisy(&mut self, g: &Gate, params: &[f64], noise: Option<&NoiseModel>) -> Result<()> {
        self.apply_gate(g, params)?;
        if let Some(nm) = noise {
            let qs = g.qubits();
            if g.is_two_qubit() {
                self.depolarize((1 << qs[0]) | (1 << qs[1]), nm.p2(qs[0], qs[1]));
            } else {
                self.depolarize(1 << qs[0], nm.p1(qs[0]));
            }
            if let Some(times) = nm.damping {
                let t = if g.is_two_qubit() { times.gate_2q_us } else { times.gate_1q_us };
                for q in qs {
                    let (gamma, phi) = nm.damping_factors(q, t);
                    self.amplitude_damp(q, gamma);
                    self.dephase(q, phi);
                }
            }
        }
        Ok(())
    }

    pub fn run(&mut self, circuit: &Circuit, params: &[f64], noise: Option<&NoiseModel>) -> Result<()> {
        if circuit.n_qubits != self.n_qubits {
            return Err(Error::QubitMismatch { left: circuit.n_qubits, right: self.n_qubits });
        }
        circuit.validate()?;
        for g in &circuit.gates {
            self.apply_noisy(g, params, noise)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::Angle;
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bell_state() {
        let mut c = Circuit::new(2);
        c.push(Gate::H(0));
        c.push(Gate::Cnot { control: 0, target: 1 });
        let st = c.run(&[], None).unwrap();
        let zz: PauliString = "ZZ".parse().unwrap();
        let xx: PauliString = "XX".parse().unwrap();
        assert_abs_diff_eq!(st.expectation_string(&zz).re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.expectation_string(&xx).re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.purity(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_conventions() {
        // Rx(a)|0> has <Z> = cos a, <Y> = -sin a
        let mut c = Circuit::new(1);
        c.push(Gate::Rx(0, Angle::Fixed(0.7)));
        let st = c.run(&[], None).unwrap();
        assert_abs_diff_eq!(st.expectation_string(&"Z".parse().unwrap()).re, 0.7f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(st.expectation_string(&"Y".parse().unwrap()).re, -(0.7f64.sin()), epsilon = 1e-12);
        // H then Rz(a): <X> = cos a, <Y> = sin a
        let mut c = Circuit::new(1);
        c.push(Gate::H(0));
        c.push(Gate::Rz(0, Angle::Slot { slot: 0, scale: 2.0 }));
        let st = c.run(&[0.35], None).unwrap();
        assert_abs_diff_eq!(st.expectation_string(&"X".parse().unwrap()).re, 0.7f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(st.expectation_string(&"Y".parse().unwrap()).re, 0.7f64.sin(), epsilon = 1e-12);
    }

    #[test]
    fn full_depolarization_is_maximally_mixed() {
        let mut st = DensityState::zero(2);
        st.apply_gate(&Gate::H(0), &[]).unwrap();
        st.depolarize(0b01, 1.0);
        assert_abs_diff_eq!(st.get(0, 0).re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(st.get(1, 1).re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(st.get(0, 1).norm(), 0.0, epsilon = 1e-12);
        let mut st = DensityState::zero(2);
        st.depolarize(0b11, 1.0);
        for i in 0..4 {
            assert_abs_diff_eq!(st.get(i, i).re, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn depolarizing_shrinks_bloch_vector() {
        let mut st = DensityState::zero(1);
        st.depolarize(1, 0.2);
        assert_abs_diff_eq!(st.expectation_string(&"Z".parse().unwrap()).re, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(st.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn amplitude_damping_decays_excited_state() {
        let mut st = DensityState::zero(1);
        st.apply_gate(&Gate::X(0), &[]).unwrap();
        st.amplitude_damp(0, 0.3);
        assert_abs_diff_eq!(st.get(1, 1).re, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(st.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pure_state_round_trip() {
        let psi = DVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let st = DensityState::from_pure(&psi).unwrap();
        assert_abs_diff_eq!(st.fidelity_with_pure(&psi).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.expectation_string(&"Z".parse().unwrap()).re, 0.36 - 0.64, epsilon = 1e-12);
    }
}
