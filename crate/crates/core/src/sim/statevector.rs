use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{Circuit, Gate};
use crate::error::{Error, Result};

/// Largest register for dense pure-state simulation.
pub const MAX_STATEVECTOR_QUBITS: usize = 20;

fn pair_update(psi: &mut [Complex64], q: usize, u: [[Complex64; 2]; 2]) {
    let m = 1usize << q;
    for i0 in (0..psi.len()).filter(|i| i & m == 0) {
        let (a, b) = (psi[i0], psi[i0 | m]);
        psi[i0] = u[0][0] * a + u[0][1] * b;
        psi[i0 | m] = u[1][0] * a + u[1][1] * b;
    }
}

/// Applies a gate to a pure state in place.
pub fn apply_gate_to_vector(psi: &mut [Complex64], g: &Gate, params: &[f64]) -> Result<()> {
    let c = Complex64::new;
    match *g {
        Gate::H(q) => {
            let h = c(FRAC_1_SQRT_2, 0.0);
            pair_update(psi, q, [[h, h], [h, -h]]);
        }
        Gate::X(q) => {
            let m = 1usize << q;
            for i0 in (0..psi.len()).filter(|i| i & m == 0) {
                psi.swap(i0, i0 | m);
            }
        }
        Gate::Rx(q, a) => {
            let t = a.resolve(params)? / 2.0;
            let (co, si) = (c(t.cos(), 0.0), c(0.0, -t.sin()));
            pair_update(psi, q, [[co, si], [si, co]]);
        }
        Gate::Rz(q, a) => {
            let t = a.resolve(params)? / 2.0;
            let (lo, hi) = (c(t.cos(), -t.sin()), c(t.cos(), t.sin()));
            let m = 1usize << q;
            for (i, z) in psi.iter_mut().enumerate() {
                *z *= if i & m == 0 { lo } else { hi };
            }
        }
        Gate::Cnot { control, target } => {
            let (cm, tm) = (1usize << control, 1usize << target);
            for i in (0..psi.len()).filter(|i| i & cm != 0 && i & tm == 0) {
                psi.swap(i, i | tm);
            }
        }
    }
    Ok(())
}

impl Circuit {
    /// Noiseless action on an arbitrary input state.
    pub fn apply_to(&self, psi: &mut DVector<Complex64>, params: &[f64]) -> Result<()> {
        if psi.len() != 1 << self.n_qubits {
            return Err(Error::QubitMismatch { left: psi.len(), right: 1 << self.n_qubits });
        }
        self.validate()?;
        for g in &self.gates {
            apply_gate_to_vector(psi.as_mut_slice(), g, params)?;
        }
        Ok(())
    }

    /// Noiseless output state from `|0...0>`.
    pub fn statevector(&self, params: &[f64]) -> Result<DVector<Complex64>> {
        if self.n_qubits > MAX_STATEVECTOR_QUBITS {
            return Err(Error::DenseLimit { n: self.n_qubits, limit: MAX_STATEVECTOR_QUBITS });
        }
        let mut psi = DVector::zeros(1 << self.n_qubits);
        psi[0] = Complex64::new(1.0, 0.0);
        self.apply_to(&mut psi, params)?;
        Ok(psi)
    }

    /// Dense unitary, column `k` being the image of basis state `k`.
    pub fn unitary(&self, params: &[f64]) -> Result<DMatrix<Complex64>> {
        if self.n_qubits > 10 {
            return Err(Error::DenseLimit { n: self.n_qubits, limit: 10 });
        }
        let d = 1usize << self.n_qubits;
        let mut u = DMatrix::zeros(d, d);
        for k in 0..d {
            let mut col = DVector::zeros(d);
            col[k] = Complex64::new(1.0, 0.0);
            self.apply_to(&mut col, params)?;
            u.set_column(k, &col);
        }
        Ok(u)
    }
}
