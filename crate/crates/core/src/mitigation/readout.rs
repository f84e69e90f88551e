use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{apply_readout, multinomial, DensityState, Gate, NoiseModel};

/// Condition number above which unfolding is refused.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    /// 2N circuits, one per qubit and bit value; C is a tensor product.
    #[default]
    Product,
    /// 2^N circuits, one per basis state.
    Full,
}

/// Treatment of negative entries in an unfolded distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeHandling {
    /// Clip to zero and renormalize.
    #[default]
    Clip,
    /// Return the raw quasi-probabilities (unbiased, sums to one).
    Keep,
}

/// Readout calibration with `C[i][j] = p(prepared i, measured j)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfusionMatrix {
    /// Per-qubit 2x2 blocks, qubit 0 first.
    Product(Vec<[[f64; 2]; 2]>),
    Full(DMatrix<f64>),
}

impl ConfusionMatrix {
    pub fn identity(n_qubits: usize) -> Self {
        ConfusionMatrix::Product(vec![[[1.0, 0.0], [0.0, 1.0]]; n_qubits])
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            ConfusionMatrix::Product(b) => b.len(),
            ConfusionMatrix::Full(m) => m.nrows().trailing_zeros() as usize,
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    pub fn from_dense(c: DMatrix<f64>) -> Result<Self> {
        if !c.is_square() || !c.nrows().is_power_of_two() {
            return Err(Error::Invalid(format!("confusion matrix must be 2^N square, got {}x{}", c.nrows(), c.ncols())));
        }
        for (i, row) in c.row_iter().enumerate() {
            if (row.sum() - 1.0).abs() > 1e-9 || row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::Invalid(format!("confusion row {i} is not a probability distribution")));
            }
        }
        Ok(ConfusionMatrix::Full(c))
    }

    /// Dense `2^N x 2^N` form.
    pub fn dense(&self) -> DMatrix<f64> {
        match self {
            ConfusionMatrix::Full(m) => m.clone(),
            ConfusionMatrix::Product(blocks) => {
                let d = self.dim();
                DMatrix::from_fn(d, d, |i, j| {
                    blocks.iter().enumerate().map(|(q, b)| b[(i >> q) & 1][(j >> q) & 1]).product()
                })
            }
        }
    }

    /// Measured distribution for a true distribution `p`: `p_exp = C^T p`.
    pub fn fold(&self, p: &[f64]) -> Vec<f64> {
        match self {
            ConfusionMatrix::Full(m) => (m.transpose() * DVector::from_column_slice(p)).as_slice().to_vec(),
            ConfusionMatrix::Product(blocks) => {
                let mut v = p.to_vec();
                for (q, b) in blocks.iter().enumerate() {
                    let m = 1usize << q;
                    for i0 in (0..v.len()).filter(|i| i & m == 0) {
                        let (x0, x1) = (v[i0], v[i0 | m]);
                        v[i0] = b[0][0] * x0 + b[1][0] * x1;
                        v[i0 | m] = b[0][1] * x0 + b[1][1] * x1;
                    }
                }
                v
            }
        }
    }

    /// Solves `C x = v`; maps an observable on true outcomes to one on measured outcomes.
    pub fn apply_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::QubitMismatch { left: v.len(), right: self.dim() });
        }
        match self {
            ConfusionMatrix::Full(m) => {
                let sol = m.clone().lu().solve(&DVector::from_column_slice(v)).ok_or(Error::Singular(f64::INFINITY))?;
                Ok(sol.as_slice().to_vec())
            }
            ConfusionMatrix::Product(blocks) => {
                let mut x = v.to_vec();
                for (q, b) in blocks.iter().enumerate() {
                    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
                    if det == 0.0 {
                        return Err(Error::Singular(f64::INFINITY));
                    }
                    let m = 1usize << q;
                    for i0 in (0..x.len()).filter(|i| i & m == 0) {
                        let (y0, y1) = (x[i0], x[i0 | m]);
                        x[i0] = (b[1][1] * y0 - b[0][1] * y1) / det;
                        x[i0 | m] = (b[0][0] * y1 - b[1][0] * y0) / det;
                    }
                }
                Ok(x)
            }
        }
    }

    /// Solves `C^T x = p_exp`, clips negatives and renormalizes.
    pub fn unfold(&self, p_exp: &[f64]) -> Result<Vec<f64>> {
        self.unfold_with(p_exp, NegativeHandling::Clip)
    }

    pub fn unfold_with(&self, p_exp: &[f64], negatives: NegativeHandling) -> Result<Vec<f64>> {
        if p_exp.len() != self.dim() {
            return Err(Error::QubitMismatch { left: p_exp.len(), right: self.dim() });
        }
        let mut x = match self {
            ConfusionMatrix::Full(m) => {
                let ct = m.transpose();
                let sv = ct.singular_values();
                let cond = sv.max() / sv.min();
                if !cond.is_finite() || cond > MAX_CONDITION {
                    return Err(Error::Singular(cond));
                }
                let sol = ct.lu().solve(&DVector::from_column_slice(p_exp)).ok_or(Error::Singular(f64::INFINITY))?;
                sol.as_slice().to_vec()
            }
            ConfusionMatrix::Product(blocks) => {
                let mut v = p_exp.to_vec();
                for (q, b) in blocks.iter().enumerate() {
                    // C^T block is [[b00, b10], [b01, b11]]
                    let (a, bb, c, d) = (b[0][0], b[1][0], b[0][1], b[1][1]);
                    let det = a * d - bb * c;
                    let sv = nalgebra::Matrix2::new(a, bb, c, d).singular_values();
                    let cond = sv.max() / sv.min();
                    if det == 0.0 || !cond.is_finite() || cond > MAX_CONDITION {
                        return Err(Error::Singular(cond));
                    }
                    let m = 1usize << q;
                    for i0 in (0..v.len()).filter(|i| i & m == 0) {
                        let (y0, y1) = (v[i0], v[i0 | m]);
                        v[i0] = (d * y0 - bb * y1) / det;
                        v[i0 | m] = (a * y1 - c * y0) / det;
                    }
                }
                v
            }
        };
        if negatives == NegativeHandling::Keep {
            return Ok(x);
        }
        for v in &mut x {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let s: f64 = x.iter().sum();
        if s > 0.0 {
            x.iter_mut().for_each(|v| *v /= s);
        }
        Ok(x)
    }
}

fn measured_distribution<R: Rng + ?Sized>(
    n_qubits: usize,
    prepared: usize,
    noise: &NoiseModel,
    shots: u64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut st = DensityState::zero(n_qubits);
    for q in (0..n_qubits).filter(|q| prepared >> q & 1 == 1) {
        st.apply_noisy(&Gate::X(q), &[], Some(noise))?;
    }
    let mut p = st.probabilities();
    apply_readout(&mut p, noise);
    let counts = multinomial(&p, shots, rng);
    let mut out = vec![0.0; 1 << n_qubits];
    for (b, c) in counts {
        out[b as usize] = c as f64 / shots as f64;
    }
    Ok(out)
}

/// Prepares basis states with noisy X gates, measures, and fills `C`.
pub fn calibrate<R: Rng + ?Sized>(
    noise: &NoiseModel,
    n_qubits: usize,
    shots: u64,
    mode: CalibrationMode,
    rng: &mut R,
) -> Result<ConfusionMatrix> {
    if shots == 0 {
        return Err(Error::Invalid("calibration needs at least one shot".into()));
    }
    match mode {
        CalibrationMode::Full => {
            let d = 1usize << n_qubits;
            let mut c = DMatrix::zeros(d, d);
            for i in 0..d {
                let row = measured_distribution(n_qubits, i, noise, shots, rng)?;
                for (j, v) in row.into_iter().enumerate() {
                    c[(i, j)] = v;
                }
            }
            Ok(ConfusionMatrix::Full(c))
        }
        CalibrationMode::Product => {
            let mut blocks = Vec::with_capacity(n_qubits);
            for q in 0..n_qubits {
                let mut b = [[0.0; 2]; 2];
                for (v, row) in b.iter_mut().enumerate() {
                    let dist = measured_distribution(n_qubits, v << q, noise, shots, rng)?;
                    let p1: f64 = dist.iter().enumerate().filter(|(j, _)| j >> q & 1 == 1).map(|(_, p)| p).sum();
                    *row = [1.0 - p1, p1];
                }
                blocks.push(b);
            }
            Ok(ConfusionMatrix::Product(blocks))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::task_rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_by_two_unfold_is_exact() {
        let c = ConfusionMatrix::from_dense(DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9])).unwrap();
        let x = c.unfold(&[0.9, 0.1]).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-12);
        let p = ConfusionMatrix::Product(vec![[[0.9, 0.1], [0.1, 0.9]]]);
        let y = p.unfold(&[0.9, 0.1]).unwrap();
        assert_abs_diff_eq!(y[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn keep_returns_quasi_probabilities() {
        let c = ConfusionMatrix::Product(vec![[[0.9, 0.1], [0.1, 0.9]]]);
        let x = c.unfold_with(&[0.95, 0.05], NegativeHandling::Keep).unwrap();
        assert!(x[1] < 0.0);
        assert_abs_diff_eq!(x[0] + x[1], 1.0, epsilon = 1e-12);
        assert_eq!(c.unfold(&[0.95, 0.05]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn identity_leaves_vector() {
        let c = ConfusionMatrix::identity(2);
        let p = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(c.unfold(&p).unwrap(), p.to_vec());
    }

    #[test]
    fn product_matches_dense_kron() {
        let blocks = vec![[[0.95, 0.05], [0.1, 0.9]], [[0.8, 0.2], [0.03, 0.97]]];
        let prod = ConfusionMatrix::Product(blocks);
        let full = ConfusionMatrix::Full(prod.dense());
        let p = [0.4, 0.1, 0.3, 0.2];
        let (a, b) = (prod.fold(&p), full.fold(&p));
        for k in 0..4 {
            assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-15);
        }
        let (ua, ub) = (prod.unfold(&a).unwrap(), full.unfold(&b).unwrap());
        for k in 0..4 {
            assert_abs_diff_eq!(ua[k], p[k], epsilon = 1e-12);
            assert_abs_diff_eq!(ub[k], p[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn inverse_is_adjoint_of_unfold() {
        let blocks = vec![[[0.95, 0.05], [0.1, 0.9]], [[0.8, 0.2], [0.03, 0.97]]];
        let f = [1.0, -2.0, 0.5, 3.0];
        let p = [0.1, 0.2, 0.3, 0.4];
        for c in [ConfusionMatrix::Product(blocks.clone()), ConfusionMatrix::Full(ConfusionMatrix::Product(blocks).dense())] {
            let g = c.apply_inverse(&f).unwrap();
            let x = c.unfold_with(&p, NegativeHandling::Keep).unwrap();
            let lhs: f64 = x.iter().zip(&f).map(|(a, b)| a * b).sum();
            let rhs: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn singular_is_rejected() {
        let c = ConfusionMatrix::from_dense(DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5])).unwrap();
        assert!(matches!(c.unfold(&[0.5, 0.5]), Err(Error::Singular(_))));
    }

    #[test]
    fn calibration_recovers_flip_rate() {
        let nm = NoiseModel::uniform(1, 0.0, 0.0, 0.1);
        let c = calibrate(&nm, 1, 10_000, CalibrationMode::Full, &mut task_rng(11, &[])).unwrap().dense();
        assert!((c[(0, 1)] - 0.1).abs() < 0.01 && (c[(1, 0)] - 0.1).abs() < 0.01);
        let zero = NoiseModel::noiseless(2);
        let c = calibrate(&zero, 2, 100, CalibrationMode::Product, &mut task_rng(1, &[])).unwrap();
        assert_eq!(c.dense(), DMatrix::identity(4, 4));
    }

    #[test]
    fn product_calibration_is_tensor_product() {
        let mut nm = NoiseModel::uniform(2, 0.0, 0.0, 0.05);
        nm.qubits[1].readout = crate::sim::ReadoutError { p1_given_0: 0.02, p0_given_1: 0.08 };
        let full = calibrate(&nm, 2, 40_000, CalibrationMode::Full, &mut task_rng(5, &[0])).unwrap().dense();
        let prod = calibrate(&nm, 2, 40_000, CalibrationMode::Product, &mut task_rng(5, &[1])).unwrap().dense();
        assert!((full - prod).amax() < 0.01);
    }
}
