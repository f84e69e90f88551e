use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric-or-not bit-flip probabilities at readout.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReadoutError {
    /// P(read 1 | prepared 0).
    pub p1_given_0: f64,
    /// P(read 0 | prepared 1).
    pub p0_given_1: f64,
}

impl ReadoutError {
    pub fn symmetric(p: f64) -> Self {
        Self { p1_given_0: p, p0_given_1: p }
    }

    /// Column-stochastic 2x2 matrix `C[read][true]`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[1.0 - self.p1_given_0, self.p0_given_1], [self.p1_given_0, 1.0 - self.p0_given_1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QubitNoise {
    pub p1: f64,
    pub readout: ReadoutError,
    pub t1_us: Option<f64>,
    pub t2_us: Option<f64>,
}

/// Gate durations used when thermal relaxation is switched on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingTimes {
    pub gate_1q_us: f64,
    pub gate_2q_us: f64,
}

/// Noise acting on the virtual register.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseModel {
    pub qubits: Vec<QubitNoise>,
    /// Two-qubit depolarizing probability keyed by sorted virtual pair.
    pub pairs: BTreeMap<(usize, usize), f64>,
    /// Used for pairs absent from `pairs`.
    pub default_p2: f64,
    pub damping: Option<DampingTimes>,
}

impl NoiseModel {
    pub fn noiseless(n_qubits: usize) -> Self {
        Self { qubits: vec![QubitNoise::default(); n_qubits], ..Default::default() }
    }

    pub fn uniform(n_qubits: usize, p1: f64, p2: f64, readout: f64) -> Self {
        let q = QubitNoise { p1, readout: ReadoutError::symmetric(readout), t1_us: None, t2_us: None };
        Self { qubits: vec![q; n_qubits], pairs: BTreeMap::new(), default_p2: p2, damping: None }
    }

    pub fn p1(&self, q: usize) -> f64 {
        self.qubits.get(q).map_or(0.0, |n| n.p1)
    }

    pub fn p2(&self, a: usize, b: usize) -> f64 {
        *self.pairs.get(&(a.min(b), a.max(b))).unwrap_or(&self.default_p2)
    }

    pub fn readout(&self, q: usize) -> ReadoutError {
        self.qubits.get(q).map_or_else(ReadoutError::default, |n| n.readout)
    }

    pub fn has_readout_error(&self) -> bool {
        self.qubits.iter().any(|q| q.readout != ReadoutError::default())
    }

    /// Copy with readout errors removed.
    pub fn without_readout(&self) -> Self {
        let mut m = self.clone();
        for q in &mut m.qubits {
            q.readout = ReadoutError::default();
        }
        m
    }

    /// Amplitude-damping probability and coherence factor for an interval `t_us`.
    pub fn damping_factors(&self, q: usize, t_us: f64) -> (f64, f64) {
        let Some(n) = self.qubits.get(q) else { return (0.0, 1.0) };
        let gamma = n.t1_us.map_or(0.0, |t1| 1.0 - (-t_us / t1).exp());
        // pure dephasing rate 1/T2 - 1/(2 T1)
        let rate = match (n.t1_us, n.t2_us) {
            (Some(t1), Some(t2)) => (1.0 / t2 - 0.5 / t1).max(0.0),
            (None, Some(t2)) => 1.0 / t2,
            _ => 0.0,
        };
        (gamma, (-t_us * rate).exp())
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |v: f64, what: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Noise(format!("{what} = {v} is not a probability")))
            }
        };
        for (i, q) in self.qubits.iter().enumerate() {
            prob(q.p1, &format!("qubit {i} p1"))?;
            prob(q.readout.p1_given_0, &format!("qubit {i} readout"))?;
            prob(q.readout.p0_given_1, &format!("qubit {i} readout"))?;
            if q.readout.p1_given_0 + q.readout.p0_given_1 >= 1.0 {
                return Err(Error::Noise(format!("qubit {i} readout matrix is singular")));
            }
            for t in [q.t1_us, q.t2_us].into_iter().flatten() {
                if t <= 0.0 {
                    return Err(Error::Noise(format!("qubit {i} has non-positive relaxation time")));
                }
            }
            if let (Some(t1), Some(t2)) = (q.t1_us, q.t2_us) {
                if t2 > 2.0 * t1 {
                    return Err(Error::Noise(format!("qubit {i} violates T2 <= 2 T1")));
                }
            }
        }
        prob(self.default_p2, "default p2")?;
        for (&(a, b), &p) in &self.pairs {
            prob(p, &format!("pair [{a},{b}] p2"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitCalibration {
    pub qubit: usize,
    pub t1_us: Option<f64>,
    pub t2_us: Option<f64>,
    /// Single-qubit gate error.
    pub x_err: f64,
    pub readout_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairCalibration {
    pub qubits: [usize; 2],
    pub cx_err: f64,
}

/// Device calibration table on physical qubits, loaded from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceCalibration {
    #[serde(default)]
    pub name: String,
    /// Physical qubit for each virtual qubit. Identity when absent.
    #[serde(default)]
    pub layout: Option<Vec<usize>>,
    pub qubits: Vec<QubitCalibration>,
    #[serde(default)]
    pub pairs: Vec<PairCalibration>,
    #[serde(default)]
    pub damping: Option<DampingTimes>,
}

impl DeviceCalibration {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cal: DeviceCalibration = toml::from_str(text).map_err(|e| Error::Noise(e.to_string()))?;
        cal.validate()?;
        Ok(cal)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("calibration serializes")
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for q in &self.qubits {
            if !seen.insert(q.qubit) {
                return Err(Error::Noise(format!("physical qubit {} listed twice", q.qubit)));
            }
        }
        for p in &self.pairs {
            if p.qubits[0] == p.qubits[1] || p.qubits.iter().any(|q| !seen.contains(q)) {
                return Err(Error::Noise(format!("bad pair {:?}", p.qubits)));
            }
        }
        if let Some(l) = &self.layout {
            let uniq: std::collections::BTreeSet<_> = l.iter().collect();
            if uniq.len() != l.len() {
                return Err(Error::Noise("layout repeats a physical qubit".into()));
            }
        }
        Ok(())
    }

    /// Noise model on `n_qubits` virtual qubits.
    ///
    /// Uncalibrated pairs fall back to the mean listed CX error.
    /// With `damping` false, T1/T2 are ignored.
    pub fn noise_model(&self, n_qubits: usize, damping: bool) -> Result<NoiseModel> {
        let layout: Vec<usize> = match &self.layout {
            Some(l) => {
                if l.len() < n_qubits {
                    return Err(Error::Noise(format!("layout maps {} qubits, need {n_qubits}", l.len())));
                }
                l[..n_qubits].to_vec()
            }
            None => (0..n_qubits).collect(),
        };
        let by_index: BTreeMap<usize, &QubitCalibration> = self.qubits.iter().map(|q| (q.qubit, q)).collect();
        let mut qubits = Vec::with_capacity(n_qubits);
        for (v, &phys) in layout.iter().enumerate() {
            let cal = by_index
                .get(&phys)
                .ok_or_else(|| Error::Noise(format!("virtual qubit {v} maps to uncalibrated physical {phys}")))?;
            qubits.push(QubitNoise {
                p1: cal.x_err,
                readout: ReadoutError::symmetric(cal.readout_err),
                t1_us: if damping { cal.t1_us } else { None },
                t2_us: if damping { cal.t2_us } else { None },
            });
        }
        let phys_pairs: BTreeMap<(usize, usize), f64> = self
            .pairs
            .iter()
            .map(|p| ((p.qubits[0].min(p.qubits[1]), p.qubits[0].max(p.qubits[1])), p.cx_err))
            .collect();
        let default_p2 = if self.pairs.is_empty() {
            0.0
        } else {
            self.pairs.iter().map(|p| p.cx_err).sum::<f64>() / self.pairs.len() as f64
        };
        let mut pairs = BTreeMap::new();
        for a in 0..n_qubits {
            for b in a + 1..n_qubits {
                let (pa, pb) = (layout[a], layout[b]);
                if let Some(&e) = phys_pairs.get(&(pa.min(pb), pa.max(pb))) {
                    pairs.insert((a, b), e);
                }
            }
        }
        let damping = if damping {
            Some(self.damping.ok_or_else(|| Error::Noise("damping requested without gate times".into()))?)
        } else {
            None
        };
        let model = NoiseModel { qubits, pairs, default_p2, damping };
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const SAMPLE: &str = r#"
name = "toy"
[[qubits]]
qubit = 0
t1_us = 50.0
t2_us = 30.0
x_err = 4e-4
readout_err = 0.04
[[qubits]]
qubit = 1
t1_us = 100.0
t2_us = 100.0
x_err = 2e-4
readout_err = 0.02
[[qubits]]
qubit = 2
x_err = 3e-4
readout_err = 0.03
[[pairs]]
qubits = [1, 0]
cx_err = 0.01
[[pairs]]
qubits = [1, 2]
cx_err = 0.02
[damping]
gate_1q_us = 0.035
gate_2q_us = 0.3
"#;

    #[test]
    fn identity_layout() {
        let cal = DeviceCalibration::from_toml(SAMPLE).unwrap();
        let m = cal.noise_model(3, false).unwrap();
        assert_abs_diff_eq!(m.p1(1), 2e-4);
        assert_abs_diff_eq!(m.p2(0, 1), 0.01);
        assert_abs_diff_eq!(m.p2(2, 1), 0.02);
        assert_abs_diff_eq!(m.p2(0, 2), 0.015);
        assert_eq!(m.readout(0), ReadoutError::symmetric(0.04));
        assert!(m.damping.is_none());
    }

    #[test]
    fn custom_layout_and_damping() {
        let mut cal = DeviceCalibration::from_toml(SAMPLE).unwrap();
        cal.layout = Some(vec![2, 1]);
        let m = cal.noise_model(2, true).unwrap();
        assert_abs_diff_eq!(m.p1(0), 3e-4);
        assert_abs_diff_eq!(m.p2(0, 1), 0.02);
        let (g, _) = m.damping_factors(1, 0.3);
        assert_abs_diff_eq!(g, 1.0 - (-0.003f64).exp(), epsilon = 1e-15);
        assert!(cal.noise_model(3, false).is_err());
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(DeviceCalibration::from_toml("qubits = []\nbogus = 1").is_err());
        let twice = "[[qubits]]\nqubit=0\nx_err=0\nreadout_err=0\n[[qubits]]\nqubit=0\nx_err=0\nreadout_err=0\n";
        assert!(DeviceCalibration::from_toml(twice).is_err());
        let mut m = NoiseModel::uniform(1, 0.0, 0.0, 0.6);
        assert!(m.validate().is_err());
        m = NoiseModel::uniform(1, 1.5, 0.0, 0.0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cal = DeviceCalibration::from_toml(SAMPLE).unwrap();
        assert_eq!(DeviceCalibration::from_toml(&cal.to_toml()).unwrap(), cal);
    }
}
