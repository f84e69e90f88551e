//! Energy estimation from sampled (or exact) measurement distributions.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::CompiledAnsatz;
use crate::error::{Error, Result};
use crate::mapping::{ElectronCounter, MappingSpec};
use crate::mitigation::{ConfusionMatrix, NegativeHandling};
use crate::pauli::{group_commuting, MeasurementGroup, PauliString, PauliSum};
use crate::rng::task_rng;
use crate::sim::{measured_probabilities, multinomial, DensityState, NoiseModel, ShotTable};

/// Shots per measurement group used when none is configured.
pub const DEFAULT_SHOTS: u64 = 8192;

/// How outcomes are drawn and filtered.
#[derive(Debug, Clone, Default)]
pub struct EstimatorSettings {
    /// Shots per group; `None` uses the exact outcome distribution.
    pub shots: Option<u64>,
    /// Discard diagonal-group outcomes with the wrong electron number.
    pub post_select: bool,
    /// Electron number kept by post-selection.
    pub n_target: usize,
    pub noise: Option<NoiseModel>,
    /// Readout correction applied to every group before post-selection.
    pub readout_mitigation: Option<ConfusionMatrix>,
    pub negatives: NegativeHandling,
}

impl EstimatorSettings {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn noise(&self) -> Option<&NoiseModel> {
        self.noise.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupContribution {
    pub group: usize,
    pub contribution: f64,
    pub shots_kept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub value: f64,
    pub std_error: f64,
    pub per_group: Vec<GroupContribution>,
    /// Fraction of diagonal-group outcomes removed by post-selection.
    pub discarded_fraction: f64,
}

/// Measurement groups of a Hamiltonian plus its identity coefficient.
#[derive(Debug, Clone)]
pub struct MeasurementPlan {
    pub n_qubits: usize,
    pub groups: Vec<MeasurementGroup>,
    /// Real coefficients of each group's members, aligned with `members`.
    pub coefficients: Vec<Vec<f64>>,
    pub identity: f64,
}

impl MeasurementPlan {
    /// Greedy qubit-wise commuting plan for a Hermitian sum.
    pub fn new(h: &PauliSum) -> Result<Self> {
        if !h.is_hermitian(1e-10) {
            return Err(Error::Invalid("measured operator must be Hermitian".into()));
        }
        let identity = h.constant().re;
        let mut groups = Vec::new();
        let mut coefficients = Vec::new();
        for mut g in group_commuting(h) {
            g.members.retain(|p| !p.is_identity());
            if g.members.is_empty() {
                continue;
            }
            coefficients.push(g.members.iter().map(|p| h.coefficient(p).re).collect());
            groups.push(g);
        }
        Ok(Self { n_qubits: h.n_qubits(), groups, coefficients, identity })
    }

    /// Number of circuit executions the plan needs.
    pub fn n_circuits(&self) -> usize {
        self.groups.len()
    }
}

/// Measured eigenvalue of `p` for outcome `b` once its group is rotated to Z.
fn outcome_sign(p: &PauliString, b: u64) -> f64 {
    if (b & p.support()).count_ones() % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Removes diagonal-group outcomes whose decoded electron count differs from `n_target`.
pub fn post_select(table: &ShotTable, group: &MeasurementGroup, counter: &ElectronCounter, n_target: usize) -> Result<ShotTable> {
    if !group.is_diagonal {
        return Err(Error::NonDiagonalPostSelection);
    }
    if counter.n_qubits() != table.n_qubits {
        return Err(Error::QubitMismatch { left: counter.n_qubits(), right: table.n_qubits });
    }
    let mut out = table.clone();
    out.counts.retain(|&b, c| {
        let keep = counter.count(b) == n_target;
        if !keep {
            out.discarded += *c;
        }
        keep
    });
    Ok(out)
}

/// Post-processed outcome distribution of one group.
struct GroupDistribution {
    /// Normalized distribution used for expectations.
    probs: Vec<f64>,
    /// Measured frequencies before unfolding and post-selection.
    measured: Vec<f64>,
    /// Outcomes kept by post-selection; `None` keeps all.
    mask: Option<Vec<bool>>,
    kept_mass: f64,
    shots: Option<u64>,
}

impl GroupDistribution {
    fn kept(&self) -> f64 {
        self.shots.map_or(f64::INFINITY, |s| s as f64 * self.kept_mass)
    }

    fn mean(&self, f: impl Fn(u64) -> f64) -> f64 {
        self.probs.iter().enumerate().filter(|(_, p)| **p != 0.0).map(|(b, p)| p * f(b as u64)).sum()
    }

    /// Delta-method variance of the (post-selected, unfolded) mean of `f`.
    ///
    /// The centred observable `m(x)(f(x) - mean)` is pulled back through the
    /// inverse confusion matrix and its variance taken under the measured
    /// frequencies.
    fn variance(&self, f: impl Fn(u64) -> f64, mean: f64, unfold: Option<&ConfusionMatrix>) -> Result<f64> {
        let Some(shots) = self.shots else { return Ok(0.0) };
        let mut v: Vec<f64> = (0..self.measured.len())
            .map(|x| if self.mask.as_ref().is_none_or(|m| m[x]) { f(x as u64) - mean } else { 0.0 })
            .collect();
        if let Some(c) = unfold {
            v = c.apply_inverse(&v)?;
        }
        let (e1, e2) = self.measured.iter().zip(&v).fold((0.0, 0.0), |(a, b), (p, g)| (a + p * g, b + p * g * g));
        Ok((e2 - e1 * e1).max(0.0) / (shots as f64 * self.kept_mass * self.kept_mass))
    }
}

fn group_distribution(
    state: &DensityState,
    gi: usize,
    group: &MeasurementGroup,
    settings: &EstimatorSettings,
    counter: Option<&ElectronCounter>,
    seed: u64,
) -> Result<GroupDistribution> {
    let probs = measured_probabilities(state, &group.basis_rotation, settings.noise())?;
    let measured = match settings.shots {
        Some(shots) => {
            let mut rng = task_rng(seed, &[gi as u64]);
            let counts = multinomial(&probs, shots, &mut rng);
            ShotTable { group: gi, n_qubits: state.n_qubits(), counts, shots, discarded: 0 }.frequencies()
        }
        None => probs,
    };
    let mut p = match &settings.readout_mitigation {
        Some(c) => c.unfold_with(&measured, settings.negatives)?,
        None => measured.clone(),
    };
    let mut kept_mass = 1.0;
    let mut mask = None;
    if settings.post_select && group.is_diagonal {
        let counter = counter.ok_or_else(|| Error::Invalid("post-selection needs an electron counter".into()))?;
        let m: Vec<bool> = (0..p.len()).map(|b| counter.count(b as u64) == settings.n_target).collect();
        for (v, keep) in p.iter_mut().zip(&m) {
            if !keep {
                *v = 0.0;
            }
        }
        kept_mass = p.iter().sum();
        if !(kept_mass > 1e-15) {
            return Err(Error::AllShotsDiscarded { group: gi, shots: settings.shots.unwrap_or(0) });
        }
        p.iter_mut().for_each(|v| *v /= kept_mass);
        mask = Some(m);
    }
    Ok(GroupDistribution { probs: p, measured, mask, kept_mass, shots: settings.shots })
}

fn counter_for(settings: &EstimatorSettings, mapping: Option<&MappingSpec>) -> Result<Option<ElectronCounter>> {
    match (settings.post_select, mapping) {
        (false, _) => Ok(None),
        (true, Some(m)) => Ok(Some(ElectronCounter::new(m)?)),
        (true, None) => Err(Error::Invalid("post-selection needs the mapping of the register".into())),
    }
}

/// Estimates `Σ g_k ⟨P_k⟩` on a prepared state.
///
/// Groups run in parallel with per-group seeds derived from `seed`.
pub fn estimate_on_state(
    state: &DensityState,
    plan: &MeasurementPlan,
    mapping: Option<&MappingSpec>,
    settings: &EstimatorSettings,
    seed: u64,
) -> Result<EnergyEstimate> {
    if state.n_qubits() != plan.n_qubits {
        return Err(Error::QubitMismatch { left: state.n_qubits(), right: plan.n_qubits });
    }
    let counter = counter_for(settings, mapping)?;
    let parts: Vec<(GroupContribution, f64, f64)> = plan
        .groups
        .par_iter()
        .zip(plan.coefficients.par_iter())
        .enumerate()
        .map(|(gi, (g, coeffs))| {
            let d = group_distribution(state, gi, g, settings, counter.as_ref(), seed)?;
            let f = |b: u64| -> f64 { g.members.iter().zip(coeffs).map(|(p, c)| c * outcome_sign(p, b)).sum() };
            let mean = d.mean(f);
            let var = d.variance(f, mean, settings.readout_mitigation.as_ref())?;
            let disc = if g.is_diagonal { 1.0 - d.kept_mass } else { 0.0 };
            Ok((GroupContribution { group: gi, contribution: mean, shots_kept: d.kept() }, var, disc))
        })
        .collect::<Result<_>>()?;
    let value = plan.identity + parts.iter().map(|p| p.0.contribution).sum::<f64>();
    let std_error = parts.iter().map(|p| p.1).sum::<f64>().sqrt();
    let discarded_fraction = parts.iter().map(|p| p.2).fold(0.0, f64::max);
    Ok(EnergyEstimate { value, std_error, per_group: parts.into_iter().map(|p| p.0).collect(), discarded_fraction })
}

/// Per-string expectation values and standard errors on a prepared state.
///
/// Strings are grouped qubit-wise; diagonal ones are post-selected when enabled.
pub fn estimate_strings(
    state: &DensityState,
    strings: &[PauliString],
    mapping: Option<&MappingSpec>,
    settings: &EstimatorSettings,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let n = state.n_qubits();
    let mut sum = PauliSum::new(n).with_prune_threshold(0.0);
    for p in strings {
        if p.n_qubits() != n {
            return Err(Error::QubitMismatch { left: p.n_qubits(), right: n });
        }
        sum.add_string(1.0.into(), p.normalized());
    }
    let counter = counter_for(settings, mapping)?;
    let groups = group_commuting(&sum);
    let per_group: Vec<Vec<(PauliString, f64, f64)>> = groups
        .par_iter()
        .enumerate()
        .map(|(gi, g)| {
            let members: Vec<&PauliString> = g.members.iter().filter(|p| !p.is_identity()).collect();
            if members.is_empty() {
                return Ok(Vec::new());
            }
            let d = group_distribution(state, gi, g, settings, counter.as_ref(), seed)?;
            members
                .into_iter()
                .map(|p| {
                    let f = |b: u64| outcome_sign(p, b);
                    let m = d.mean(f);
                    Ok((*p, m, d.variance(f, m, settings.readout_mitigation.as_ref())?.sqrt()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let table: std::collections::HashMap<PauliString, (f64, f64)> =
        per_group.into_iter().flatten().map(|(p, m, s)| (p, (m, s))).collect();
    Ok(strings
        .iter()
        .map(|p| {
            let q = p.normalized();
            let ph = p.phase().to_complex().re;
            if q.is_identity() {
                (ph, 0.0)
            } else {
                let (m, s) = table[&q];
                (ph * m, s)
            }
        })
        .collect())
}

/// Runs the compiled circuit at `theta` and estimates the energy.
///
/// A plan with nothing to measure returns the identity coefficient without simulating.
pub fn estimate_energy(
    ansatz: &CompiledAnsatz,
    theta: &[f64],
    plan: &MeasurementPlan,
    settings: &EstimatorSettings,
    seed: u64,
) -> Result<EnergyEstimate> {
    ansatz.check_params(theta)?;
    if plan.groups.is_empty() {
        return Ok(EnergyEstimate { value: plan.identity, std_error: 0.0, per_group: Vec::new(), discarded_fraction: 0.0 });
    }
    let state = ansatz.circuit.run(theta, settings.noise())?;
    estimate_on_state(&state, plan, Some(&ansatz.mapping), settings, seed)
}

/// Energy on a grid of single-parameter angles, one derived seed per point.
pub fn scan_theta(
    ansatz: &CompiledAnsatz,
    plan: &MeasurementPlan,
    thetas: &[f64],
    settings: &EstimatorSettings,
    seed: u64,
) -> Result<Vec<EnergyEstimate>> {
    if ansatz.n_parameters() != 1 {
        return Err(Error::Invalid(format!("theta scan needs a single-parameter ansatz, got {}", ansatz.n_parameters())));
    }
    thetas
        .par_iter()
        .enumerate()
        .map(|(k, &t)| estimate_energy(ansatz, &[t], plan, settings, crate::rng::derive_seed(seed, &[k as u64])))
        .collect()
}

pub fn scan_csv(thetas: &[f64], estimates: &[EnergyEstimate]) -> String {
    let mut s = String::from("theta_rad,energy_eV,std_err_eV,discarded_fraction\n");
    for (t, e) in thetas.iter().zip(estimates) {
        let _ = writeln!(s, "{t:.17e},{:.17e},{:.17e},{:.17e}", e.value, e.std_error, e.discarded_fraction);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{build_uccsd_with, compile, ExcitationSelection};
    use crate::fci::solve_fci;
    use crate::fermion::to_fermion_operator;
    use crate::fixtures::build_fixture;
    use crate::mapping::{map_operator, SectorParities};
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn nv() -> (CompiledAnsatz, PauliSum, f64) {
        let f = build_fixture("triplet-nv-shape").unwrap();
        let spec = MappingSpec::parity_tapered(6, SectorParities::for_electrons(2, 2));
        let a = build_uccsd_with(f.space(), f.reference, ExcitationSelection::ConfigurationPreserving).unwrap();
        let c = compile(&a, &spec, 1).unwrap();
        let h = map_operator(&to_fermion_operator(&f.hamiltonian), &spec).unwrap();
        let e0 = solve_fci(&f.hamiltonian, 4, Some(0.0)).unwrap().ground_energy();
        (c, h, e0)
    }

    #[test]
    fn exact_mode_matches_dense() {
        let (c, h, e0) = nv();
        let plan = MeasurementPlan::new(&h).unwrap();
        for t in [-2.0, 0.0, 0.4, FRAC_PI_2, 2.9] {
            let e = estimate_energy(&c, &[t], &plan, &EstimatorSettings::exact(), 0).unwrap();
            let psi = c.statevector(&[t]).unwrap();
            let dense = h.expectation_vector(&psi).unwrap().re;
            assert_abs_diff_eq!(e.value, dense, epsilon = 1e-10);
            assert_eq!(e.std_error, 0.0);
        }
        let e = estimate_energy(&c, &[FRAC_PI_2], &plan, &EstimatorSettings::exact(), 0).unwrap();
        assert_abs_diff_eq!(e.value, e0, epsilon = 1e-10);
    }

    #[test]
    fn identity_only_runs_nothing() {
        let (c, _, _) = nv();
        let plan = MeasurementPlan::new(&PauliSum::identity(4, 2.5)).unwrap();
        assert_eq!(plan.n_circuits(), 0);
        let e = estimate_energy(&c, &[0.3], &plan, &EstimatorSettings::exact(), 0).unwrap();
        assert_eq!(e.value, 2.5);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn noiseless_shots_within_three_sigma() {
        let (c, h, e0) = nv();
        let plan = MeasurementPlan::new(&h).unwrap();
        let s = EstimatorSettings { shots: Some(DEFAULT_SHOTS), ..Default::default() };
        let e = estimate_energy(&c, &[FRAC_PI_2], &plan, &s, 42).unwrap();
        assert!((e.value - e0).abs() <= 3.0 * e.std_error.max(1e-12), "{} vs {e0} ± {}", e.value, e.std_error);
        let again = estimate_energy(&c, &[FRAC_PI_2], &plan, &s, 42).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn post_select_filters_wrong_count() {
        let spec = MappingSpec::parity_tapered(6, SectorParities::for_electrons(2, 2));
        let counter = ElectronCounter::new(&spec).unwrap();
        let h = PauliSum::from_terms(4, [(1.0, "ZIII".parse().unwrap())]);
        let g = MeasurementPlan::new(&h).unwrap().groups.remove(0);
        let counts: BTreeMap<u64, u64> = [(0b1101, 4000), (0b0111, 4000), (0b0011, 192)].into_iter().collect();
        let t = ShotTable { group: 0, n_qubits: 4, counts, shots: 8192, discarded: 0 };
        let out = post_select(&t, &g, &counter, 4).unwrap();
        let bad = counter.count(0b0011) != 4;
        assert_eq!(out.counts.contains_key(&0b0011), !bad);
        assert_eq!(out.total() + out.discarded, 8192);
        assert_eq!(post_select(&out, &g, &counter, 4).unwrap(), out);
        let empty = ShotTable { n_qubits: 4, ..Default::default() };
        assert_eq!(post_select(&empty, &g, &counter, 4).unwrap().discarded, 0);
        let mut nd = g.clone();
        nd.is_diagonal = false;
        assert!(matches!(post_select(&t, &nd, &counter, 4), Err(Error::NonDiagonalPostSelection)));
    }

    #[test]
    fn all_discarded_is_an_error() {
        let (c, h, _) = nv();
        let plan = MeasurementPlan::new(&h).unwrap();
        let s = EstimatorSettings { post_select: true, n_target: 3, ..Default::default() };
        assert!(matches!(estimate_energy(&c, &[0.1], &plan, &s, 0), Err(Error::AllShotsDiscarded { .. })));
    }

    #[test]
    fn linear_in_hamiltonian() {
        let (c, h, _) = nv();
        let h2 = PauliSum::from_terms(4, [(0.7, "XIXI".parse().unwrap()), (-0.2, "IZYY".parse().unwrap())]);
        let sum = h.add(&h2).unwrap();
        let s = EstimatorSettings { noise: Some(NoiseModel::uniform(4, 0.01, 0.02, 0.03)), ..Default::default() };
        let e = |op: &PauliSum| estimate_energy(&c, &[0.8], &MeasurementPlan::new(op).unwrap(), &s, 0).unwrap().value;
        assert_abs_diff_eq!(e(&sum), e(&h) + e(&h2), epsilon = 1e-12);
    }

    #[test]
    fn scan_minimum_and_period() {
        let (c, h, _) = nv();
        let plan = MeasurementPlan::new(&h).unwrap();
        let grid: Vec<f64> = (0..12).map(|k| -PI + k as f64 * 2.0 * PI / 12.0).collect();
        let es = scan_theta(&c, &plan, &grid, &EstimatorSettings::exact(), 0).unwrap();
        let best = (0..12).min_by(|&a, &b| es[a].value.total_cmp(&es[b].value)).unwrap();
        let nearest = (0..12).min_by(|&a, &b| (grid[a] - FRAC_PI_2).abs().total_cmp(&(grid[b] - FRAC_PI_2).abs())).unwrap();
        assert_eq!(best, nearest);
        let shifted: Vec<f64> = grid.iter().map(|t| t + 2.0 * PI).collect();
        let es2 = scan_theta(&c, &plan, &shifted, &EstimatorSettings::exact(), 0).unwrap();
        for (a, b) in es.iter().zip(&es2) {
            assert_abs_diff_eq!(a.value, b.value, epsilon = 1e-9);
        }
        let csv = scan_csv(&grid, &es);
        assert!(csv.starts_with("theta_rad,energy_eV,std_err_eV,discarded_fraction\n"));
        assert_eq!(csv.lines().count(), 13);
    }

    #[test]
    fn strings_match_energy() {
        let (c, h, _) = nv();
        let s = EstimatorSettings { noise: Some(NoiseModel::uniform(4, 0.01, 0.02, 0.0)), post_select: true, n_target: 4, ..Default::default() };
        let st = c.circuit.run(&[FRAC_PI_2], s.noise()).unwrap();
        let terms = h.real_terms();
        let strings: Vec<PauliString> = terms.iter().map(|t| t.0).collect();
        let vals = estimate_strings(&st, &strings, Some(&c.mapping), &s, 0).unwrap();
        let from_strings: f64 = terms.iter().zip(&vals).map(|(t, v)| t.1 * v.0).sum();
        let e = estimate_on_state(&st, &MeasurementPlan::new(&h).unwrap(), Some(&c.mapping), &s, 0).unwrap();
        assert_abs_diff_eq!(from_strings, e.value, epsilon = 1e-12);
    }
}
