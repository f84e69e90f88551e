use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{build_uccsd_with, ExcitationSelection};
use crate::error::{Error, Result};
use crate::estimation::{estimate_strings, EstimatorSettings};
use crate::fci::Determinant;
use crate::fermion::{to_fermion_operator, ActiveSpace, FermionHamiltonian, FermionOperator};
use crate::mapping::{map_operator, MappingSpec};
use crate::mitigation::{fit, FitKind, ZnePoint, ZneSeries};
use crate::pauli::{PauliString, PauliSum};
use crate::sim::DensityState;

pub const DEFAULT_S_THRESHOLD_NOISELESS: f64 = 1e-8;
pub const DEFAULT_S_THRESHOLD_NOISY: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct QseOperator {
    pub name: String,
    pub op: FermionOperator,
}

/// Identity plus every S_z-conserving single and double excitation out of
/// each reference determinant, without duplicates.
pub fn qse_operators(space: &ActiveSpace, references: &[Determinant]) -> Result<Vec<QseOperator>> {
    let n = space.n_modes();
    let mut out = vec![QseOperator { name: "I".into(), op: FermionOperator::constant(n, 1.0) }];
    let mut seen = std::collections::HashSet::new();
    for &d in references {
        for e in build_uccsd_with(space, d, ExcitationSelection::SpinConserving)?.excitations {
            if seen.insert((e.from.clone(), e.to.clone())) {
                let name = e.name().trim_start_matches("theta").trim_matches(|c| c == '[' || c == ']').to_string();
                out.push(QseOperator { name, op: e.operator(n) });
            }
        }
    }
    Ok(out)
}

/// Subspace matrices `H_ij = <O_i^† H O_j>` and `S_ij = <O_i^† O_j>` with per-element errors.
#[derive(Debug, Clone, PartialEq)]
pub struct QseProblem {
    pub operator_names: Vec<String>,
    pub h: DMatrix<Complex64>,
    pub s: DMatrix<Complex64>,
    pub h_err: DMatrix<f64>,
    pub s_err: DMatrix<f64>,
}

impl QseProblem {
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// Replaces `H` and `S` by their Hermitian parts.
    pub fn hermitize(&mut self) {
        self.h = (&self.h + self.h.adjoint()) * Complex64::new(0.5, 0.0);
        self.s = (&self.s + self.s.adjoint()) * Complex64::new(0.5, 0.0);
    }

    /// Element-wise mean of repeated measurements; errors become standard errors of the mean.
    pub fn mean(problems: &[QseProblem]) -> Result<QseProblem> {
        let first = problems.first().ok_or_else(|| Error::Invalid("no QSE problems to average".into()))?;
        let k = first.dim();
        if problems.iter().any(|p| p.dim() != k) {
            return Err(Error::Invalid("QSE problems differ in dimension".into()));
        }
        let m = problems.len() as f64;
        let avg = |get: &dyn Fn(&QseProblem) -> &DMatrix<Complex64>| {
            problems.iter().fold(DMatrix::zeros(k, k), |acc, p| acc + get(p)) / Complex64::new(m, 0.0)
        };
        let (h, s) = (avg(&|p| &p.h), avg(&|p| &p.s));
        let sem = |get: &dyn Fn(&QseProblem) -> &DMatrix<f64>, centre: &DMatrix<Complex64>, vals: &dyn Fn(&QseProblem) -> &DMatrix<Complex64>| {
            if problems.len() < 2 {
                return get(first).clone();
            }
            DMatrix::from_fn(k, k, |i, j| {
                let ss: f64 = problems.iter().map(|p| (vals(p)[(i, j)] - centre[(i, j)]).norm_sqr()).sum();
                (ss / (m - 1.0) / m).sqrt()
            })
        };
        let h_err = sem(&|p| &p.h_err, &h, &|p| &p.h);
        let s_err = sem(&|p| &p.s_err, &s, &|p| &p.s);
        let mut out = QseProblem { operator_names: first.operator_names.clone(), h, s, h_err, s_err };
        out.hermitize();
        Ok(out)
    }

    /// Largest `|M - M^†|` entry over both matrices.
    pub fn max_asymmetry(&self) -> f64 {
        let h = (&self.h - self.h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let s = (&self.s - self.s.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        h.max(s)
    }
}

type Terms = Vec<(PauliString, Complex64)>;

fn terms_of(s: &PauliSum) -> Terms {
    s.iter().map(|(p, c)| (*p, *c)).collect()
}

/// Measures the subspace matrices on `state`.
///
/// Every Pauli string needed by any element is estimated once; each element
/// is then the corresponding weighted sum. Errors add in quadrature.
pub fn build_qse(
    state: &DensityState,
    h: &FermionHamiltonian,
    operators: &[QseOperator],
    mapping: &MappingSpec,
    settings: &EstimatorSettings,
    seed: u64,
) -> Result<QseProblem> {
    if operators.is_empty() {
        return Err(Error::Invalid("QSE needs at least one expansion operator".into()));
    }
    let hq = map_operator(&to_fermion_operator(h), mapping)?;
    let ops: Vec<PauliSum> = operators.iter().map(|o| map_operator(&o.op, mapping)).collect::<Result<_>>()?;
    let k = ops.len();
    let h_ops: Vec<PauliSum> = ops.par_iter().map(|o| hq.multiply(o)).collect::<Result<_>>()?;
    let adj: Vec<PauliSum> = ops.iter().map(PauliSum::adjoint).collect();
    let elements: Vec<(Terms, Terms)> = (0..k * k)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / k, idx % k);
            Ok((terms_of(&adj[i].multiply(&h_ops[j])?), terms_of(&adj[i].multiply(&ops[j])?)))
        })
        .collect::<Result<_>>()?;
    let mut index: HashMap<PauliString, usize> = HashMap::new();
    let mut strings = Vec::new();
    for (a, b) in &elements {
        for (p, _) in a.iter().chain(b) {
            index.entry(*p).or_insert_with(|| {
                strings.push(*p);
                strings.len() - 1
            });
        }
    }
    let values = estimate_strings(state, &strings, Some(mapping), settings, seed)?;
    let eval = |t: &Terms| -> (Complex64, f64) {
        let mut v = Complex64::new(0.0, 0.0);
        let mut var = 0.0;
        for (p, c) in t {
            let (m, s) = values[index[p]];
            v += c * m;
            var += c.norm_sqr() * s * s;
        }
        (v, var.sqrt())
    };
    let mut out = QseProblem {
        operator_names: operators.iter().map(|o| o.name.clone()).collect(),
        h: DMatrix::zeros(k, k),
        s: DMatrix::zeros(k, k),
        h_err: DMatrix::zeros(k, k),
        s_err: DMatrix::zeros(k, k),
    };
    for (idx, (a, b)) in elements.iter().enumerate() {
        let (i, j) = (idx / k, idx % k);
        (out.h[(i, j)], out.h_err[(i, j)]) = eval(a);
        (out.s[(i, j)], out.s_err[(i, j)]) = eval(b);
    }
    out.hermitize();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QseSolution {
    /// Ascending.
    pub energies: Vec<f64>,
    /// Eigenvectors in the original operator basis.
    pub vectors: Vec<DVector<Complex64>>,
    pub retained: usize,
    pub s_eigenvalues: Vec<f64>,
}

/// Canonical orthogonalization followed by an ordinary Hermitian eigensolve.
pub fn solve_generalized(problem: &QseProblem, s_threshold: f64) -> Result<QseSolution> {
    let asym = problem.max_asymmetry();
    if asym > 1e-8 {
        return Err(Error::NotHermitian(asym));
    }
    let se = problem.s.clone().symmetric_eigen();
    let keep: Vec<usize> = (0..se.eigenvalues.len()).filter(|&i| se.eigenvalues[i] >= s_threshold).collect();
    if keep.is_empty() {
        return Err(Error::EmptySubspace(s_threshold));
    }
    let n = problem.dim();
    let x = DMatrix::from_fn(n, keep.len(), |r, c| se.eigenvectors[(r, keep[c])] / se.eigenvalues[keep[c]].sqrt());
    let hp = x.adjoint() * &problem.h * &x;
    let hp = (&hp + hp.adjoint()) * Complex64::new(0.5, 0.0);
    let he = hp.symmetric_eigen();
    let mut order: Vec<usize> = (0..keep.len()).collect();
    order.sort_by(|&a, &b| he.eigenvalues[a].total_cmp(&he.eigenvalues[b]));
    let mut s_eigenvalues: Vec<f64> = se.eigenvalues.iter().copied().collect();
    s_eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok(QseSolution {
        energies: order.iter().map(|&i| he.eigenvalues[i]).collect(),
        vectors: order.iter().map(|&i| &x * he.eigenvectors.column(i)).collect(),
        retained: keep.len(),
        s_eigenvalues,
    })
}

/// Zero-noise subspace matrices from repeated measurements at several
/// replication factors.
///
/// Real and imaginary parts of every element are fitted independently.
/// Diagonal elements use `diagonal`, the rest `off_diagonal`; imaginary
/// parts fall back to a linear fit when `Exponential` is requested.
/// Returns the extrapolated problem and any fit warnings.
pub fn extrapolate_problems(
    runs: &[(usize, Vec<QseProblem>)],
    diagonal: FitKind,
    off_diagonal: FitKind,
) -> Result<(QseProblem, Vec<String>)> {
    let first = runs.first().and_then(|r| r.1.first()).ok_or_else(|| Error::Invalid("no QSE runs to extrapolate".into()))?;
    let k = first.dim();
    if runs.iter().any(|(_, ps)| ps.is_empty() || ps.iter().any(|p| p.dim() != k)) {
        return Err(Error::Invalid("QSE runs differ in dimension or are empty".into()));
    }
    let fit_part = |kind: FitKind, get: &dyn Fn(&QseProblem) -> f64| -> Result<(f64, f64, Vec<String>)> {
        let series = ZneSeries {
            points: runs.iter().map(|(n, ps)| ZnePoint::from_values(*n, ps.iter().map(get).collect())).collect(),
        };
        let f = fit(&series, kind)?;
        Ok((f.zero_noise, f.zero_noise_sigma, f.warnings))
    };
    let cells: Vec<(usize, usize)> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
    type Cell = (Complex64, f64, Complex64, f64, Vec<String>);
    let fitted: Vec<Cell> = cells
        .par_iter()
        .map(|&(i, j)| {
            let kind = if i == j { diagonal } else { off_diagonal };
            let im_kind = if kind == FitKind::Exponential { FitKind::Linear } else { kind };
            let (hr, hs, mut w) = fit_part(kind, &|p| p.h[(i, j)].re)?;
            let (hi, _, w2) = fit_part(im_kind, &|p| p.h[(i, j)].im)?;
            let (sr, ss, w3) = fit_part(kind, &|p| p.s[(i, j)].re)?;
            let (si, _, w4) = fit_part(im_kind, &|p| p.s[(i, j)].im)?;
            w.extend(w2.into_iter().chain(w3).chain(w4).map(|m| format!("element ({i},{j}): {m}")));
            Ok((Complex64::new(hr, hi), hs, Complex64::new(sr, si), ss, w))
        })
        .collect::<Result<_>>()?;
    let mut out = QseProblem {
        operator_names: first.operator_names.clone(),
        h: DMatrix::zeros(k, k),
        s: DMatrix::zeros(k, k),
        h_err: DMatrix::zeros(k, k),
        s_err: DMatrix::zeros(k, k),
    };
    let mut warnings = Vec::new();
    for (&(i, j), (h, he, s, se, w)) in cells.iter().zip(fitted) {
        out.h[(i, j)] = h;
        out.h_err[(i, j)] = he;
        out.s[(i, j)] = s;
        out.s_err[(i, j)] = se;
        warnings.extend(w.into_iter().filter(|m| !m.ends_with("constant series")));
    }
    out.hermitize();
    Ok((out, warnings))
}

/// Indices of sorted `energies` grouped into runs closer than `tol`.
pub fn degeneracy_groups(energies: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, e) in energies.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (e - energies[*g.last().unwrap()]).abs() <= tol => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Gaps and spurious splittings of a computed spectrum against a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QseDiagnostics {
    /// Level indices of each reference degeneracy group, ascending.
    pub groups: Vec<Vec<usize>>,
    /// Group-mean energy minus the ground-group mean.
    pub gaps: Vec<f64>,
    pub reference_gaps: Vec<f64>,
    /// `max - min` of computed energies inside each group (zero for singletons).
    pub splittings: Vec<f64>,
}

impl QseDiagnostics {
    /// Groups are taken from `reference` at tolerance `tol`; only groups
    /// fully covered by `energies` are reported.
    pub fn new(energies: &[f64], reference: &[f64], tol: f64) -> Self {
        let groups: Vec<Vec<usize>> = degeneracy_groups(reference, tol)
            .into_iter()
            .filter(|g| g.iter().all(|&i| i < energies.len()))
            .collect();
        let mean = |v: &[f64], g: &[usize]| g.iter().map(|&i| v[i]).sum::<f64>() / g.len() as f64;
        let (e0, r0) = match groups.first() {
            Some(g) => (mean(energies, g), mean(reference, g)),
            None => (0.0, 0.0),
        };
        Self {
            gaps: groups.iter().map(|g| mean(energies, g) - e0).collect(),
            reference_gaps: groups.iter().map(|g| mean(reference, g) - r0).collect(),
            splittings: groups
                .iter()
                .map(|g| {
                    let v: Vec<f64> = g.iter().map(|&i| energies[i]).collect();
                    v.iter().copied().fold(f64::MIN, f64::max) - v.iter().copied().fold(f64::MAX, f64::min)
                })
                .collect(),
            groups,
        }
    }

    /// Mean `|gap - reference gap|` over excited groups.
    pub fn mean_gap_error(&self) -> f64 {
        let errs: Vec<f64> = self.gaps.iter().zip(&self.reference_gaps).skip(1).map(|(a, b)| (a - b).abs()).collect();
        if errs.is_empty() {
            0.0
        } else {
            errs.iter().sum::<f64>() / errs.len() as f64
        }
    }

    /// Largest splitting among groups that should be degenerate.
    pub fn max_degenerate_splitting(&self) -> f64 {
        self.groups.iter().zip(&self.splittings).filter(|(g, _)| g.len() > 1).map(|(_, s)| *s).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::compile;
    use crate::fci::solve_fci;
    use crate::fixtures::build_fixture;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn noiseless(name: &str) -> (QseProblem, Vec<f64>) {
        let f = build_fixture(name).unwrap();
        let (nu, nd) = f.spin_counts();
        let spec = MappingSpec::parity_tapered_for(f.space(), nu, nd);
        let a = build_uccsd_with(f.space(), f.reference, ExcitationSelection::ConfigurationPreserving).unwrap();
        let c = compile(&a, &spec, 1).unwrap();
        let theta = vec![FRAC_PI_2; c.n_parameters()];
        let state = c.circuit.run(&theta, None).unwrap();
        let ops = qse_operators(f.space(), &[f.reference]).unwrap();
        let p = build_qse(&state, &f.hamiltonian, &ops, &spec, &EstimatorSettings::exact(), 0).unwrap();
        let fci = solve_fci(&f.hamiltonian, f.n_electrons, Some(f.sz())).unwrap();
        (p, fci.energies.iter().copied().collect())
    }

    #[test]
    fn operator_counts() {
        let f = build_fixture("triplet-nv-shape").unwrap();
        assert_eq!(qse_operators(f.space(), &[f.reference]).unwrap().len(), 9);
        let f = build_fixture("triplet-vv-shape").unwrap();
        assert_eq!(qse_operators(f.space(), &[f.reference]).unwrap().len(), 16);
        let ops = qse_operators(f.space(), &[f.reference, f.reference]).unwrap();
        assert_eq!(ops.len(), 16);
    }

    #[test]
    fn noiseless_spectrum_equals_fci() {
        for name in ["hubbard1", "triplet-nv-shape", "triplet-vv-shape"] {
            let (p, fci) = noiseless(name);
            assert_abs_diff_eq!(p.s[(0, 0)].re, 1.0, epsilon = 1e-12);
            let sol = solve_generalized(&p, DEFAULT_S_THRESHOLD_NOISELESS).unwrap();
            assert_eq!(sol.energies.len(), fci.len(), "{name}");
            for (a, b) in sol.energies.iter().zip(&fci) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn h00_is_reference_energy() {
        let (p, fci) = noiseless("triplet-nv-shape");
        assert_abs_diff_eq!(p.h[(0, 0)].re, fci[0], epsilon = 1e-10);
    }

    #[test]
    fn identity_overlap_is_plain_eigenproblem() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -1.0]).map(|v| Complex64::new(v, 0.0));
        let p = QseProblem {
            operator_names: vec!["a".into(), "b".into()],
            h,
            s: DMatrix::identity(2, 2),
            h_err: DMatrix::zeros(2, 2),
            s_err: DMatrix::zeros(2, 2),
        };
        let sol = solve_generalized(&p, 1e-8).unwrap();
        let r = 1.25f64.sqrt();
        assert_abs_diff_eq!(sol.energies[0], -r, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.energies[1], r, epsilon = 1e-12);
    }

    #[test]
    fn duplicated_direction_is_dropped() {
        let (p, fci) = noiseless("triplet-nv-shape");
        let k = p.dim();
        // append a copy of operator 3
        let t = DMatrix::from_fn(k, k + 1, |r, c| if c == k { if r == 3 { 1.0 } else { 0.0 } } else if r == c { 1.0 } else { 0.0 })
            .map(|v| Complex64::new(v, 0.0));
        let q = QseProblem {
            operator_names: vec![String::new(); k + 1],
            h: t.adjoint() * &p.h * &t,
            s: t.adjoint() * &p.s * &t,
            h_err: DMatrix::zeros(k + 1, k + 1),
            s_err: DMatrix::zeros(k + 1, k + 1),
        };
        let sol = solve_generalized(&q, 1e-8).unwrap();
        assert_eq!(sol.retained, fci.len());
        for (a, b) in sol.energies.iter().zip(&fci) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn invariant_under_recombination() {
        let (p, _) = noiseless("triplet-nv-shape");
        let k = p.dim();
        let t = DMatrix::from_fn(k, k, |r, c| Complex64::new(if r == c { 1.0 } else { 0.1 * ((r * 7 + c * 3) % 5) as f64 - 0.2 }, 0.0));
        let q = QseProblem { h: t.adjoint() * &p.h * &t, s: t.adjoint() * &p.s * &t, ..p.clone() };
        let a = solve_generalized(&p, 1e-8).unwrap();
        let b = solve_generalized(&q, 1e-8).unwrap();
        for (x, y) in a.energies.iter().zip(&b.energies) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn empty_subspace_is_an_error() {
        let (mut p, _) = noiseless("hubbard1");
        p.s *= Complex64::new(1e-12, 0.0);
        assert!(matches!(solve_generalized(&p, 1e-8), Err(Error::EmptySubspace(_))));
    }

    #[test]
    fn degeneracy_diagnostics() {
        let reference = [-5.0, -4.0, -4.0, -3.0];
        let d = QseDiagnostics::new(&[-5.0, -4.1, -3.95, -2.9], &reference, 1e-6);
        assert_eq!(d.groups, vec![vec![0], vec![1, 2], vec![3]]);
        assert_abs_diff_eq!(d.splittings[1], 0.15, epsilon = 1e-12);
        assert_abs_diff_eq!(d.gaps[1], 0.975, epsilon = 1e-12);
        assert_abs_diff_eq!(d.mean_gap_error(), (0.025 + 0.1) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.max_degenerate_splitting(), 0.15, epsilon = 1e-12);
    }

    #[test]
    fn extrapolation_of_linear_drift() {
        let (p, _) = noiseless("triplet-nv-shape");
        let runs: Vec<(usize, Vec<QseProblem>)> = (1..=4)
            .map(|n| {
                let mut q = p.clone();
                q.h += DMatrix::from_element(p.dim(), p.dim(), Complex64::new(0.01 * n as f64, 0.0));
                (n, vec![q])
            })
            .collect();
        let (z, _) = extrapolate_problems(&runs, FitKind::Linear, FitKind::Linear).unwrap();
        assert!((z.h - &p.h).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn mean_of_repeats() {
        let (p, _) = noiseless("triplet-nv-shape");
        let mut a = p.clone();
        let mut b = p.clone();
        a.h[(0, 0)] += Complex64::new(0.1, 0.0);
        b.h[(0, 0)] -= Complex64::new(0.1, 0.0);
        let m = QseProblem::mean(&[a, b]).unwrap();
        assert!((&m.h - &p.h).iter().all(|v| v.norm() < 1e-12));
        assert_abs_diff_eq!(m.h_err[(0, 0)], 0.1, epsilon = 1e-12);
        assert_eq!(m.h_err[(1, 1)], 0.0);
        assert!(QseProblem::mean(&[]).is_err());
    }
}
