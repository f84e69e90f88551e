//! Mode drivers: set up the problem from a [`RunConfig`] and produce report artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use defectvqe_core::ansatz::{build_uccsd_with, compile_with, CompileOptions, CompiledAnsatz, UccsdAnsatz};
use defectvqe_core::estimation::{
    estimate_energy, estimate_on_state, scan_csv, scan_theta, EstimatorSettings, MeasurementPlan,
};
use defectvqe_core::fci::{solve_fci, Determinant, FciSolution};
use defectvqe_core::fermion::{parse_fcidump, to_fermion_operator, ActiveSpace, FermionHamiltonian};
use defectvqe_core::fixtures::build_fixture;
use defectvqe_core::mapping::{map_operator, MappingSpec};
use defectvqe_core::mitigation::{calibrate, fit, fit_exponential_with, run_zne, ExtrapolationFit, FitKind, ZneSeries};
use defectvqe_core::rng::{derive_seed, task_rng};
use defectvqe_core::sim::{DeviceCalibration, NoiseModel};
use defectvqe_core::solvers::{
    build_qse, extrapolate_problems, minimize, qse_operators, run_vqe, solve_generalized, trace_csv, OptimizerConfig,
    OptimizerKind, QseDiagnostics, QseProblem, DEFAULT_S_THRESHOLD_NOISELESS, DEFAULT_S_THRESHOLD_NOISY,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, MappingChoice, Mode, QseReference, RunConfig, CASABLANCA_TOML};

/// Seed streams derived from the top-level seed.
mod stream {
    pub const CALIBRATION: u64 = 1;
    pub const VQE: u64 = 2;
    pub const SCAN: u64 = 3;
    pub const ZNE: u64 = 4;
    pub const QSE: u64 = 5;
    pub const QSE_VQE: u64 = 6;
    pub const BOOTSTRAP: u64 = 7;
}

/// One output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn json(name: &str, value: &Value) -> Self {
        let mut contents = serde_json::to_string_pretty(value).expect("report serializes");
        contents.push('\n');
        Self { name: name.to_string(), contents }
    }
}

/// Everything a mode needs, resolved from the config.
pub struct Problem {
    pub label: String,
    pub hamiltonian: FermionHamiltonian,
    pub n_electrons: usize,
    pub sz: f64,
    pub reference: Determinant,
    pub mapping: MappingSpec,
    pub ansatz: UccsdAnsatz,
    pub noise: Option<NoiseModel>,
    pub fci: FciSolution,
    pub plan: MeasurementPlan,
    pub merge_first_generator: bool,
}

fn cfg_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

impl Problem {
    pub fn from_config(cfg: &RunConfig) -> anyhow::Result<Self> {
        let (label, mut hamiltonian, fixture_ref, default_n, default_twice_sz) = match (&cfg.hamiltonian.fixture, &cfg.hamiltonian.fcidump) {
            (Some(name), _) => {
                let f = build_fixture(name)?;
                (f.name.to_string(), f.hamiltonian.clone(), Some(f.reference), Some(f.n_electrons), Some(f.twice_sz))
            }
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let parsed = parse_fcidump(&text)?;
                (path.display().to_string(), parsed.hamiltonian, None, None, parsed.ms2)
            }
            (None, None) => return Err(cfg_err("no Hamiltonian source")),
        };
        let n_electrons = cfg.sector.n_electrons.or(default_n).ok_or_else(|| cfg_err("sector.n_electrons is required"))?;
        let space = ActiveSpace::new(hamiltonian.space.n_spatial, n_electrons).map_err(|e| cfg_err(e.to_string()))?;
        hamiltonian.space = space;
        let twice_sz = match cfg.sector.sz {
            Some(s) => (2.0 * s).round() as i64,
            None => default_twice_sz.unwrap_or((n_electrons % 2) as i64),
        };
        let n = n_electrons as i64;
        if (n + twice_sz) % 2 != 0 || twice_sz.abs() > n || (n + twice_sz) / 2 > space.n_spatial as i64 || (n - twice_sz) / 2 > space.n_spatial as i64 {
            return Err(cfg_err(format!("S_z = {} is impossible for {n_electrons} electrons in {} orbitals", twice_sz as f64 / 2.0, space.n_spatial)));
        }
        let (n_up, n_down) = (((n + twice_sz) / 2) as usize, ((n - twice_sz) / 2) as usize);
        let reference = match &cfg.ansatz.reference {
            Some(modes) => {
                let d = Determinant::from_modes(modes);
                if d.n_electrons() != n_electrons || modes.iter().any(|&m| m >= space.n_modes()) || d.twice_sz(&space) != twice_sz {
                    return Err(cfg_err(format!("ansatz.reference {modes:?} is not in the ({n_electrons}e, S_z={}) sector", twice_sz as f64 / 2.0)));
                }
                d
            }
            None => match fixture_ref {
                Some(d) if d.n_electrons() == n_electrons && d.twice_sz(&space) == twice_sz => d,
                _ => {
                    let modes: Vec<usize> = (0..n_up).map(|p| space.up(p)).chain((0..n_down).map(|p| space.down(p))).collect();
                    Determinant::from_modes(&modes)
                }
            },
        };
        let mapping = match (cfg.mapping.kind, cfg.mapping.taper) {
            (MappingChoice::JordanWigner, _) => MappingSpec::jordan_wigner(space.n_modes()),
            (MappingChoice::Parity, false) => MappingSpec::parity(space.n_modes()),
            (MappingChoice::Parity, true) => MappingSpec::parity_tapered_for(&space, n_up, n_down),
        };
        let ansatz = build_uccsd_with(&space, reference, cfg.ansatz.selection)?;
        if let Some(t) = &cfg.ansatz.theta0 {
            if t.len() != ansatz.n_parameters() {
                return Err(cfg_err(format!("ansatz.theta0 has {} entries, the ansatz has {} parameters", t.len(), ansatz.n_parameters())));
            }
        }
        let noise = load_noise(cfg, mapping.n_qubits())?;
        let fci = solve_fci(&hamiltonian, n_electrons, Some(twice_sz as f64 / 2.0))?;
        let plan = MeasurementPlan::new(&map_operator(&to_fermion_operator(&hamiltonian), &mapping)?)?;
        Ok(Self {
            label,
            hamiltonian,
            n_electrons,
            sz: twice_sz as f64 / 2.0,
            reference,
            mapping,
            ansatz,
            noise,
            fci,
            plan,
            merge_first_generator: cfg.ansatz.merge_first_generator,
        })
    }

    pub fn compile(&self, replication: usize) -> anyhow::Result<CompiledAnsatz> {
        Ok(compile_with(
            &self.ansatz,
            &self.mapping,
            CompileOptions { replication, merge_first_generator: self.merge_first_generator },
        )?)
    }

    /// Estimator settings for this run; readout calibration is drawn from its own seed stream.
    pub fn settings(&self, cfg: &RunConfig) -> anyhow::Result<EstimatorSettings> {
        let readout_mitigation = match (&self.noise, cfg.readout.mitigate) {
            (Some(nm), true) => Some(calibrate(
                nm,
                self.mapping.n_qubits(),
                cfg.readout.calibration_shots,
                cfg.readout.calibration,
                &mut task_rng(cfg.seed, &[stream::CALIBRATION]),
            )?),
            _ => None,
        };
        Ok(EstimatorSettings {
            shots: (cfg.estimation.shots > 0).then_some(cfg.estimation.shots),
            post_select: cfg.estimation.post_select,
            n_target: self.n_electrons,
            noise: self.noise.clone(),
            readout_mitigation,
            negatives: cfg.readout.negatives,
        })
    }

    /// Parameters minimizing the exact noiseless energy, by Nelder-Mead from `theta0`.
    pub fn noiseless_optimum(&self, theta0: &[f64]) -> anyhow::Result<(Vec<f64>, f64)> {
        let c = self.compile(1)?;
        let exact = EstimatorSettings::exact();
        let cfg = OptimizerConfig {
            kind: OptimizerKind::NelderMead,
            max_iterations: 4000,
            tolerance: 1e-10,
            ..OptimizerConfig::default()
        };
        let t = minimize(|th, _| Ok((estimate_energy(&c, th, &self.plan, &exact, 0)?.value, 0.0)), theta0, &cfg)?;
        Ok((t.theta_final, t.energy_final))
    }

    pub fn exact_energy(&self, theta: &[f64]) -> anyhow::Result<f64> {
        Ok(estimate_energy(&self.compile(1)?, theta, &self.plan, &EstimatorSettings::exact(), 0)?.value)
    }

    fn theta0(&self, cfg: &RunConfig) -> Vec<f64> {
        cfg.ansatz.theta0.clone().unwrap_or_else(|| vec![0.0; self.ansatz.n_parameters()])
    }
}

fn load_noise(cfg: &RunConfig, n_qubits: usize) -> anyhow::Result<Option<NoiseModel>> {
    let text = match (cfg.noise.preset.as_deref(), &cfg.noise.path) {
        (_, Some(p)) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        (Some("casablanca"), None) => CASABLANCA_TOML.to_string(),
        _ => return Ok(None),
    };
    let cal = DeviceCalibration::from_toml(&text).map_err(|e| cfg_err(e.to_string()))?;
    Ok(Some(cal.noise_model(n_qubits, cfg.noise.damping)?))
}

/// Runs the configured mode on a worker pool of `cfg.workers` threads.
pub fn execute(cfg: &RunConfig) -> anyhow::Result<Vec<Artifact>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().context("building worker pool")?;
    pool.install(|| execute_inner(cfg))
}

fn execute_inner(cfg: &RunConfig) -> anyhow::Result<Vec<Artifact>> {
    let problem = Problem::from_config(cfg)?;
    let mut seeds = BTreeMap::new();
    seeds.insert("base", cfg.seed);
    let (mut artifacts, body) = match cfg.mode {
        Mode::Fci => run_fci(&problem),
        Mode::Vqe => run_vqe_mode(cfg, &problem, &mut seeds),
        Mode::Scan => run_scan(cfg, &problem, &mut seeds),
        Mode::Zne => run_zne_mode(cfg, &problem, &mut seeds),
        Mode::Qse => run_qse(cfg, &problem, &mut seeds),
    }?;
    if cfg.readout.mitigate && problem.noise.is_some() {
        seeds.insert("readout_calibration", derive_seed(cfg.seed, &[stream::CALIBRATION]));
    }
    let mut report = json!({
        "mode": cfg.mode,
        "config": cfg,
        "seeds": seeds,
        "problem": problem_summary(&problem),
    });
    if let (Value::Object(r), Value::Object(b)) = (&mut report, body) {
        r.extend(b);
    }
    let name = format!("{}.json", mode_name(cfg.mode));
    artifacts.push(Artifact::json(&name, &report));
    artifacts.push(Artifact { name: "config.toml".into(), contents: cfg.to_toml() });
    Ok(artifacts)
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Fci => "fci",
        Mode::Vqe => "vqe",
        Mode::Scan => "scan",
        Mode::Zne => "zne",
        Mode::Qse => "qse",
    }
}

fn problem_summary(p: &Problem) -> Value {
    json!({
        "hamiltonian": p.label,
        "n_spatial": p.hamiltonian.space.n_spatial,
        "n_electrons": p.n_electrons,
        "sz": p.sz,
        "reference_modes": p.reference.modes(),
        "n_qubits": p.mapping.n_qubits(),
        "mapping": format!("{:?}", p.mapping.kind),
        "tapered": p.mapping.taper,
        "parameters": p.ansatz.parameter_names(),
        "measurement_circuits": p.plan.n_circuits(),
        "noisy": p.noise.is_some(),
        "fci_ground_energy_eV": p.fci.ground_energy(),
    })
}

type ModeOutput = anyhow::Result<(Vec<Artifact>, Value)>;

fn run_fci(p: &Problem) -> ModeOutput {
    let e0 = p.fci.ground_energy();
    let body = json!({
        "basis_size": p.fci.basis.len(),
        "energies_eV": p.fci.energies,
        "gaps_eV": p.fci.energies.iter().map(|e| e - e0).collect::<Vec<_>>(),
    });
    Ok((vec![Artifact { name: "fci.csv".into(), contents: p.fci.to_csv() }], body))
}

fn run_vqe_mode(cfg: &RunConfig, p: &Problem, seeds: &mut BTreeMap<&'static str, u64>) -> ModeOutput {
    let settings = p.settings(cfg)?;
    let compiled = p.compile(1)?;
    let opt = OptimizerConfig { seed: derive_seed(cfg.seed, &[stream::VQE]), ..cfg.optimizer.clone() };
    seeds.insert("optimizer", opt.seed);
    let theta0 = p.theta0(cfg);
    let trace = run_vqe(&compiled, &p.plan, &settings, &opt, Some(&theta0))?;
    let exact_at_final = p.exact_energy(&trace.theta_final)?;
    let body = json!({
        "energy_eV": trace.energy_final,
        "std_error_eV": trace.std_error_final,
        "theta": trace.theta_final,
        "noiseless_energy_at_theta_eV": exact_at_final,
        "error_vs_fci_eV": trace.energy_final - p.fci.ground_energy(),
        "converged": trace.converged,
        "iterations": trace.iterations.len(),
        "evaluations": trace.evaluations,
        "optimizer": trace.optimizer,
    });
    Ok((vec![Artifact { name: "vqe_trace.csv".into(), contents: trace_csv(&trace) }], body))
}

/// `points` angles from `start`, spanning `[start, stop)` or `[start, stop]`.
pub fn scan_grid(start: f64, stop: f64, points: usize, endpoint: bool) -> Vec<f64> {
    let div = if endpoint { points.saturating_sub(1).max(1) } else { points };
    let step = (stop - start) / div as f64;
    (0..points).map(|k| start + k as f64 * step).collect()
}

fn run_scan(cfg: &RunConfig, p: &Problem, seeds: &mut BTreeMap<&'static str, u64>) -> ModeOutput {
    if p.ansatz.n_parameters() != 1 {
        return Err(cfg_err(format!("scan mode needs a single-parameter ansatz; this one has {}", p.ansatz.n_parameters())));
    }
    let settings = p.settings(cfg)?;
    let compiled = p.compile(1)?;
    let thetas = scan_grid(cfg.scan.start, cfg.scan.stop, cfg.scan.points, cfg.scan.endpoint);
    let seed = derive_seed(cfg.seed, &[stream::SCAN]);
    seeds.insert("scan", seed);
    let est = scan_theta(&compiled, &p.plan, &thetas, &settings, seed)?;
    let best = (0..est.len()).min_by(|&a, &b| est[a].value.total_cmp(&est[b].value)).expect("non-empty grid");
    let body = json!({
        "theta_rad": thetas,
        "energy_eV": est.iter().map(|e| e.value).collect::<Vec<_>>(),
        "std_error_eV": est.iter().map(|e| e.std_error).collect::<Vec<_>>(),
        "discarded_fraction": est.iter().map(|e| e.discarded_fraction).collect::<Vec<_>>(),
        "minimum": { "theta_rad": thetas[best], "energy_eV": est[best].value },
    });
    Ok((vec![Artifact { name: "scan.csv".into(), contents: scan_csv(&thetas, &est) }], body))
}

/// Fits of one ZNE series, keyed by kind; failed or unsupported fits carry an error message.
fn all_fits(series: &ZneSeries, bootstrap: usize, seed: u64) -> BTreeMap<&'static str, Result<ExtrapolationFit, String>> {
    let mut out = BTreeMap::new();
    for (name, kind, min_points) in
        [("linear", FitKind::Linear, 2), ("quadratic", FitKind::Quadratic, 3), ("exponential", FitKind::Exponential, 3)]
    {
        let r = if series.points.len() < min_points {
            Err(format!("needs at least {min_points} replication factors"))
        } else if kind == FitKind::Exponential {
            fit_exponential_with(series, bootstrap, seed).map_err(|e| e.to_string())
        } else {
            fit(series, kind).map_err(|e| e.to_string())
        };
        out.insert(name, r);
    }
    out
}

fn fits_json(fits: &BTreeMap<&'static str, Result<ExtrapolationFit, String>>) -> Value {
    Value::Object(
        fits.iter()
            .map(|(k, r)| {
                let v = match r {
                    Ok(f) => serde_json::to_value(f).expect("fit serializes"),
                    Err(e) => json!({ "error": e }),
                };
                (k.to_string(), v)
            })
            .collect(),
    )
}

fn fit_name(kind: FitKind) -> &'static str {
    match kind {
        FitKind::Linear => "linear",
        FitKind::Quadratic => "quadratic",
        FitKind::Exponential => "exponential",
    }
}

fn run_zne_mode(cfg: &RunConfig, p: &Problem, seeds: &mut BTreeMap<&'static str, u64>) -> ModeOutput {
    let settings = p.settings(cfg)?;
    let theta = match &cfg.zne.theta {
        Some(t) if t.len() != p.ansatz.n_parameters() => {
            return Err(cfg_err(format!("zne.theta has {} entries, the ansatz has {} parameters", t.len(), p.ansatz.n_parameters())))
        }
        Some(t) => t.clone(),
        None => p.noiseless_optimum(&p.theta0(cfg))?.0,
    };
    let e_noiseless = p.exact_energy(&theta)?;
    let seed = derive_seed(cfg.seed, &[stream::ZNE]);
    let boot_seed = derive_seed(cfg.seed, &[stream::BOOTSTRAP]);
    seeds.insert("zne", seed);
    seeds.insert("bootstrap", boot_seed);
    let states = cfg
        .zne
        .replications
        .iter()
        .map(|&n| {
            let c = p.compile(n)?;
            Ok((n, c.circuit.run(&theta, settings.noise())?))
        })
        .collect::<anyhow::Result<BTreeMap<_, _>>>()?;
    let series = run_zne(&cfg.zne.replications, cfg.zne.repetitions, |n, rep| {
        let e = estimate_on_state(&states[&n], &p.plan, Some(&p.mapping), &settings, derive_seed(seed, &[n as u64, rep as u64]))?;
        Ok(e.value)
    })?;
    let fits = all_fits(&series, cfg.zne.bootstrap, boot_seed);
    let half = cfg.zne.repetitions / 2;
    let stability = if half >= 1 && half < cfg.zne.repetitions {
        let sub = ZneSeries {
            points: series
                .points
                .iter()
                .map(|pt| defectvqe_core::mitigation::ZnePoint::from_values(pt.n, pt.values[..half].to_vec()))
                .collect(),
        };
        let sub_fits = all_fits(&sub, cfg.zne.bootstrap, boot_seed);
        let deltas: BTreeMap<&str, Value> = fits
            .iter()
            .map(|(k, full)| {
                let v = match (full, &sub_fits[k]) {
                    (Ok(a), Ok(b)) => json!((a.zero_noise - b.zero_noise).abs()),
                    _ => Value::Null,
                };
                (*k, v)
            })
            .collect();
        json!({ "repetitions_half": half, "repetitions_full": cfg.zne.repetitions, "abs_delta_zero_noise_eV": deltas })
    } else {
        Value::Null
    };
    let selected = fits[fit_name(cfg.zne.fit)].as_ref().ok().map(|f| f.zero_noise);
    let unmitigated = series.points.first().map(|pt| pt.mean);
    let body = json!({
        "theta": theta,
        "noiseless_energy_eV": e_noiseless,
        "fci_ground_energy_eV": p.fci.ground_energy(),
        "series": series,
        "fits": fits_json(&fits),
        "selected_fit": cfg.zne.fit,
        "zero_noise_energy_eV": selected,
        "unmitigated_energy_eV": unmitigated,
        "stability": stability,
        "notes": [
            "exponential form: E(n) = E* + b * r^n, sigma from a seeded residual bootstrap",
            "replication factor n is taken as an affine proxy for the noise strength",
        ],
    });
    Ok((Vec::new(), body))
}

#[derive(Serialize)]
struct MatrixJson {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

fn matrix_json(m: &DMatrix<Complex64>) -> MatrixJson {
    let rows = |f: fn(&Complex64) -> f64| (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect();
    MatrixJson { re: rows(|z| z.re), im: rows(|z| z.im) }
}

fn real_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn qse_column(problem: &QseProblem, threshold: f64, reference: &[f64], tol: f64, warnings: Vec<String>) -> Value {
    let matrices = json!({
        "h": matrix_json(&problem.h),
        "s": matrix_json(&problem.s),
        "h_err": real_rows(&problem.h_err),
        "s_err": real_rows(&problem.s_err),
    });
    match solve_generalized(problem, threshold) {
        Ok(sol) => {
            let d = QseDiagnostics::new(&sol.energies, reference, tol);
            json!({
                "energies_eV": sol.energies,
                "retained": sol.retained,
                "s_eigenvalues": sol.s_eigenvalues,
                "diagnostics": d,
                "mean_gap_error_eV": d.mean_gap_error(),
                "max_degenerate_splitting_eV": d.max_degenerate_splitting(),
                "warnings": warnings,
                "matrices": matrices,
            })
        }
        Err(e) => json!({ "error": e.to_string(), "warnings": warnings, "matrices": matrices }),
    }
}

fn run_qse(cfg: &RunConfig, p: &Problem, seeds: &mut BTreeMap<&'static str, u64>) -> ModeOutput {
    let settings = p.settings(cfg)?;
    let exact = settings.noise.is_none() && settings.shots.is_none();
    let theta = match cfg.qse.reference {
        QseReference::Exact => p.noiseless_optimum(&p.theta0(cfg))?.0,
        QseReference::Vqe => {
            let opt = OptimizerConfig { seed: derive_seed(cfg.seed, &[stream::QSE_VQE]), ..cfg.optimizer.clone() };
            seeds.insert("reference_vqe", opt.seed);
            run_vqe(&p.compile(1)?, &p.plan, &settings, &opt, Some(&p.theta0(cfg)))?.theta_final
        }
    };
    let reference_energy = p.exact_energy(&theta)?;
    let threshold = cfg.qse.s_threshold.unwrap_or(if exact { DEFAULT_S_THRESHOLD_NOISELESS } else { DEFAULT_S_THRESHOLD_NOISY });
    let seed = derive_seed(cfg.seed, &[stream::QSE]);
    seeds.insert("qse", seed);
    let ops = qse_operators(&p.hamiltonian.space, &[p.reference])?;
    // exact expectations are deterministic: one run at n = 1 is enough
    let (replications, repetitions) = if exact { (vec![1], 1) } else { (cfg.qse.replications.clone(), cfg.qse.repetitions) };
    let runs: Vec<(usize, Vec<QseProblem>)> = replications
        .iter()
        .map(|&n| {
            let state = p.compile(n)?.circuit.run(&theta, settings.noise())?;
            let reps = (0..repetitions)
                .map(|r| build_qse(&state, &p.hamiltonian, &ops, &p.mapping, &settings, derive_seed(seed, &[n as u64, r as u64])))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((n, reps))
        })
        .collect::<anyhow::Result<_>>()?;
    let fci: &[f64] = &p.fci.energies;
    let tol = cfg.qse.degeneracy_tol;
    let mut columns = serde_json::Map::new();
    columns.insert("none".into(), qse_column(&QseProblem::mean(&runs[0].1)?, threshold, fci, tol, Vec::new()));
    for (name, diag, off, min_points) in [
        ("linear", FitKind::Linear, FitKind::Linear, 2),
        ("quadratic", FitKind::Quadratic, FitKind::Quadratic, 3),
        ("exponential", FitKind::Exponential, FitKind::Linear, 3),
    ] {
        let v = if runs.len() < min_points {
            json!({ "error": format!("needs at least {min_points} replication factors") })
        } else {
            match extrapolate_problems(&runs, diag, off) {
                Ok((prob, w)) => qse_column(&prob, threshold, fci, tol, w),
                Err(e) => json!({ "error": e.to_string() }),
            }
        };
        columns.insert(name.into(), v);
    }
    let e0 = p.fci.ground_energy();
    let body = json!({
        "theta": theta,
        "reference_state_energy_eV": reference_energy,
        "operators": ops.iter().map(|o| o.name.clone()).collect::<Vec<_>>(),
        "s_threshold": threshold,
        "replications": replications,
        "repetitions": repetitions,
        "fci_energies_eV": fci,
        "fci_gaps_eV": fci.iter().map(|e| e - e0).collect::<Vec<_>>(),
        "columns": columns,
        "notes": [
            "none: element-wise mean at the smallest replication factor",
            "exponential: diagonal elements only; off-diagonal elements use the linear fit",
            "gaps are differences of degeneracy-group means; splittings are max - min inside a group",
        ],
    });
    Ok((Vec::new(), body))
}

/// Writes the artifacts plus `meta.json` (the only file with a timestamp).
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for a in artifacts {
        std::fs::write(dir.join(&a.name), &a.contents).with_context(|| format!("writing {}", a.name))?;
    }
    let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "unix_time": now,
        "files": artifacts.iter().map(|a| a.name.clone()).collect::<Vec<_>>(),
    });
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing() {
        let g = scan_grid(0.0, 1.0, 4, false);
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75]);
        let g = scan_grid(0.0, 1.0, 5, true);
        assert_eq!(g.last(), Some(&1.0));
    }
}
