use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::CompiledAnsatz;
use crate::error::{Error, Result};
use crate::estimation::{estimate_energy, EstimatorSettings, MeasurementPlan};
use crate::rng::{derive_seed, task_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Spsa,
    NelderMead,
}

/// Gain schedules `a_k = a / (k + 1 + A)^alpha` and `c_k = c / (k + 1)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpsaGains {
    pub a: f64,
    pub c: f64,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(rename = "big_a")]
    pub stability: f64,
}

impl Default for SpsaGains {
    fn default() -> Self {
        Self { a: 0.2, c: 0.1, alpha: 0.602, gamma: 0.101, stability: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub max_iterations: usize,
    pub spsa: SpsaGains,
    pub seed: u64,
    /// Stop when the parameter estimate moves less than this (max norm).
    pub tolerance: f64,
    /// Tail length averaged for the SPSA estimate.
    pub tail: usize,
    /// Initial simplex edge for Nelder-Mead, in radians.
    pub simplex_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Spsa,
            max_iterations: 200,
            spsa: SpsaGains::default(),
            seed: 0,
            tolerance: 1e-6,
            tail: 10,
            simplex_step: 0.4,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.spsa;
        if !(g.a > 0.0 && g.c > 0.0 && g.alpha > 0.0 && g.gamma > 0.0 && g.stability >= 0.0) {
            return Err(Error::Invalid("SPSA gains must be positive".into()));
        }
        if !(self.tolerance > 0.0) || self.tail == 0 || self.max_iterations == 0 || !(self.simplex_step > 0.0) {
            return Err(Error::Invalid("tolerance, tail, iteration budget and simplex step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeIteration {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub energy: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeTrace {
    pub iterations: Vec<VqeIteration>,
    /// SPSA: tail average of the iterates. Nelder-Mead: best vertex.
    pub theta_final: Vec<f64>,
    pub energy_final: f64,
    pub std_error_final: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub optimizer: OptimizerConfig,
}

/// Objective returning `(energy, std_error)`; the `u64` is a unique evaluation id.
type Objective<'a> = dyn Fn(&[f64], u64) -> Result<(f64, f64)> + Sync + 'a;

/// Minimizes `objective` from `theta0`.
///
/// Each evaluation gets a distinct id, so seeded objectives are reproducible.
pub fn minimize<F>(objective: F, theta0: &[f64], config: &OptimizerConfig) -> Result<VqeTrace>
where
    F: Fn(&[f64], u64) -> Result<(f64, f64)> + Sync,
{
    config.validate()?;
    if theta0.is_empty() {
        let (e, s) = objective(&[], 0)?;
        return Ok(VqeTrace {
            iterations: vec![VqeIteration { iteration: 0, theta: Vec::new(), energy: e, std_error: s }],
            theta_final: Vec::new(),
            energy_final: e,
            std_error_final: s,
            converged: true,
            evaluations: 1,
            optimizer: config.clone(),
        });
    }
    match config.kind {
        OptimizerKind::Spsa => spsa(&objective, theta0, config),
        OptimizerKind::NelderMead => nelder_mead(&objective, theta0, config),
    }
}

fn spsa(f: &Objective, theta0: &[f64], cfg: &OptimizerConfig) -> Result<VqeTrace> {
    let g = cfg.spsa;
    let p = theta0.len();
    let mut theta = theta0.to_vec();
    let mut iterations = Vec::with_capacity(cfg.max_iterations);
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut prev_avg: Option<Vec<f64>> = None;
    let mut converged = false;
    for k in 0..cfg.max_iterations {
        let ak = g.a / (k as f64 + 1.0 + g.stability).powf(g.alpha);
        let ck = g.c / (k as f64 + 1.0).powf(g.gamma);
        let mut rng = task_rng(cfg.seed, &[k as u64, 0x5350]);
        let delta: Vec<f64> = (0..p).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let plus: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + ck * d).collect();
        let minus: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t - ck * d).collect();
        let (rp, rm) = rayon::join(|| f(&plus, 2 * k as u64 + 1), || f(&minus, 2 * k as u64 + 2));
        let ((yp, sp), (ym, sm)) = (rp?, rm?);
        for (t, d) in theta.iter_mut().zip(&delta) {
            *t -= ak * (yp - ym) / (2.0 * ck * d);
        }
        iterations.push(VqeIteration {
            iteration: k,
            theta: theta.clone(),
            energy: 0.5 * (yp + ym),
            std_error: 0.5 * (sp * sp + sm * sm).sqrt(),
        });
        history.push(theta.clone());
        if history.len() >= cfg.tail {
            let avg = tail_average(&history, cfg.tail);
            if let Some(prev) = &prev_avg {
                let drift = avg.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if drift < cfg.tolerance {
                    converged = true;
                    break;
                }
            }
            prev_avg = Some(avg);
        }
    }
    let theta_final = tail_average(&history, cfg.tail);
    let final_id = 2 * cfg.max_iterations as u64 + 1;
    let (energy_final, std_error_final) = f(&theta_final, final_id)?;
    Ok(VqeTrace {
        evaluations: 2 * iterations.len() + 1,
        iterations,
        theta_final,
        energy_final,
        std_error_final,
        converged,
        optimizer: cfg.clone(),
    })
}

fn tail_average(history: &[Vec<f64>], tail: usize) -> Vec<f64> {
    let k = tail.min(history.len()).max(1);
    let rows = &history[history.len() - k..];
    (0..rows[0].len()).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / k as f64).collect()
}

fn nelder_mead(f: &Objective, theta0: &[f64], cfg: &OptimizerConfig) -> Result<VqeTrace> {
    let p = theta0.len();
    let mut id = 0u64;
    let mut eval = |x: &[f64]| -> Result<(f64, f64)> {
        id += 1;
        f(x, id)
    };
    let mut simplex: Vec<(Vec<f64>, f64, f64)> = Vec::with_capacity(p + 1);
    let (e, s) = eval(theta0)?;
    simplex.push((theta0.to_vec(), e, s));
    for i in 0..p {
        let mut x = theta0.to_vec();
        x[i] += cfg.simplex_step;
        let (e, s) = eval(&x)?;
        simplex.push((x, e, s));
    }
    let mut iterations = Vec::new();
    let mut converged = false;
    for k in 0..cfg.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0];
        iterations.push(VqeIteration { iteration: k, theta: best.0.clone(), energy: best.1, std_error: best.2 });
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.0.iter().zip(&best.0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread = simplex[p].1 - simplex[0].1;
        if size < cfg.tolerance && spread.abs() < 1e-12 * (1.0 + simplex[0].1.abs()) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..p).map(|i| simplex[..p].iter().map(|v| v.0[i]).sum::<f64>() / p as f64).collect();
        let worst = simplex[p].clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(1.0);
        let (fr, sr) = eval(&xr)?;
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let (fe, se) = eval(&xe)?;
            simplex[p] = if fe < fr { (xe, fe, se) } else { (xr, fr, sr) };
            continue;
        }
        if fr < simplex[p - 1].1 {
            simplex[p] = (xr, fr, sr);
            continue;
        }
        let (xc, (fc, sc)) = if fr < worst.1 {
            let x = along(0.5);
            let v = eval(&x)?;
            (x, v)
        } else {
            let x = along(-0.5);
            let v = eval(&x)?;
            (x, v)
        };
        if fc < worst.1.min(fr) {
            simplex[p] = (xc, fc, sc);
            continue;
        }
        let x0 = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = v.0.iter().zip(&x0).map(|(a, b)| b + 0.5 * (a - b)).collect();
            let (e, s) = eval(&x)?;
            *v = (x, e, s);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (theta_final, energy_final, std_error_final) = simplex.swap_remove(0);
    Ok(VqeTrace {
        iterations,
        theta_final,
        energy_final,
        std_error_final,
        converged,
        evaluations: id as usize,
        optimizer: cfg.clone(),
    })
}

/// VQE on a compiled ansatz; evaluation `i` uses seed `derive_seed(config.seed, [i])`.
pub fn run_vqe(
    ansatz: &CompiledAnsatz,
    plan: &MeasurementPlan,
    settings: &EstimatorSettings,
    config: &OptimizerConfig,
    theta0: Option<&[f64]>,
) -> Result<VqeTrace> {
    let zeros = vec![0.0; ansatz.n_parameters()];
    let theta0 = theta0.unwrap_or(&zeros);
    ansatz.check_params(theta0)?;
    minimize(
        |theta, id| {
            let e = estimate_energy(ansatz, theta, plan, settings, derive_seed(config.seed, &[id]))?;
            Ok((e.value, e.std_error))
        },
        theta0,
        config,
    )
}

/// `iter,theta_0..,energy_eV,stderr_eV` rows.
pub fn trace_csv(trace: &VqeTrace) -> String {
    let p = trace.theta_final.len();
    let mut s = String::from("iter");
    for i in 0..p {
        let _ = write!(s, ",theta_{i}");
    }
    s.push_str(",energy_eV,stderr_eV\n");
    for it in &trace.iterations {
        let _ = write!(s, "{}", it.iteration);
        for t in &it.theta {
            let _ = write!(s, ",{t:.17e}");
        }
        let _ = writeln!(s, ",{:.17e},{:.17e}", it.energy, it.std_error);
    }
    s
}
