use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::task_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZnePoint {
    /// Replication factor.
    pub n: usize,
    pub mean: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    pub repetitions: usize,
    /// Raw per-repetition values.
    pub values: Vec<f64>,
}

impl ZnePoint {
    pub fn from_values(n: usize, values: Vec<f64>) -> Self {
        let k = values.len();
        let mean = values.iter().sum::<f64>() / k as f64;
        let std_error = if k > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        } else {
            0.0
        };
        Self { n, mean, std_error, repetitions: k, values }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ZneSeries {
    pub points: Vec<ZnePoint>,
}

impl ZneSeries {
    /// Series from `(n, mean, std_error)` triples.
    pub fn from_means(points: &[(usize, f64, f64)]) -> Self {
        Self {
            points: points
                .iter()
                .map(|&(n, mean, std_error)| ZnePoint { n, mean, std_error, repetitions: 1, values: vec![mean] })
                .collect(),
        }
    }

    fn validate(&self, min_points: usize) -> Result<()> {
        if self.points.len() < min_points {
            return Err(Error::Fit(format!("need at least {min_points} points, got {}", self.points.len())));
        }
        let mut ns: Vec<usize> = self.points.iter().map(|p| p.n).collect();
        ns.sort_unstable();
        ns.dedup();
        if ns.len() != self.points.len() || ns[0] == 0 {
            return Err(Error::Fit("replication factors must be distinct positive integers".into()));
        }
        if self.points.iter().any(|p| !(p.std_error >= 0.0) || !p.mean.is_finite()) {
            return Err(Error::Fit("means must be finite and standard errors non-negative".into()));
        }
        Ok(())
    }

    fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.n as f64).collect()
    }

    fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }

    fn sigmas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.std_error).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Linear,
    Quadratic,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationFit {
    pub kind: FitKind,
    /// Polynomial `α_0..α_p`, or `[E*, b, r]` for the exponential form.
    pub coefficients: Vec<f64>,
    pub sigma: Vec<f64>,
    pub zero_noise: f64,
    pub zero_noise_sigma: f64,
    /// `mean - model` per point.
    pub residuals: Vec<f64>,
    /// Set when the exponential fit failed and a linear fit was returned instead.
    pub fallback_to_linear: bool,
    pub warnings: Vec<String>,
}

/// Normal-equation least squares with closed-form error propagation.
pub fn fit_polynomial(series: &ZneSeries, degree: usize) -> Result<ExtrapolationFit> {
    series.validate(degree + 1)?;
    let (xs, ys, sig) = (series.xs(), series.ys(), series.sigmas());
    let m = xs.len();
    let p = degree + 1;
    let v = DMatrix::from_fn(p, m, |j, i| xs[i].powi(j as i32));
    let l = &v * v.transpose();
    let sv = l.singular_values();
    let cond = sv.max() / sv.min();
    if !cond.is_finite() || cond > 1e14 {
        return Err(Error::Fit(format!("rank-deficient normal matrix (condition {cond:e})")));
    }
    let l_inv = l.try_inverse().ok_or_else(|| Error::Fit("singular normal matrix".into()))?;
    let a = l_inv * &v;
    let alpha = &a * DVector::from_column_slice(&ys);
    let s2 = DVector::from_iterator(m, sig.iter().map(|s| s * s));
    let var = a.component_mul(&a) * s2;
    let sigma: Vec<f64> = var.iter().map(|v| v.max(0.0).sqrt()).collect();
    let coefficients: Vec<f64> = alpha.iter().copied().collect();
    let residuals = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - coefficients.iter().enumerate().map(|(k, c)| c * x.powi(k as i32)).sum::<f64>())
        .collect();
    Ok(ExtrapolationFit {
        kind: if degree == 1 { FitKind::Linear } else { FitKind::Quadratic },
        zero_noise: coefficients[0],
        zero_noise_sigma: sigma[0],
        coefficients,
        sigma,
        residuals,
        fallback_to_linear: false,
        warnings: Vec::new(),
    })
}

/// Least squares of `E* + b r^n`; returns `(params, converged)`.
fn lm_exponential(xs: &[f64], ys: &[f64], w: &[f64], start: Vector3<f64>) -> (Vector3<f64>, bool) {
    let cost = |p: &Vector3<f64>| -> f64 {
        xs.iter().zip(ys).zip(w).map(|((x, y), w)| w * (y - p[0] - p[1] * p[2].powf(*x)).powi(2)).sum()
    };
    let scale: f64 = ys.iter().map(|y| y * y).sum::<f64>().max(1e-300);
    let mut p = start;
    let mut c = cost(&p);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for ((x, y), wi) in xs.iter().zip(ys).zip(w) {
            let rn = p[2].powf(*x);
            let j = Vector3::new(1.0, rn, p[1] * x * p[2].powf(x - 1.0));
            let r = y - p[0] - p[1] * rn;
            jtj += j * j.transpose() * *wi;
            jtr += j * (r * wi);
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for k in 0..3 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let q = p + step;
            if q[2] <= 0.0 || !q.iter().all(|v| v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let cq = cost(&q);
            if cq <= c {
                let done = (c - cq) <= 1e-30 * scale || step.norm() <= 1e-13 * (1.0 + p.norm());
                p = q;
                c = cq;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if done {
                    return (p, true);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step: stationary to working precision
            return (p, c <= 1e-20 * scale || lambda < 1e12);
        }
    }
    (p, false)
}

/// `(E*, b)` for fixed `r` by weighted linear least squares.
fn linear_given_r(xs: &[f64], ys: &[f64], w: &[f64], r: f64) -> Option<(f64, f64)> {
    let (mut s00, mut s01, mut s11, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((x, y), wi) in xs.iter().zip(ys).zip(w) {
        let u = r.powf(*x);
        s00 += wi;
        s01 += wi * u;
        s11 += wi * u * u;
        t0 += wi * y;
        t1 += wi * u * y;
    }
    let det = s00 * s11 - s01 * s01;
    if det.abs() < 1e-300 {
        return None;
    }
    Some(((s11 * t0 - s01 * t1) / det, (s00 * t1 - s01 * t0) / det))
}

/// Initial `r` from a line through `log|ΔE|` against the midpoints.
fn log_difference_guess(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let mut pts = Vec::new();
    for k in 0..xs.len() - 1 {
        let d = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
        if d.abs() > 0.0 {
            pts.push((0.5 * (xs[k] + xs[k + 1]), d.abs().ln(), d.signum()));
        }
    }
    if pts.len() < 2 || pts.iter().any(|p| p.2 != pts[0].2) {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let r = (sxy / sxx).exp();
    (r.is_finite() && r > 0.0 && (r - 1.0).abs() > 1e-9).then_some(r)
}

fn exponential_core(xs: &[f64], ys: &[f64], sig: &[f64], start: Option<Vector3<f64>>) -> Option<Vector3<f64>> {
    let w: Vec<f64> = if sig.iter().all(|s| *s > 0.0) { sig.iter().map(|s| 1.0 / (s * s)).collect() } else { vec![1.0; xs.len()] };
    let start = match start {
        Some(s) => s,
        None => {
            let r0 = log_difference_guess(xs, ys).or_else(|| {
                // coarse scan when the differences change sign
                (1..60)
                    .map(|k| 0.05 * k as f64)
                    .filter(|r| (r - 1.0).abs() > 1e-9)
                    .filter_map(|r| {
                        let (e, b) = linear_given_r(xs, ys, &w, r)?;
                        let c: f64 = xs.iter().zip(ys).zip(&w).map(|((x, y), wi)| wi * (y - e - b * r.powf(*x)).powi(2)).sum();
                        Some((c, r))
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .map(|(_, r)| r)
            })?;
            let (e, b) = linear_given_r(xs, ys, &w, r0)?;
            Vector3::new(e, b, r0)
        }
    };
    let (p, ok) = lm_exponential(xs, ys, &w, start);
    ok.then_some(p)
}

pub fn fit_exponential(series: &ZneSeries) -> Result<ExtrapolationFit> {
    fit_exponential_with(series, 200, 0)
}

/// Exponential fit with a seeded parametric bootstrap for the uncertainties.
pub fn fit_exponential_with(series: &ZneSeries, bootstrap: usize, seed: u64) -> Result<ExtrapolationFit> {
    series.validate(3)?;
    let (xs, ys, sig) = (series.xs(), series.ys(), series.sigmas());
    let mut warnings = Vec::new();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let spread = ys.iter().map(|y| (y - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-14 * (1.0 + mean.abs()) {
        return Ok(ExtrapolationFit {
            kind: FitKind::Exponential,
            coefficients: vec![mean, 0.0, 0.5],
            sigma: vec![sig.iter().map(|s| s * s).sum::<f64>().sqrt() / ys.len() as f64, 0.0, 0.0],
            zero_noise: mean,
            zero_noise_sigma: sig.iter().map(|s| s * s).sum::<f64>().sqrt() / ys.len() as f64,
            residuals: vec![0.0; ys.len()],
            fallback_to_linear: false,
            warnings: vec!["constant series".into()],
        });
    }
    let diffs: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.iter().any(|d| d.signum() != diffs[0].signum()) {
        warnings.push("means are not monotone in n".into());
    }
    let Some(p) = exponential_core(&xs, &ys, &sig, None) else {
        let mut lin = fit_polynomial(series, 1)?;
        lin.fallback_to_linear = true;
        lin.warnings.push("exponential fit did not converge; linear fit returned".into());
        return Ok(lin);
    };
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - p[0] - p[1] * p[2].powf(*x)).collect();
    let mut sigma = vec![0.0; 3];
    if sig.iter().any(|s| *s > 0.0) && bootstrap > 1 {
        let samples: Vec<Vector3<f64>> = (0..bootstrap)
            .filter_map(|k| {
                let mut rng = task_rng(seed, &[k as u64]);
                let yk: Vec<f64> = ys
                    .iter()
                    .zip(&sig)
                    .map(|(y, s)| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        y + s * z
                    })
                    .collect();
                exponential_core(&xs, &yk, &sig, Some(p))
            })
            .collect();
        if samples.len() < bootstrap / 2 {
            warnings.push(format!("only {} of {bootstrap} bootstrap refits converged", samples.len()));
        }
        if samples.len() > 1 {
            for k in 0..3 {
                let m = samples.iter().map(|s| s[k]).sum::<f64>() / samples.len() as f64;
                let v = samples.iter().map(|s| (s[k] - m).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
                sigma[k] = v.sqrt();
            }
        }
    }
    Ok(ExtrapolationFit {
        kind: FitKind::Exponential,
        coefficients: vec![p[0], p[1], p[2]],
        zero_noise: p[0],
        zero_noise_sigma: sigma[0],
        sigma,
        residuals,
        fallback_to_linear: false,
        warnings,
    })
}

pub fn fit(series: &ZneSeries, kind: FitKind) -> Result<ExtrapolationFit> {
    match kind {
        FitKind::Linear => fit_polynomial(series, 1),
        FitKind::Quadratic => fit_polynomial(series, 2),
        FitKind::Exponential => fit_exponential(series),
    }
}

/// Collects `repetitions` values of `experiment(n, rep)` for each replication `n`.
///
/// Tasks run in parallel; results are gathered in `(n, rep)` order.
pub fn run_zne<F>(replications: &[usize], repetitions: usize, experiment: F) -> Result<ZneSeries>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    if replications.len() < 2 || replications.contains(&0) {
        return Err(Error::Invalid("ZNE needs at least two positive replication factors".into()));
    }
    if repetitions == 0 {
        return Err(Error::Invalid("ZNE needs at least one repetition".into()));
    }
    let tasks: Vec<(usize, usize)> =
        replications.iter().flat_map(|&n| (0..repetitions).map(move |r| (n, r))).collect();
    let values: Vec<f64> = tasks.par_iter().map(|&(n, r)| experiment(n, r)).collect::<Result<_>>()?;
    let points = replications
        .iter()
        .enumerate()
        .map(|(i, &n)| ZnePoint::from_values(n, values[i * repetitions..(i + 1) * repetitions].to_vec()))
        .collect();
    Ok(ZneSeries { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line() {
        let s = ZneSeries::from_means(&[(1, 2.0, 0.0), (2, 3.0, 0.0), (3, 4.0, 0.0)]);
        let f = fit_polynomial(&s, 1).unwrap();
        assert_abs_diff_eq!(f.coefficients[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.coefficients[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.zero_noise, 1.0, epsilon = 1e-12);
        assert_eq!(f.zero_noise_sigma, 0.0);
    }

    #[test]
    fn quadratic_interpolates() {
        let pts: Vec<_> = (1..=5).map(|n| (n, 0.3 - 0.2 * n as f64 + 0.05 * (n * n) as f64, 0.0)).collect();
        let f = fit_polynomial(&ZneSeries::from_means(&pts), 2).unwrap();
        assert!(f.residuals.iter().all(|r| r.abs() <= 1e-12));
        assert_abs_diff_eq!(f.zero_noise, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn equal_sigma_closed_form() {
        let s = 0.01;
        let pts: Vec<_> = (1..=5).map(|n| (n, n as f64, s)).collect();
        let f = fit_polynomial(&ZneSeries::from_means(&pts), 1).unwrap();
        // α0 row of (VV^T)^{-1} V for n = 1..5: (8 - 2n)/10 ... sum of squares = 1.1
        assert_abs_diff_eq!(f.zero_noise_sigma, s * 1.1f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_series() {
        assert!(fit_polynomial(&ZneSeries::from_means(&[(1, 1.0, 0.0)]), 1).is_err());
        assert!(fit_polynomial(&ZneSeries::from_means(&[(1, 1.0, 0.0), (1, 2.0, 0.0)]), 1).is_err());
    }

    #[test]
    fn exponential_self_consistency() {
        let pts: Vec<_> = (1..=5).map(|n| (n, -1.0 + 0.2 * 0.6f64.powi(n as i32), 0.0)).collect();
        let f = fit_exponential(&ZneSeries::from_means(&pts)).unwrap();
        assert!(!f.fallback_to_linear);
        assert_abs_diff_eq!(f.coefficients[0], -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(f.coefficients[1], 0.2, epsilon = 1e-6);
        assert_abs_diff_eq!(f.coefficients[2], 0.6, epsilon = 1e-6);
    }

    #[test]
    fn exponential_constant_series() {
        let pts: Vec<_> = (1..=4).map(|n| (n, 0.7, 0.01)).collect();
        let f = fit_exponential(&ZneSeries::from_means(&pts)).unwrap();
        assert_abs_diff_eq!(f.zero_noise, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(f.coefficients[1], 0.0);
    }

    #[test]
    fn exponential_bootstrap_is_seeded() {
        let pts: Vec<_> = (1..=5).map(|n| (n, -1.0 + 0.2 * 0.6f64.powi(n as i32), 0.002)).collect();
        let s = ZneSeries::from_means(&pts);
        let a = fit_exponential_with(&s, 50, 9).unwrap();
        let b = fit_exponential_with(&s, 50, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.zero_noise_sigma > 0.0);
    }

    #[test]
    fn run_zne_orders_results() {
        let s = run_zne(&[1, 2, 3], 4, |n, r| Ok(n as f64 * 10.0 + r as f64)).unwrap();
        assert_eq!(s.points[1].values, vec![20.0, 21.0, 22.0, 23.0]);
        assert_abs_diff_eq!(s.points[2].mean, 31.5);
        assert!(run_zne(&[1], 4, |_, _| Ok(0.0)).is_err());
    }
}
