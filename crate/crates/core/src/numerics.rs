//! Shared numerical kernels: Perron roots of sparse nonnegative matrices,
//! maximization over the probability simplex, and log-linear slope fits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

/// Sparse square matrix with finite nonnegative entries, stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseNonnegativeMatrix {
    dimension: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseNonnegativeMatrix {
    pub fn from_entries(dimension: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dimension];
        for &(r, c, w) in entries {
            if r >= dimension || c >= dimension {
                return Err(Error::DegenerateInput(format!(
                    "entry ({r}, {c}) outside a {dimension}x{dimension} matrix"
                )));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::DegenerateInput(format!("entry weight {w} is not finite and nonnegative")));
            }
            rows[r].push((c, w));
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            if row.windows(2).any(|p| p[0].0 == p[1].0) {
                return Err(Error::DegenerateInput("duplicate coordinates".into()));
            }
        }
        Ok(Self { dimension, rows })
    }

    pub(crate) fn from_rows_unchecked(rows: Vec<Vec<(usize, f64)>>) -> Self {
        Self {
            dimension: rows.len(),
            rows,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(c, w)| w * v[c]).sum();
        }
    }
}

/// Outcome of a power iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerronRoot {
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Largest eigenvalue of a nonnegative matrix by power iteration from the
/// all-ones vector.
///
/// Each step normalizes in the sup norm; the eigenvalue estimate is
/// `‖Av‖∞` for the normalized iterate and the residual is `‖Av − λv‖∞`.
/// A vanishing iterate means some power of the matrix annihilates the start
/// vector and the root is exactly zero. Periodic irreducible blocks make the
/// plain iteration oscillate; if it stalls we rerun on `A + I`, whose root is
/// `λ + 1` and which is aperiodic.
pub fn spectral_radius(a: &SparseNonnegativeMatrix, tol: f64, max_iters: usize) -> Result<PerronRoot> {
    assert!(tol > 0.0, "tolerance must be positive");
    match power_iterate(a, 0.0, tol, max_iters) {
        Ok(root) => Ok(root),
        Err(Error::NotConverged { .. }) => {
            let shifted = power_iterate(a, 1.0, tol, max_iters)?;
            Ok(PerronRoot {
                lambda: (shifted.lambda - 1.0).max(0.0),
                ..shifted
            })
        }
        Err(e) => Err(e),
    }
}

fn power_iterate(a: &SparseNonnegativeMatrix, shift: f64, tol: f64, max_iters: usize) -> Result<PerronRoot> {
    let n = a.dimension;
    if n == 0 {
        return Ok(PerronRoot {
            lambda: shift,
            residual: 0.0,
            iterations: 0,
        });
    }
    let mut v = vec![1.0; n];
    let mut w = vec![0.0; n];
    let mut lambda = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iters {
        a.apply_into(&v, &mut w);
        if shift != 0.0 {
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi += shift * vi;
            }
        }
        let norm = w.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if norm == 0.0 {
            return Ok(PerronRoot {
                lambda: 0.0,
                residual: 0.0,
                iterations: it,
            });
        }
        let previous = lambda;
        lambda = norm;
        residual = w
            .iter()
            .zip(&v)
            .fold(0.0f64, |acc, (wi, vi)| acc.max((wi - lambda * vi).abs()));
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if residual <= tol && (lambda - previous).abs() <= tol {
            return Ok(PerronRoot {
                lambda,
                residual,
                iterations: it,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iters,
        residual,
    })
}

/// Settings for [`simplex_optimize`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerConfig {
    /// Number of random starts drawn from the flat simplex distribution.
    pub starts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Backtracking factor applied to the step after a failed Armijo test.
    pub step_shrink: f64,
    pub gradient_fd_step: f64,
    /// Stationarity threshold on the unit projected-gradient step.
    pub tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: 16,
            seed: 0,
            max_iters: 2000,
            step_shrink: 0.5,
            gradient_fd_step: 1e-6,
            tolerance: 1e-10,
        }
    }
}

/// Interior floor applied to every point before the objective is evaluated.
pub const SIMPLEX_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartTrace {
    pub start: usize,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexOptimum {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub trace: Vec<StartTrace>,
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_to_simplex(x: &[f64]) -> Vec<f64> {
    let mut u = x.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            theta = t;
        }
    }
    x.iter().map(|xi| (xi - theta).max(0.0)).collect()
}

fn floor_and_normalize(x: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = x.iter().map(|v| v.max(SIMPLEX_FLOOR)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Evaluates `f` after flooring `x` at [`SIMPLEX_FLOOR`] and renormalizing.
pub fn eval_floored<F: Fn(&[f64]) -> f64 + ?Sized>(f: &F, x: &[f64]) -> f64 {
    f(&floor_and_normalize(x))
}

/// Central finite-difference gradient along the sum-zero directions
/// `e_i − 1/k`, which is exactly the gradient of `f` restricted to the
/// simplex's affine hull.
pub fn tangent_gradient<F: Fn(&[f64]) -> f64 + ?Sized>(f: &F, p: &[f64], h: f64) -> Vec<f64> {
    let k = p.len();
    let shift = h / k as f64;
    let mut plus = vec![0.0; k];
    let mut minus = vec![0.0; k];
    (0..k)
        .map(|i| {
            for j in 0..k {
                let e = if i == j { h } else { 0.0 };
                plus[j] = p[j] + e - shift;
                minus[j] = p[j] - e + shift;
            }
            (eval_floored(f, &plus) - eval_floored(f, &minus)) / (2.0 * h)
        })
        .collect()
}

fn flat_simplex_sample(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v: f64| v / s).collect()
}

/// Maximizes `f` over the `k`-simplex by projected-gradient ascent with
/// backtracking, from the uniform vector, each of `extra_starts`, and
/// `cfg.starts` random points. Returns the best start; ties go to the lowest
/// start index.
pub fn simplex_optimize<F>(f: &F, k: usize, cfg: &OptimizerConfig, extra_starts: &[Vec<f64>]) -> Result<SimplexOptimum>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    if k == 0 {
        return Err(Error::OptimizerFailed("empty simplex".into()));
    }
    let mut starts = vec![vec![1.0 / k as f64; k]];
    starts.extend(extra_starts.iter().map(|s| project_to_simplex(s)));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    starts.extend((0..cfg.starts).map(|_| flat_simplex_sample(&mut rng, k)));

    let runs: Vec<(Vec<f64>, StartTrace)> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| ascend(f, s, i, cfg))
        .collect();

    let mut best: Option<&(Vec<f64>, StartTrace)> = None;
    for run in runs.iter().filter(|r| r.1.value.is_finite()) {
        if best.is_none_or(|b| run.1.value > b.1.value) {
            best = Some(run);
        }
    }
    let best = best.ok_or_else(|| Error::OptimizerFailed("every start produced a non-finite value".into()))?;
    Ok(SimplexOptimum {
        argmax: best.0.clone(),
        value: best.1.value,
        trace: runs.iter().map(|r| r.1.clone()).collect(),
    })
}

fn ascend<F>(f: &F, start: &[f64], index: usize, cfg: &OptimizerConfig) -> (Vec<f64>, StartTrace)
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut p = project_to_simplex(start);
    let mut fp = eval_floored(f, &p);
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters && fp.is_finite() {
        iterations += 1;
        let g = tangent_gradient(f, &p, cfg.gradient_fd_step);
        if g.iter().any(|x| !x.is_finite()) {
            fp = f64::NAN;
            break;
        }
        let unit: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a + b).collect();
        let stationarity = sup_dist(&project_to_simplex(&unit), &p);
        if stationarity <= cfg.tolerance {
            converged = true;
            break;
        }
        let mut accepted = false;
        while step > 1e-18 {
            let trial: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            let cand = project_to_simplex(&trial);
            let fc = eval_floored(f, &cand);
            let predicted: f64 = g.iter().zip(cand.iter().zip(&p)).map(|(gi, (c, q))| gi * (c - q)).sum();
            if fc.is_finite() && fc >= fp + 1e-4 * predicted && fc >= fp {
                let moved = sup_dist(&cand, &p);
                p = cand;
                fp = fc;
                accepted = moved > 0.0;
                break;
            }
            step *= cfg.step_shrink;
        }
        if !accepted {
            // No admissible ascent step remains at floating resolution.
            converged = true;
            break;
        }
        step = (step * 2.0).min(1e6);
    }
    let trace = StartTrace {
        start: index,
        value: fp,
        iterations,
        converged,
    };
    (p, trace)
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Least-squares line through `(x, log v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Fits `log v = slope · x + intercept`; needs at least three points, two
/// distinct abscissae and positive values.
pub fn fit_log_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, v)| {
            if v > 0.0 && v.is_finite() {
                Ok((x, v.ln()))
            } else {
                Err(Error::DegenerateInput(format!("value {v} is not positive")))
            }
        })
        .collect::<Result<_>>()?;
    fit_line(&logs)
}

/// Ordinary least squares on already-logged data.
pub fn fit_line(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!("{} points, need at least 3", points.len())));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateInput("constant abscissa".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
    })
}
