//! Damped least-squares (Levenberg-Marquardt) fitting with analytic
//! Jacobians, plus the line-shape models the analysis layer uses:
//! multi-Lorentzian dips, exponential / stretched-exponential decay,
//! cosine, and sinusoid-vs-field response.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Outcome of a nonlinear fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub model_id: String,
    /// Best-fit parameter estimates.
    pub params: Vec<f64>,
    /// 1-sigma parameter uncertainties from the scaled covariance.
    pub uncertainties: Vec<f64>,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// A model that can evaluate itself and its parameter gradient at one point.
pub trait FitModel {
    fn id(&self) -> &'static str;
    fn dim(&self) -> usize;
    /// Value at `x`; writes d f / d p_j into `grad`.
    fn eval(&self, x: f64, p: &[f64], grad: &mut [f64]) -> f64;
}

pub struct FitOptions {
    pub max_iter: usize,
    /// Convergence on maximum relative parameter change.
    pub rel_tol: f64,
    pub lambda_init: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 200,
            rel_tol: 1e-8,
            lambda_init: 1e-3,
        }
    }
}

fn cost(
    model: &dyn FitModel,
    xs: &[f64],
    ys: &[f64],
    weights: Option<&[f64]>,
    p: &[f64],
    grad_buf: &mut [f64],
) -> f64 {
    let mut c = 0.0;
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        let r = y - model.eval(x, p, grad_buf);
        let w = weights.map_or(1.0, |w| w[i]);
        c += w * r * r;
    }
    c
}

/// Levenberg-Marquardt on unweighted residuals.
pub fn fit(
    model: &dyn FitModel,
    xs: &[f64],
    ys: &[f64],
    init: &[f64],
    opts: &FitOptions,
) -> Result<FitResult> {
    fit_weighted(model, xs, ys, None, init, opts)
}

/// Levenberg-Marquardt minimizing sum_i w_i (y_i - f(x_i))^2. Weights are
/// inverse variances; `None` means unit weights.
pub fn fit_weighted(
    model: &dyn FitModel,
    xs: &[f64],
    ys: &[f64],
    weights: Option<&[f64]>,
    init: &[f64],
    opts: &FitOptions,
) -> Result<FitResult> {
    let k = model.dim();
    let n = xs.len();
    if init.len() != k {
        return Err(Error::invalid(format!(
            "init has {} parameters, model {} needs {k}",
            init.len(),
            model.id()
        )));
    }
    if n < k {
        return Err(Error::InsufficientData(format!(
            "{n} points cannot constrain {k} parameters"
        )));
    }
    if n != ys.len() {
        return Err(Error::invalid("xs and ys lengths differ"));
    }
    if let Some(w) = weights {
        if w.len() != n || w.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("weights must match points and be >= 0"));
        }
    }

    let mut p = init.to_vec();
    let mut grad = vec![0.0; k];
    let mut lambda = opts.lambda_init;
    let mut current_cost = cost(model, xs, ys, weights, &p, &mut grad);
    let mut iterations = 0;
    let mut converged = false;

    let mut jtj = vec![0.0; k * k];
    let mut jtr = vec![0.0; k];

    while iterations < opts.max_iter {
        iterations += 1;

        jtj.iter_mut().for_each(|v| *v = 0.0);
        jtr.iter_mut().for_each(|v| *v = 0.0);
        for (idx, (&x, &y)) in xs.iter().zip(ys).enumerate() {
            let f = model.eval(x, &p, &mut grad);
            let r = y - f;
            let w = weights.map_or(1.0, |w| w[idx]);
            for i in 0..k {
                jtr[i] += w * grad[i] * r;
                for j in 0..=i {
                    jtj[i * k + j] += w * grad[i] * grad[j];
                }
            }
        }
        for i in 0..k {
            for j in (i + 1)..k {
                jtj[i * k + j] = jtj[j * k + i];
            }
        }

        // inner damping loop: grow lambda until a step reduces the cost
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for i in 0..k {
                a[i * k + i] += lambda * jtj[i * k + i].max(1e-30);
            }
            let Some(step) = solve_dense(&mut a, &jtr, k) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&step).map(|(pi, si)| pi + si).collect();
            if trial.iter().any(|v| !v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let trial_cost = cost(model, xs, ys, weights, &trial, &mut grad);
            if trial_cost.is_finite() && trial_cost <= current_cost {
                // relative parameter change, vector-norm form so that
                // parameters passing through zero do not stall the test
                let step_norm = step.iter().map(|s| s * s).sum::<f64>().sqrt();
                let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                let rel = step_norm / p_norm.max(1e-300);
                p = trial;
                current_cost = trial_cost;
                lambda = (lambda / 4.0).max(1e-12);
                accepted = true;
                if rel < opts.rel_tol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }

        if converged {
            break;
        }
        if !accepted {
            // stuck: no direction reduces the cost, treat as converged at a
            // stationary point only if the gradient is negligible
            let gnorm = jtr.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm < 1e-12 * (1.0 + current_cost) {
                converged = true;
            }
            break;
        }
    }

    let residual_rms = (current_cost / n as f64).sqrt();
    if !converged {
        return Err(Error::FitFailure {
            iterations,
            residual_rms,
            best: p,
        });
    }

    // parameter covariance: s^2 * (J^T W J)^-1
    jtj.iter_mut().for_each(|v| *v = 0.0);
    for (idx, &x) in xs.iter().enumerate() {
        model.eval(x, &p, &mut grad);
        let w = weights.map_or(1.0, |w| w[idx]);
        for i in 0..k {
            for j in 0..=i {
                jtj[i * k + j] += w * grad[i] * grad[j];
            }
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            jtj[i * k + j] = jtj[j * k + i];
        }
    }
    let dof = (n - k).max(1) as f64;
    let s2 = current_cost / dof;
    let uncertainties = match invert_dense(&jtj, k) {
        Some(cov) => (0..k)
            .map(|i| (cov[i * k + i].max(0.0) * s2).sqrt())
            .collect(),
        None => vec![f64::NAN; k],
    };

    Ok(FitResult {
        model_id: model.id().to_string(),
        params: p,
        uncertainties,
        residual_rms,
        converged,
        iterations,
    })
}

/// Gaussian elimination with partial pivoting; `a` is row-major k x k and is
/// destroyed. Returns None on a singular system.
fn solve_dense(a: &mut [f64], b: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut x = b.to_vec();
    for col in 0..k {
        let mut pivot = col;
        let mut best = a[col * k + col].abs();
        for row in (col + 1)..k {
            let v = a[row * k + col].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best <= 0.0 || !best.is_finite() {
            return None;
        }
        if pivot != col {
            for j in 0..k {
                a.swap(col * k + j, pivot * k + j);
            }
            x.swap(col, pivot);
        }
        let d = a[col * k + col];
        for row in (col + 1)..k {
            let factor = a[row * k + col] / d;
            if factor == 0.0 {
                continue;
            }
            for j in col..k {
                a[row * k + j] -= factor * a[col * k + j];
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..k).rev() {
        let mut acc = x[col];
        for j in (col + 1)..k {
            acc -= a[col * k + j] * x[j];
        }
        x[col] = acc / a[col * k + col];
    }
    Some(x)
}

/// Inverse via column-by-column solves.
fn invert_dense(a: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut out = vec![0.0; k * k];
    for col in 0..k {
        let mut e = vec![0.0; k];
        e[col] = 1.0;
        let mut work = a.to_vec();
        let x = solve_dense(&mut work, &e, k)?;
        for row in 0..k {
            out[row * k + col] = x[row];
        }
    }
    Some(out)
}

// ---------------------------------------------------------------------------
// models
// ---------------------------------------------------------------------------

/// Sum of Lorentzian dips on a constant baseline:
/// `f(x) = p[0] - sum_i A_i * (w_i^2/4) / ((x - c_i)^2 + w_i^2/4)`
/// with per-dip parameters (c_i, w_i, A_i) following the baseline.
pub struct MultiLorentzianDip {
    pub n_dips: usize,
}

impl FitModel for MultiLorentzianDip {
    fn id(&self) -> &'static str {
        "lorentzian-dips"
    }

    fn dim(&self) -> usize {
        1 + 3 * self.n_dips
    }

    fn eval(&self, x: f64, p: &[f64], grad: &mut [f64]) -> f64 {
        let mut f = p[0];
        grad[0] = 1.0;
        for i in 0..self.n_dips {
            let c = p[1 + 3 * i];
            let w = p[2 + 3 * i];
            let a = p[3 + 3 * i];
            let u = w * w / 4.0;
            let dx = x - c;
            let denom = dx * dx + u;
            let shape = u / denom;
            f -= a * shape;
            grad[1 + 3 * i] = -a * 2.0 * dx * u / (denom * denom);
            grad[2 + 3 * i] = -a * (dx * dx / (denom * denom)) * (w / 2.0);
            grad[3 + 3 * i] = -shape;
        }
        f
    }
}

/// Decay on a constant offset: `f(t) = p[0] + p[1] * exp(-(t / p[2])^q)`,
/// with the stretch exponent q fixed (1 for exponential, 2 for the echo).
pub struct DecayModelFit {
    pub stretch_q: f64,
}

impl FitModel for DecayModelFit {
    fn id(&self) -> &'static str {
        "decay"
    }

    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, x: f64, p: &[f64], grad: &mut [f64]) -> f64 {
        let t_c = p[2].abs().max(1e-300);
        let ratio = (x / t_c).max(0.0);
        let e = (-ratio.powf(self.stretch_q)).exp();
        grad[0] = 1.0;
        grad[1] = e;
        grad[2] = p[1] * e * self.stretch_q * ratio.powf(self.stretch_q) / t_c;
        p[0] + p[1] * e
    }
}

/// Pure decay `f(t) = p[0] * exp(-(t / p[1])^q)` with fixed exponent; used on
/// extracted envelopes where an offset would be degenerate.
pub struct EnvelopeDecay {
    pub stretch_q: f64,
}

impl FitModel for EnvelopeDecay {
    fn id(&self) -> &'static str {
        "envelope-decay"
    }

    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: f64, p: &[f64], grad: &mut [f64]) -> f64 {
        let t_c = p[1].abs().max(1e-300);
        let ratio = (x / t_c).max(0.0);
        let e = (-ratio.powf(self.stretch_q)).exp();
        grad[0] = e;
        grad[1] = p[0] * e * self.stretch_q * ratio.powf(self.stretch_q) / t_c;
        p[0] * e
    }
}

/// `f(x) = p[0] + p[1] * cos(2 pi x / p[2] + p[3])`; the third parameter is
/// the period in the sweep variable's units.
pub struct Sinusoid;

impl FitModel for Sinusoid {
    fn id(&self) -> &'static str {
        "sinusoid"
    }

    fn dim(&self) -> usize {
        4
    }

    fn eval(&self, x: f64, p: &[f64], grad: &mut [f64]) -> f64 {
        let theta = 2.0 * PI * x / p[2] + p[3];
        let (s, c) = theta.sin_cos();
        grad[0] = 1.0;
        grad[1] = c;
        grad[2] = p[1] * s * 2.0 * PI * x / (p[2] * p[2]);
        grad[3] = -p[1] * s;
        p[0] + p[1] * c
    }
}

/// `f(x) = p[0] + p[1] * cos(2 pi p[2] x + p[3])`; the third parameter is a
/// frequency. Used for Rabi traces where the natural parameter is Omega_R
/// rather than a period.
pub struct Cosine;

impl FitModel for Cosine {
    fn id(&self) -> &'static str {
        "cosine"
    }

    fn dim(&self) -> usize {
        4
    }

    fn eval(&self, x: f64, p: &[f64], grad: &mut [f64]) -> f64 {
        let theta = 2.0 * PI * p[2] * x + p[3];
        let (s, c) = theta.sin_cos();
        grad[0] = 1.0;
        grad[1] = c;
        grad[2] = -p[1] * s * 2.0 * PI * x;
        grad[3] = -p[1] * s;
        p[0] + p[1] * c
    }
}

/// Ordinary least-squares line y = a + b x; returns (a, b).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(Error::InsufficientData("line fit needs >= 2 points".into()));
    }
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::InsufficientData(
            "degenerate abscissa for line fit".into(),
        ));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok((intercept, slope))
}

/// Least-squares line through the origin, with the coefficient of
/// determination against the through-origin model.
pub fn linear_fit_through_origin(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(Error::InsufficientData("line fit needs >= 2 points".into()));
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("degenerate abscissa".into()));
    }
    let slope = sxy / sxx;
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - slope * x;
            r * r
        })
        .sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok((slope, r2))
}
