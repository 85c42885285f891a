//! Least-squares fits of decaying and saturating exponentials.
//!
//! A small damped Gauss–Newton (Levenberg–Marquardt) loop is enough for the
//! two- and three-parameter models used here.

use nalgebra::{DMatrix, DVector};

use crate::error::{MaserError, Result};

/// Fitted `y(t) = K e^{−Dt} + C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub k: f64,
    pub d: f64,
    pub c: f64,
    pub rms_residual: f64,
    pub n_points: usize,
    pub iterations: usize,
}

impl DecayFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.k * (-self.d * t).exp() + self.c
    }
}

const MAX_ITERATIONS: usize = 200;
const PARAM_TOL: f64 = 1e-10;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_UP: f64 = 10.0;
const LAMBDA_DOWN: f64 = 3.0;
const LAMBDA_MAX: f64 = 1e16;

#[derive(Debug, Clone)]
struct LmOutcome {
    params: Vec<f64>,
    iterations: usize,
    /// Objective after every accepted step, starting with the initial guess.
    #[cfg_attr(not(test), allow(dead_code))]
    history: Vec<f64>,
}

/// Minimises `Σ r_i(p)²`. `eval` fills the residuals and their Jacobian.
fn levenberg_marquardt<F>(p0: Vec<f64>, n_res: usize, eval: F) -> Result<LmOutcome>
where
    F: Fn(&[f64], &mut DVector<f64>, &mut DMatrix<f64>),
{
    let n_par = p0.len();
    let mut p = p0;
    let mut r = DVector::zeros(n_res);
    let mut jac = DMatrix::zeros(n_res, n_par);
    let mut r_try = DVector::zeros(n_res);
    let mut jac_try = DMatrix::zeros(n_res, n_par);
    eval(&p, &mut r, &mut jac);
    let mut obj = r.norm_squared();
    if !obj.is_finite() {
        return Err(MaserError::FitFailure("objective not finite at initial guess".into()));
    }
    let mut history = vec![obj];
    let mut lambda = LAMBDA_INIT;

    for iter in 1..=MAX_ITERATIONS {
        if obj == 0.0 {
            return Ok(LmOutcome { params: p, iterations: iter - 1, history });
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        loop {
            let mut a = jtj.clone();
            for i in 0..n_par {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let step = a.lu().solve(&(-&jtr));
            let step = match step {
                Some(s) if s.iter().all(|v| v.is_finite()) => s,
                _ => {
                    lambda *= LAMBDA_UP;
                    if lambda > LAMBDA_MAX {
                        return Ok(LmOutcome { params: p, iterations: iter, history });
                    }
                    continue;
                }
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            eval(&trial, &mut r_try, &mut jac_try);
            let obj_try = r_try.norm_squared();
            if obj_try.is_finite() && obj_try <= obj {
                let rel = p
                    .iter()
                    .zip(step.iter())
                    .map(|(pv, s)| s.abs() / pv.abs().max(1e-300))
                    .fold(0.0, f64::max);
                p = trial;
                std::mem::swap(&mut r, &mut r_try);
                std::mem::swap(&mut jac, &mut jac_try);
                obj = obj_try;
                history.push(obj);
                lambda /= LAMBDA_DOWN;
                if rel < PARAM_TOL {
                    return Ok(LmOutcome { params: p, iterations: iter, history });
                }
                break;
            }
            lambda *= LAMBDA_UP;
            if lambda > LAMBDA_MAX {
                // no descent direction left at machine precision
                return Ok(LmOutcome { params: p, iterations: iter, history });
            }
        }
    }
    Err(MaserError::FitFailure(format!(
        "no convergence after {MAX_ITERATIONS} iterations"
    )))
}

fn check_series(t: &[f64], y: &[f64], min_points: usize) -> Result<()> {
    if t.len() != y.len() {
        return Err(MaserError::FitFailure(format!(
            "{} times but {} values",
            t.len(),
            y.len()
        )));
    }
    if t.len() < min_points {
        return Err(MaserError::FitFailure(format!(
            "need at least {min_points} points, got {}",
            t.len()
        )));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(MaserError::FitFailure("non-finite input".into()));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MaserError::FitFailure("times must be strictly increasing".into()));
    }
    Ok(())
}

/// Log-linear estimate of `(K, D)` about `t[0]` for a known offset.
///
/// Points whose distance from the offset is below 1e-3 of the largest one
/// are ignored.
pub(crate) fn log_linear_guess(t: &[f64], y: &[f64], offset: f64) -> Option<(f64, f64)> {
    let t0 = t[0];
    let dev: Vec<f64> = y.iter().map(|v| v - offset).collect();
    let peak = dev.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if peak == 0.0 {
        return None;
    }
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(&dev)
        .filter(|(_, d)| d.abs() > 1e-3 * peak)
        .map(|(t, d)| (t - t0, d.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mz = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if stt == 0.0 {
        return None;
    }
    let stz: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mz)).sum();
    let slope = stz / stt;
    let intercept = mz - slope * mt;
    let sign = dev.iter().find(|d| d.abs() > 1e-3 * peak).map(|d| d.signum()).unwrap_or(1.0);
    Some((sign * intercept.exp(), -slope))
}

/// Fits `K e^{−Dt} + C`; with `fixed_offset`, `C` is held at that value.
pub fn fit_offset_exponential(t: &[f64], y: &[f64], fixed_offset: Option<f64>) -> Result<DecayFit> {
    fit_offset_exponential_weighted(t, y, None, fixed_offset)
}

/// As [`fit_offset_exponential`], weighting residuals by `1/σ_i`.
pub fn fit_offset_exponential_weighted(
    t: &[f64],
    y: &[f64],
    sigma: Option<&[f64]>,
    fixed_offset: Option<f64>,
) -> Result<DecayFit> {
    check_series(t, y, 4)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if y.iter().all(|v| (v - mean).abs() <= 1e-12) {
        return Err(MaserError::DegenerateData(
            "series is constant; decay rate undefined".into(),
        ));
    }
    let w: Vec<f64> = match sigma {
        None => vec![1.0; y.len()],
        Some(s) => {
            if s.len() != y.len() || s.iter().any(|v| !(*v > 0.0)) {
                return Err(MaserError::FitFailure("standard errors must be positive".into()));
            }
            s.iter().map(|v| 1.0 / v).collect()
        }
    };
    let t0 = t[0];
    let span = t[t.len() - 1] - t0;
    let c_guess = fixed_offset.unwrap_or(y[y.len() - 1]);
    let (k_guess, mut d_guess) =
        log_linear_guess(t, y, c_guess).unwrap_or((y[0] - c_guess, 1.0 / span));
    if !(d_guess > 0.0) || !d_guess.is_finite() {
        d_guess = 1.0 / span;
    }
    let ts: Vec<f64> = t.iter().map(|v| v - t0).collect();

    let params = match fixed_offset {
        Some(c) => {
            let out = levenberg_marquardt(vec![k_guess, d_guess], y.len(), |p, r, j| {
                for i in 0..ts.len() {
                    let e = (-p[1] * ts[i]).exp();
                    r[i] = w[i] * (y[i] - p[0] * e - c);
                    j[(i, 0)] = -w[i] * e;
                    j[(i, 1)] = w[i] * p[0] * ts[i] * e;
                }
            })?;
            (out.params[0], out.params[1], c, out.iterations)
        }
        None => {
            let out = levenberg_marquardt(vec![k_guess, d_guess, c_guess], y.len(), |p, r, j| {
                for i in 0..ts.len() {
                    let e = (-p[1] * ts[i]).exp();
                    r[i] = w[i] * (y[i] - p[0] * e - p[2]);
                    j[(i, 0)] = -w[i] * e;
                    j[(i, 1)] = w[i] * p[0] * ts[i] * e;
                    j[(i, 2)] = -w[i];
                }
            })?;
            (out.params[0], out.params[1], out.params[2], out.iterations)
        }
    };
    let (k_shifted, d, c, iterations) = params;
    if !(d > 0.0) || !d.is_finite() {
        return Err(MaserError::FitFailure(format!("fitted rate D = {d} is not positive")));
    }
    let fit = DecayFit {
        k: k_shifted * (d * t0).exp(),
        d,
        c,
        rms_residual: 0.0,
        n_points: t.len(),
        iterations,
    };
    Ok(DecayFit {
        rms_residual: rms(t, y, &fit),
        ..fit
    })
}

/// One-parameter fit of `A (1 − e^{−Dt})` with the amplitude `A` known.
pub fn fit_saturating_exponential(t: &[f64], y: &[f64], amplitude: f64) -> Result<DecayFit> {
    check_series(t, y, 3)?;
    if y.iter().all(|v| v.abs() <= 1e-12) {
        return Err(MaserError::DegenerateData("series is identically zero".into()));
    }
    if amplitude == 0.0 || !amplitude.is_finite() {
        return Err(MaserError::DegenerateData(format!("amplitude {amplitude} is unusable")));
    }
    let span = t[t.len() - 1] - t[0];
    // −ln(1 − y/A) = D t, regressed through the origin
    let (mut num, mut den) = (0.0, 0.0);
    for (tv, yv) in t.iter().zip(y) {
        let f = yv / amplitude;
        if *tv > 0.0 && f > 0.0 && f < 1.0 - 1e-9 {
            num += tv * -(1.0 - f).ln();
            den += tv * tv;
        }
    }
    let mut d_guess = if den > 0.0 { num / den } else { 1.0 / span };
    if !(d_guess > 0.0) || !d_guess.is_finite() {
        d_guess = 1.0 / span;
    }
    let out = levenberg_marquardt(vec![d_guess], y.len(), |p, r, j| {
        for i in 0..t.len() {
            let e = (-p[0] * t[i]).exp();
            r[i] = y[i] - amplitude * (1.0 - e);
            j[(i, 0)] = -amplitude * t[i] * e;
        }
    })?;
    let d = out.params[0];
    if !(d > 0.0) || !d.is_finite() {
        return Err(MaserError::FitFailure(format!("fitted rate D = {d} is not positive")));
    }
    let fit = DecayFit {
        k: -amplitude,
        d,
        c: amplitude,
        rms_residual: 0.0,
        n_points: t.len(),
        iterations: out.iterations,
    };
    Ok(DecayFit {
        rms_residual: rms(t, y, &fit),
        ..fit
    })
}

fn rms(t: &[f64], y: &[f64], fit: &DecayFit) -> f64 {
    (t.iter()
        .zip(y)
        .map(|(tv, yv)| (yv - fit.eval(*tv)).powi(2))
        .sum::<f64>()
        / t.len() as f64)
        .sqrt()
}
