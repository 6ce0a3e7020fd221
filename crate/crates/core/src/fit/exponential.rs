use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, Execution};
use crate::observables::{ObservableKind, ObservableSeries};
use crate::twa::trajectory_rng;

/// Fit of `y(t) = n_ss + A exp(-lambda t)` on a late-time window.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExpFit {
    pub lambda: f64,
    pub amplitude: f64,
    pub n_ss: f64,
    /// Fit window `(t_lo, t_hi)`; `t_hi` is the end of the series.
    pub window: (f64, f64),
    /// End of the stretch where `|y - n_ss|` is resolved above the noise.
    pub t_signal_end: f64,
    /// 1 sigma error: least-squares curvature, replaced by the bootstrap
    /// spread when [`bootstrap_lambda`] is applied.
    pub lambda_err: f64,
    /// Log-linear `R^2` of `|y - n_ss|` on `[t_lo, t_signal_end]`.
    pub r2: f64,
    /// Reduced chi^2 of the joint fit.
    pub chi2_red: f64,
    /// Lag-1 autocorrelation of the normalized residuals. Ensemble means
    /// share trajectories across times, so values well above zero are
    /// expected and only flag gross misfits when close to 1.
    pub residual_lag1: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub n_ss_hint: Option<f64>,
    /// Starting rate for a fit on a manual window.
    pub lambda_hint: Option<f64>,
    pub r2_min: f64,
    /// Manual `(t_lo, t_hi)` override of the automatic window.
    pub window: Option<(f64, f64)>,
    pub min_points: usize,
    /// `|y - n_ss|` counts as signal while above `signal_sigma * SE`.
    pub signal_sigma: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { n_ss_hint: None, lambda_hint: None, r2_min: 0.99, window: None, min_points: 8, signal_sigma: 3.0 }
    }
}

struct Data<'a> {
    t: &'a [f64],
    y: &'a [f64],
    w: Vec<f64>,
    weighted: bool,
}

impl<'a> Data<'a> {
    fn new(s: &'a ObservableSeries) -> Self {
        let weighted = s.std_error.iter().all(|e| *e > 0.0 && e.is_finite());
        let w = if weighted { s.std_error.iter().map(|e| 1.0 / (e * e)).collect() } else { vec![1.0; s.len()] };
        Self { t: &s.times, y: &s.value, w, weighted }
    }
}

/// Weighted linear least squares of `y = c + a e^{-lambda (t - t0)}` on
/// `range` for fixed `lambda`; returns `(c, a, chi2)`.
fn linear_part(d: &Data, range: std::ops::Range<usize>, lambda: f64, t0: f64) -> (f64, f64, f64) {
    let mut m = Matrix2::zeros();
    let mut b = Vector2::zeros();
    for i in range.clone() {
        let e = (-lambda * (d.t[i] - t0)).exp();
        let w = d.w[i];
        m[(0, 0)] += w;
        m[(0, 1)] += w * e;
        m[(1, 1)] += w * e * e;
        b[0] += w * d.y[i];
        b[1] += w * e * d.y[i];
    }
    m[(1, 0)] = m[(0, 1)];
    let sol = m.lu().solve(&b).unwrap_or_else(|| Vector2::new(b[0] / m[(0, 0)], 0.0));
    let chi2 = range
        .map(|i| {
            let r = d.y[i] - sol[0] - sol[1] * (-lambda * (d.t[i] - t0)).exp();
            d.w[i] * r * r
        })
        .sum();
    (sol[0], sol[1], chi2)
}

/// A log-linear `R^2` cannot see a subleading mode whose rate is within a
/// factor of a few of the slowest one. Moves the window start on by one
/// e-fold while that changes the rate by more than the combined error (or
/// 1%), and keeps the earliest start that is stable.
fn settle_start(d: &Data, mut fit: ExpFit, sig_end: usize, opts: &FitOptions) -> ExpFit {
    let n = d.t.len();
    loop {
        let later = index_at(d.t, fit.window.0 + 1.0 / fit.lambda);
        if later + opts.min_points > sig_end {
            return fit;
        }
        let (slope, r2) = log_linear(d, later..sig_end, fit.n_ss);
        if slope >= 0.0 {
            return fit;
        }
        let Ok(alt) = finish(d, later, n, sig_end, -slope, r2) else {
            return fit;
        };
        // serially correlated residuals carry fewer independent points
        let rho = alt.residual_lag1.clamp(0.0, 0.95);
        let inflate = ((1.0 + rho) / (1.0 - rho)).sqrt();
        let tol = 2.0 * inflate * fit.lambda_err.hypot(alt.lambda_err) + 0.01 * fit.lambda;
        if (alt.lambda - fit.lambda).abs() <= tol {
            return fit;
        }
        fit = alt;
    }
}

fn finish(d: &Data, start: usize, hi: usize, sig_end: usize, lambda0: f64, r2: f64) -> Result<ExpFit> {
    let range = start..hi;
    let (lambda, n_ss, amplitude, chi2) = joint_fit(d, range.clone(), lambda0 / 20.0, lambda0 * 20.0);
    // the log-linear slope is only a guide; a rate on the search edge means
    // the joint fit found no interior optimum
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::FitFailed(format!("non-positive rate {lambda}")));
    }
    if lambda < lambda0 / 19.0 || lambda > lambda0 * 19.0 {
        return Err(Error::FitFailed(format!("rate {lambda} far from log-linear estimate {lambda0}")));
    }
    let chi2_red = chi2 / (range.len() as f64 - 3.0).max(1.0);
    let t0 = d.t[start];
    let amp0 = amplitude * (-lambda * t0).exp();
    let res: Vec<f64> = range
        .clone()
        .map(|i| (d.y[i] - n_ss - amp0 * (-lambda * (d.t[i] - t0)).exp()) * d.w[i].sqrt())
        .collect();
    let mean = res.iter().sum::<f64>() / res.len() as f64;
    let var: f64 = res.iter().map(|r| (r - mean).powi(2)).sum();
    let cov: f64 = res.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    let residual_lag1 = if var > 0.0 { cov / var } else { 0.0 };
    let lambda_err = curvature_error(d, range.clone(), lambda, amplitude, if d.weighted { 1.0 } else { chi2_red });
    Ok(ExpFit {
        lambda,
        amplitude,
        n_ss,
        window: (d.t[start], d.t[hi - 1]),
        t_signal_end: d.t[sig_end - 1],
        lambda_err,
        r2,
        chi2_red,
        residual_lag1,
        n_points: range.len(),
    })
}

/// Joint fit with the rate found by golden-section search on `ln lambda`.
fn joint_fit(d: &Data, range: std::ops::Range<usize>, lo: f64, hi: f64) -> (f64, f64, f64, f64) {
    let t0 = d.t[range.start];
    let chi = |ll: f64| linear_part(d, range.clone(), ll.exp(), t0).2;
    // coarse scan then golden section
    let (a, b) = (lo.ln(), hi.ln());
    let steps = ((b - a) / 0.05).ceil().max(2.0) as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| a + (b - a) * k as f64 / steps as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&g| chi(g)).collect();
    let k = (0..grid.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (chi(x1), chi(x2));
    while b - a > 1e-12 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = chi(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = chi(x2);
        }
    }
    let lambda = (0.5 * (a + b)).exp();
    let (c, amp, chi2) = linear_part(d, range, lambda, t0);
    (lambda, c, amp * (lambda * t0).exp(), chi2)
}

/// Log-linear regression of `|y - c|` returning `(slope, R^2)`. With error
/// bars the points carry their log-space weight `((y - c) / SE)^2`, so the
/// noise floor does not dominate the coefficient of determination.
fn log_linear(d: &Data, range: std::ops::Range<usize>, c: f64) -> (f64, f64) {
    let pts: Vec<(f64, f64, f64)> = range
        .map(|i| {
            let dev = (d.y[i] - c).abs();
            let w = if d.weighted { dev * dev * d.w[i] } else { 1.0 };
            (d.t[i], dev.ln(), w)
        })
        .collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| p.2 * (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 };
    (slope, r2)
}

fn index_at(t: &[f64], x: f64) -> usize {
    t.iter().position(|&v| v >= x - 1e-12 * x.abs().max(1.0)).unwrap_or(t.len())
}

/// Fits `n(t) = n_ss + A e^{-lambda t}` to the asymptotic part of a series.
///
/// The window is the longest suffix `[t_lo, ...]` on which `ln|y - n_ss|`
/// is linear with `R^2 >= r2_min` up to the point where the deviation sinks
/// into the noise; `n_ss`, `A` and `lambda` are then fitted jointly by
/// weighted least squares on `[t_lo, t_end]`, and the window selection is
/// repeated with the updated `n_ss`.
pub fn fit_exponential(series: &ObservableSeries, opts: &FitOptions) -> Result<ExpFit> {
    let d = Data::new(series);
    let n = series.len();
    if n < opts.min_points.max(4) {
        return Err(Error::FitFailed(format!("series has only {n} points")));
    }
    let span = d.t[n - 1] - d.t[0];
    let (lo_rate, hi_rate) = (0.1 / span, 10.0 * (n - 1) as f64 / span);

    if let Some((a, b)) = opts.window {
        let (lo, hi) = (index_at(d.t, a), (index_at(d.t, b) + 1).min(n));
        if hi < lo + 4 {
            return Err(Error::FitFailed(format!("window [{a}, {b}] holds fewer than 4 points")));
        }
        let c = opts.n_ss_hint.unwrap_or_else(|| joint_fit(&d, lo..hi, lo_rate, hi_rate).1);
        let (slope, r2) = log_linear(&d, lo..hi, c);
        let lambda0 = opts.lambda_hint.unwrap_or(slope.abs().max(1e-6));
        return finish(&d, lo, hi, hi, lambda0, r2);
    }

    // The window search needs a rough asymptote; a fast early transient can
    // bias a global fit, so fall back to the late-time mean.
    let tail = &series.value[n - n / 3..];
    let guesses = [
        opts.n_ss_hint,
        Some(joint_fit(&d, 0..n, lo_rate, hi_rate).1),
        Some(pairwise_sum(tail) / tail.len() as f64),
        Some(joint_fit(&d, n / 2..n, lo_rate, hi_rate).1),
    ];
    let mut first_err = None;
    for c in guesses.into_iter().flatten() {
        match auto_window_fit(&d, c, opts) {
            Ok(fit) => return Ok(fit),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.expect("at least one guess"))
}

fn auto_window_fit(d: &Data, mut c: f64, opts: &FitOptions) -> Result<ExpFit> {
    let mut last: Option<ExpFit> = None;
    for _ in 0..4 {
        let fit = match (window_fit(d, c, opts), &last) {
            (Ok(f), _) => f,
            // a refinement that loses the window keeps the last accepted fit
            (Err(_), Some(_)) => break,
            (Err(e), None) => return Err(e),
        };
        let stable = last.as_ref().is_some_and(|l| l.window == fit.window);
        c = fit.n_ss;
        last = Some(fit);
        if stable {
            break;
        }
    }
    Ok(last.expect("at least one iteration"))
}

fn window_fit(d: &Data, c: f64, opts: &FitOptions) -> Result<ExpFit> {
    let n = d.t.len();
    let scale = d.y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let noise = |i: usize| if d.weighted { opts.signal_sigma / d.w[i].sqrt() } else { 1e-12 * scale };
    // resolved signal: contiguous stretch after the largest deviation
    let peak = (0..n).max_by(|&a, &b| (d.y[a] - c).abs().total_cmp(&(d.y[b] - c).abs())).unwrap_or(0);
    let sig_end = (peak..n).find(|&i| (d.y[i] - c).abs() <= noise(i)).unwrap_or(n);
    if sig_end < opts.min_points {
        return Err(Error::AsymptoticRegimeNotReached(format!("only {sig_end} resolved points above the noise")));
    }
    let start = (0..=sig_end - opts.min_points)
        .find(|&s| {
            let (slope, r2) = log_linear(d, s..sig_end, c);
            slope < 0.0 && r2 >= opts.r2_min
        })
        .ok_or_else(|| {
            Error::AsymptoticRegimeNotReached(format!("no log-linear window with R^2 >= {}", opts.r2_min))
        })?;
    let (slope, r2) = log_linear(d, start..sig_end, c);
    let lambda0 = -slope;
    let decades = ((d.y[start] - c).abs() / (d.y[sig_end - 1] - c).abs()).log10();
    // the fit window runs to the end of the series, where the plateau
    // pins n_ss
    let span = (d.t[n - 1] - d.t[start]) * lambda0;
    if decades < 2.0 && span < 3.0 {
        return Err(Error::AsymptoticRegimeNotReached(format!(
            "window spans {decades:.2} decades and {span:.2}/lambda"
        )));
    }
    Ok(settle_start(d, finish(d, start, n, sig_end, lambda0, r2)?, sig_end, opts))
}

fn curvature_error(d: &Data, range: std::ops::Range<usize>, lambda: f64, amp: f64, scale: f64) -> f64 {
    // shifted origin for conditioning; the rate variance is unaffected
    let t0 = d.t[range.start];
    let amp = amp * (-lambda * t0).exp();
    let mut m = Matrix3::zeros();
    for i in range {
        let e = (-lambda * (d.t[i] - t0)).exp();
        let g = Vector3::new(1.0, e, -amp * (d.t[i] - t0) * e);
        m += g * g.transpose() * d.w[i];
    }
    m.try_inverse().map_or(f64::NAN, |inv| (inv[(2, 2)] * scale).sqrt())
}

/// Bootstrap over trajectories: resamples the per-trajectory series with
/// replacement, refits each replicate with `opts` and returns the standard
/// deviation of the refitted rates together with the rates themselves.
/// Without a fixed window in `opts` every replicate selects its own window,
/// so the spread includes the variance of the window choice, which on
/// ensemble data usually dominates. Replicates that cannot be fitted are
/// dropped.
pub fn bootstrap_lambda(
    times: &[f64],
    per_trajectory: &[Vec<f64>],
    fit: &ExpFit,
    opts: &FitOptions,
    n_boot: usize,
    seed: u64,
    exec: Execution,
) -> (f64, Vec<f64>) {
    let n = per_trajectory.len();
    if n < 2 || n_boot < 2 {
        return (f64::NAN, Vec::new());
    }
    let opts = FitOptions { lambda_hint: Some(fit.lambda), n_ss_hint: Some(fit.n_ss), ..opts.clone() };
    let nt = times.len();
    let lambdas: Vec<f64> = exec
        .map_indices(n_boot, |b| {
            let mut rng = trajectory_rng(seed, b as u64);
            let mut sum = vec![0.0; nt];
            let mut sumsq = vec![0.0; nt];
            for _ in 0..n {
                let s = &per_trajectory[rng.random_range(0..n)];
                for (k, v) in s.iter().enumerate() {
                    sum[k] += v;
                    sumsq[k] += v * v;
                }
            }
            let nf = n as f64;
            let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
            let se: Vec<f64> =
                sum.iter().zip(&sumsq).map(|(s, q)| (((q - s * s / nf) / (nf - 1.0)).max(0.0) / nf).sqrt()).collect();
            let series = ObservableSeries::new(ObservableKind::Custom, times.to_vec(), mean, se);
            fit_exponential(&series, &opts).map(|f| f.lambda).unwrap_or(f64::NAN)
        })
        .into_iter()
        .filter(|l| l.is_finite())
        .collect();
    let m = lambdas.len() as f64;
    if lambdas.len() < 2 {
        return (f64::NAN, lambdas);
    }
    let mean = pairwise_sum(&lambdas) / m;
    let var: Vec<f64> = lambdas.iter().map(|l| (l - mean).powi(2)).collect();
    ((pairwise_sum(&var) / (m - 1.0)).sqrt(), lambdas)
}
