use crate::error::{Error, Result};

/// `min_lambda(L) = prefactor * L^{-eta}`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PowerLawFit {
    pub eta: f64,
    pub prefactor: f64,
    pub eta_err: f64,
    pub n_points: usize,
}

/// Weighted linear regression of `ln(min lambda)` on `ln L`.
///
/// With `errors` the weights are `(lambda / err)^2` and `eta_err` follows
/// from them; otherwise the regression is unweighted and `eta_err` comes
/// from the residual scatter.
pub fn fit_power_law(sizes: &[f64], minima: &[f64], errors: Option<&[f64]>) -> Result<PowerLawFit> {
    let n = sizes.len();
    if n < 3 || minima.len() != n || errors.is_some_and(|e| e.len() != n) {
        return Err(Error::FitFailed(format!("need >= 3 matching points, got {n} sizes and {} minima", minima.len())));
    }
    if sizes.iter().chain(minima).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::FitFailed("sizes and gap minima must be positive".into()));
    }
    let x: Vec<f64> = sizes.iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = minima.iter().map(|m| m.ln()).collect();
    let weighted = errors.is_some_and(|e| e.iter().all(|v| *v > 0.0 && v.is_finite()));
    let w: Vec<f64> = match errors {
        Some(e) if weighted => minima.iter().zip(e).map(|(m, s)| (m / s).powi(2)).collect(),
        _ => vec![1.0; n],
    };
    let s: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(&x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(&y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = w.iter().zip(x.iter().zip(&y)).map(|(w, (x, y))| w * x * y).sum();
    let det = s * sxx - sx * sx;
    if det <= 0.0 {
        return Err(Error::FitFailed("sizes must not all be equal".into()));
    }
    let slope = (s * sxy - sx * sy) / det;
    let icpt = (sxx * sy - sx * sxy) / det;
    let eta_err = if weighted {
        (s / det).sqrt()
    } else {
        let rss: f64 = x.iter().zip(&y).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
        (rss / (n as f64 - 2.0) * s / det).sqrt()
    };
    Ok(PowerLawFit { eta: -slope, prefactor: icpt.exp(), eta_err, n_points: n })
}
