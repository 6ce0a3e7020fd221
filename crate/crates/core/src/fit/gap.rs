use crate::error::Result;
use crate::fit::exponential::{bootstrap_lambda, fit_exponential, ExpFit, FitOptions};
use crate::model::{LatticeSpec, ModelParams};
use crate::observables::population;
use crate::twa::{run_ensemble, EngineConfig};

#[derive(Debug, Clone)]
pub struct GapOptions {
    pub fit: FitOptions,
    /// Bootstrap resamples per drive value; 0 keeps the curvature error.
    pub n_boot: usize,
    pub bootstrap_seed: u64,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self { fit: FitOptions::default(), n_boot: 100, bootstrap_seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct GapPoint {
    pub f: f64,
    /// Steady population from the ensemble tail, for reference.
    pub population_end: f64,
    pub fit: std::result::Result<ExpFit, String>,
}

impl GapPoint {
    pub fn lambda(&self) -> Option<(f64, f64)> {
        self.fit.as_ref().ok().map(|f| (f.lambda, f.lambda_err))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapMinimum {
    pub f: f64,
    pub lambda: f64,
    pub lambda_err: f64,
    /// Whether a parabola through the grid minimum and its neighbors was used.
    pub refined: bool,
}

#[derive(Debug, Clone)]
pub struct GapScan {
    pub points: Vec<GapPoint>,
    pub minimum: Option<GapMinimum>,
}

/// Relaxation rate of the population, started from the vacuum, for each
/// drive strength. Points whose fit fails are kept with the failure reason.
pub fn gap_vs_drive(
    template: &ModelParams,
    lattice: &LatticeSpec,
    f_values: &[f64],
    engine: &EngineConfig,
    opts: &GapOptions,
) -> Result<GapScan> {
    let cfg = EngineConfig { store_series: true, ..engine.clone() };
    cfg.validate(lattice)?;
    let exec = engine.execution;
    let points = exec
        .map_indices(f_values.len(), |k| -> Result<GapPoint> {
            let f = f_values[k];
            let ens = run_ensemble(&template.with_drive(f), lattice, &cfg)?;
            let series = population(&ens)?;
            let population_end = *series.value.last().unwrap_or(&f64::NAN);
            let fit = fit_exponential(&series, &opts.fit).map(|mut fit| {
                if opts.n_boot >= 2 {
                    let traj = ens.series.as_deref().unwrap_or(&[]);
                    let seed = opts.bootstrap_seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
                    let (err, _) = bootstrap_lambda(&ens.times, traj, &fit, &opts.fit, opts.n_boot, seed, exec);
                    if err.is_finite() {
                        fit.lambda_err = err;
                    }
                }
                fit
            });
            Ok(GapPoint { f, population_end, fit: fit.map_err(|e| e.to_string()) })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let minimum = locate_minimum(&points);
    Ok(GapScan { points, minimum })
}

fn locate_minimum(points: &[GapPoint]) -> Option<GapMinimum> {
    let k = (0..points.len())
        .filter(|&i| points[i].lambda().is_some())
        .min_by(|&a, &b| points[a].lambda().unwrap().0.total_cmp(&points[b].lambda().unwrap().0))?;
    let (lambda, lambda_err) = points[k].lambda().unwrap();
    let grid = GapMinimum { f: points[k].f, lambda, lambda_err, refined: false };
    if k == 0 || k + 1 >= points.len() {
        return Some(grid);
    }
    let (Some((l0, _)), Some((l2, _))) = (points[k - 1].lambda(), points[k + 1].lambda()) else {
        return Some(grid);
    };
    let (x0, x1, x2) = (points[k - 1].f, points[k].f, points[k + 1].f);
    let (y0, y1, y2) = (l0.ln(), lambda.ln(), l2.ln());
    // vertex of the parabola through three points in (F, ln lambda)
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den == 0.0 {
        return Some(grid);
    }
    let xv = x1 - 0.5 * num / den;
    if !(xv > x0 && xv < x2) {
        return Some(grid);
    }
    let lag = |x: f64| {
        y0 * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1))
    };
    let lv = lag(xv).exp();
    Some(GapMinimum { f: xv, lambda: lv, lambda_err: lambda_err * lv / lambda, refined: true })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(f: f64, lambda: Option<f64>) -> GapPoint {
        let fit = lambda
            .map(|l| ExpFit {
                lambda: l,
                amplitude: 1.0,
                n_ss: 0.0,
                window: (0.0, 1.0),
                t_signal_end: 1.0,
                lambda_err: 0.01 * l,
                r2: 1.0,
                chi2_red: 1.0,
                residual_lag1: 0.0,
                n_points: 10,
            })
            .ok_or_else(|| "no fit".to_string());
        GapPoint { f, population_end: 0.0, fit }
    }

    #[test]
    fn parabolic_refinement_finds_vertex() {
        // ln lambda = -1 + 4 (F - 1.57)^2
        let pts: Vec<GapPoint> =
            [1.5, 1.55, 1.6, 1.65].iter().map(|&f| point(f, Some((-1.0 + 4.0 * (f - 1.57f64).powi(2)).exp()))).collect();
        let m = locate_minimum(&pts).unwrap();
        assert!(m.refined);
        assert!((m.f - 1.57).abs() < 1e-10);
        assert!((m.lambda - (-1f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn failed_points_are_skipped_and_edges_not_refined() {
        let pts = vec![point(1.0, Some(0.2)), point(1.1, None), point(1.2, Some(0.5))];
        let m = locate_minimum(&pts).unwrap();
        assert_eq!((m.f, m.refined), (1.0, false));
        assert!(locate_minimum(&[point(1.0, None)]).is_none());
    }
}
