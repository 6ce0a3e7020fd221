//! Homogeneous Gross-Pitaevskii steady states.
//!
//! For a homogeneous field the fixed-point condition
//! `alpha (i(Delta + zJ - U n) - gamma/2) = i F` reduces to a cubic in the
//! population `n = |alpha|^2`:
//!
//! `U^2 n^3 - 2 U D n^2 + (D^2 + gamma^2/4) n - F^2 = 0`, with `D = Delta + zJ`.
//!
//! The cubic is solved through the eigenvalues of its companion matrix and
//! the roots are polished with Newton steps.

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::model::ModelParams;

/// One homogeneous fixed point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeanFieldBranch {
    pub n: f64,
    pub alpha: Complex64,
    pub stable: bool,
}

/// Coefficients `[c3, c2, c1, c0]` of the steady-state cubic in `n`.
pub fn cubic_coefficients(params: &ModelParams) -> [f64; 4] {
    let d = params.delta + params.zj();
    let u = params.u;
    let g2 = 0.25 * params.gamma * params.gamma;
    [u * u, -2.0 * u * d, d * d + g2, -params.f * params.f]
}

fn eval_cubic(c: &[f64; 4], n: f64) -> f64 {
    ((c[0] * n + c[1]) * n + c[2]) * n + c[3]
}

fn eval_cubic_deriv(c: &[f64; 4], n: f64) -> f64 {
    (3.0 * c[0] * n + 2.0 * c[1]) * n + c[2]
}

/// Discriminant of the cubic; positive inside the bistable window.
pub fn discriminant(params: &ModelParams) -> f64 {
    let [a, b, c, d] = cubic_coefficients(params);
    18.0 * a * b * c * d - 4.0 * b * b * b * d + b * b * c * c - 4.0 * a * c * c * c - 27.0 * a * a * d * d
}

/// Residual of the cubic at `n`, i.e. `n((D - U n)^2 + gamma^2/4) - F^2`.
pub fn cubic_residual(params: &ModelParams, n: f64) -> f64 {
    eval_cubic(&cubic_coefficients(params), n)
}

fn polish(c: &[f64; 4], mut n: f64) -> f64 {
    for _ in 0..50 {
        let d = eval_cubic_deriv(c, n);
        if d == 0.0 {
            break;
        }
        let step = eval_cubic(c, n) / d;
        let next = n - step;
        if !next.is_finite() {
            break;
        }
        n = next;
        if step.abs() <= 1e-15 * n.abs().max(1e-300) {
            break;
        }
    }
    n
}

/// Real non-negative roots of the steady-state cubic, ascending.
pub fn population_roots(params: &ModelParams) -> Vec<f64> {
    let c = cubic_coefficients(params);
    if params.f == 0.0 {
        return vec![0.0];
    }
    if c[0] == 0.0 {
        // linear cavity
        return vec![-c[3] / c[2]];
    }
    // monic companion matrix of n^3 + a n^2 + b n + d
    let (a, b, d) = (c[1] / c[0], c[2] / c[0], c[3] / c[0]);
    let companion = Matrix3::new(0.0, 0.0, -d, 1.0, 0.0, -b, 0.0, 1.0, -a);
    let eig = companion.complex_eigenvalues();
    let mut eig: Vec<Complex64> = eig.iter().map(|z| Complex64::new(z.re, z.im)).collect();

    let mut roots: Vec<f64> = if discriminant(params) > 0.0 {
        eig.iter().map(|z| z.re).collect()
    } else {
        eig.sort_by(|x, y| x.im.abs().total_cmp(&y.im.abs()));
        vec![eig[0].re]
    };
    for r in roots.iter_mut() {
        *r = polish(&c, *r);
    }
    roots.retain(|&r| r >= 0.0);
    roots.sort_by(f64::total_cmp);
    roots
}

/// Field amplitude belonging to the population root `n`.
pub fn amplitude_for(params: &ModelParams, n: f64) -> Complex64 {
    let d = params.delta + params.zj();
    let denom = Complex64::new(-0.5 * params.gamma, d - params.u * n);
    Complex64::new(0.0, params.f) / denom
}

/// Eigenvalues of the 2x2 Jacobian of the homogeneous `(alpha, alpha*)`
/// mean-field dynamics linearised at `alpha`.
pub fn jacobian_eigenvalues(params: &ModelParams, alpha: Complex64) -> [Complex64; 2] {
    let d = params.delta + params.zj();
    let n = alpha.norm_sqr();
    let a = Complex64::new(-0.5 * params.gamma, d - 2.0 * params.u * n);
    let b = Complex64::new(0.0, -params.u) * alpha * alpha;
    let det = a.norm_sqr() - b.norm_sqr();
    let half_tr = a.re;
    let root = Complex64::new(half_tr * half_tr - det, 0.0).sqrt();
    [half_tr + root, half_tr - root]
}

/// All homogeneous fixed points for `params`, ascending in population.
pub fn meanfield_roots(params: &ModelParams) -> Vec<MeanFieldBranch> {
    population_roots(params)
        .into_iter()
        .map(|n| {
            let alpha = amplitude_for(params, n);
            let stable = jacobian_eigenvalues(params, alpha).iter().all(|e| e.re < 0.0);
            MeanFieldBranch { n, alpha, stable }
        })
        .collect()
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MeanFieldRow {
    pub f: f64,
    pub branches: Vec<MeanFieldBranch>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MeanFieldSweep {
    pub rows: Vec<MeanFieldRow>,
    /// Drive values where the root count changes, refined by bisection.
    pub spinodals: Vec<f64>,
}

impl MeanFieldSweep {
    /// `(F_low, F_high)` pairs bounding each multistable window found.
    pub fn bistable_windows(&self) -> Vec<(f64, f64)> {
        self.spinodals.chunks(2).filter(|w| w.len() == 2).map(|w| (w[0], w[1])).collect()
    }
}

const SPINODAL_TOL: f64 = 1e-6;

/// Runs [`meanfield_roots`] for every drive value and locates the spinodal
/// points from sign changes of the discriminant on the (sorted) grid.
pub fn meanfield_sweep(template: &ModelParams, f_values: &[f64]) -> MeanFieldSweep {
    let rows: Vec<MeanFieldRow> = f_values
        .iter()
        .map(|&f| MeanFieldRow { f, branches: meanfield_roots(&template.with_drive(f)) })
        .collect();

    let mut grid: Vec<f64> = f_values.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let disc = |f: f64| discriminant(&template.with_drive(f));
    let mut spinodals = Vec::new();
    for w in grid.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (dlo, dhi) = (disc(lo), disc(hi));
        if (dlo > 0.0) == (dhi > 0.0) {
            continue;
        }
        while hi - lo > SPINODAL_TOL {
            let mid = 0.5 * (lo + hi);
            if (disc(mid) > 0.0) == (dlo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        spinodals.push(0.5 * (lo + hi));
    }
    MeanFieldSweep { rows, spinodals }
}
