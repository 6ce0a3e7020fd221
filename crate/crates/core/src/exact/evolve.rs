use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::basis::{DensityMatrix, FockBasis, Observable};
use super::liouvillian::{build_liouvillian, Liouvillian};
use crate::error::{Error, Result};
use crate::model::{LatticeSpec, ModelParams};

/// Fraction of the RK4 stability radius used for the automatic step.
const STABILITY_SAFETY: f64 = 2.4;
const TRACE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub population: Vec<f64>,
    /// Largest `|Tr rho - 1|` seen during the run.
    pub max_trace_deviation: f64,
    pub dt: f64,
    pub final_state: DensityMatrix,
}

fn check_state(rho: &DensityMatrix) -> Result<()> {
    let herm = rho.hermiticity_error();
    let tr = rho.trace();
    if herm > 1e-10 || (tr - 1.0).norm() > 1e-8 {
        return Err(Error::InvalidConfig(format!(
            "initial state must be Hermitian with unit trace (hermiticity {herm:.2e}, trace {tr})"
        )));
    }
    Ok(())
}

struct Rk4 {
    k: DensityMatrix,
    acc: DensityMatrix,
    tmp: DensityMatrix,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        Self { k: DensityMatrix::zeros(dim), acc: DensityMatrix::zeros(dim), tmp: DensityMatrix::zeros(dim) }
    }

    /// One classical RK4 step; returns `||L rho||_1` at the start.
    fn step(&mut self, liou: &Liouvillian, rho: &mut DensityMatrix, dt: f64) -> f64 {
        liou.apply(rho, &mut self.k);
        let residual = self.k.l1_norm();
        axpy_into(&mut self.acc.data, &self.k.data, dt / 6.0, None);
        axpy_into(&mut self.tmp.data, &self.k.data, 0.5 * dt, Some(&rho.data));
        for (w, h) in [(dt / 3.0, 0.5 * dt), (dt / 3.0, dt)] {
            liou.apply(&self.tmp, &mut self.k);
            add_scaled(&mut self.acc.data, &self.k.data, w);
            axpy_into(&mut self.tmp.data, &self.k.data, h, Some(&rho.data));
        }
        liou.apply(&self.tmp, &mut self.k);
        add_scaled(&mut self.acc.data, &self.k.data, dt / 6.0);
        add_scaled(&mut rho.data, &self.acc.data, 1.0);
        rho.time += dt;
        residual
    }
}

/// `dst = base + s * x` (or `dst = s * x` without base).
fn axpy_into(dst: &mut [Complex64], x: &[Complex64], s: f64, base: Option<&[Complex64]>) {
    match base {
        Some(b) => dst.iter_mut().zip(x).zip(b).for_each(|((d, x), b)| *d = b + x * s),
        None => dst.iter_mut().zip(x).for_each(|(d, x)| *d = x * s),
    }
}

fn add_scaled(dst: &mut [Complex64], x: &[Complex64], s: f64) {
    dst.iter_mut().zip(x).for_each(|(d, x)| *d += x * s);
}

fn step_size(liou: &Liouvillian, requested: f64) -> f64 {
    requested.min(STABILITY_SAFETY / liou.norm_bound())
}

/// Fixed-step classical RK4 from `rho0` to `rho0.time + t_end`. The step
/// is `min(dt, stability limit)`, shrunk so that it divides `t_end`.
/// Population is sampled every `sample_every` time units.
pub fn evolve(liou: &Liouvillian, rho0: &DensityMatrix, t_end: f64, dt: f64, sample_every: f64) -> Result<Evolution> {
    check_state(rho0)?;
    let h = step_size(liou, dt);
    let n_steps = (t_end / h).ceil().max(1.0) as usize;
    let h = t_end / n_steps as f64;
    let every = ((sample_every / h).round() as usize).max(1);
    let basis = &liou.basis;

    let mut rho = rho0.clone();
    let mut rk = Rk4::new(rho.dim);
    let mut times = vec![rho.time];
    let mut population = vec![rho.expectation(basis, Observable::Population)?];
    let mut max_dev: f64 = 0.0;
    for s in 1..=n_steps {
        rk.step(liou, &mut rho, h);
        let dev = (rho.trace() - 1.0).norm();
        max_dev = max_dev.max(dev);
        if dev > TRACE_TOL {
            return Err(Error::TraceDrift(dev));
        }
        if s % every == 0 || s == n_steps {
            times.push(rho.time);
            population.push(rho.expectation(basis, Observable::Population)?);
        }
    }
    Ok(Evolution { times, population, max_trace_deviation: max_dev, dt: h, final_state: rho })
}

#[derive(Debug, Clone)]
pub struct SteadyOptions {
    pub dt: f64,
    /// Stop when `||L rho||_1 < tol` (entrywise L1, which bounds the trace
    /// norm).
    pub tol: f64,
    pub max_time: f64,
    /// Starting state; the (displaced) vacuum when `None`.
    pub initial: Option<DensityMatrix>,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self { dt: 0.05, tol: 1e-9, max_time: 5000.0, initial: None }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyStateResult {
    pub rho: DensityMatrix,
    pub population: f64,
    pub residual: f64,
    pub steps: usize,
}

/// Long-time RK4 relaxation until the generator residual drops below
/// `opts.tol`.
pub fn steady_state(liou: &Liouvillian, opts: &SteadyOptions) -> Result<SteadyStateResult> {
    let basis = &liou.basis;
    let mut rho = opts.initial.clone().unwrap_or_else(|| DensityMatrix::vacuum(basis));
    check_state(&rho)?;
    rho.time = 0.0;
    let h = step_size(liou, opts.dt);
    let max_steps = (opts.max_time / h).ceil() as usize;
    let mut rk = Rk4::new(rho.dim);
    let mut residual = f64::INFINITY;
    for step in 0..max_steps {
        residual = rk.step(liou, &mut rho, h);
        let dev = (rho.trace() - 1.0).norm();
        if dev > TRACE_TOL {
            return Err(Error::TraceDrift(dev));
        }
        if residual < opts.tol {
            let population = rho.expectation(basis, Observable::Population)?;
            check_cutoff(basis, population)?;
            return Ok(SteadyStateResult { rho, population, residual, steps: step + 1 });
        }
    }
    Err(Error::NotConverged { steps: max_steps, residual })
}

fn check_cutoff(basis: &FockBasis, population: f64) -> Result<()> {
    if !basis.is_displaced() && population > basis.n_max as f64 - 2.0 {
        return Err(Error::CutoffTooSmall { n_max: basis.n_max, population });
    }
    Ok(())
}

/// Largest dimension^2 accepted by [`steady_state_direct`].
const DIRECT_LIMIT: usize = 2500;

/// Null space of the dense superoperator with the unit-trace condition
/// replacing one equation. Cross-check for small systems only.
pub fn steady_state_direct(liou: &Liouvillian) -> Result<DensityMatrix> {
    let d = liou.dim();
    if d * d > DIRECT_LIMIT {
        return Err(Error::DimensionCap { dimension: d * d, cap: DIRECT_LIMIT });
    }
    let mut m: DMatrix<Complex64> = liou.dense_superoperator();
    let mut rhs = DVector::zeros(d * d);
    for k in 0..d * d {
        m[(0, k)] = Complex64::new(0.0, 0.0);
    }
    for i in 0..d {
        m[(0, i * d + i)] = Complex64::new(1.0, 0.0);
    }
    rhs[0] = Complex64::new(1.0, 0.0);
    let sol = m.lu().solve(&rhs).ok_or_else(|| Error::FitFailed("singular Liouvillian".into()))?;
    Ok(DensityMatrix { dim: d, data: sol.iter().copied().collect(), time: 0.0 })
}

#[derive(Debug, Clone)]
pub struct CutoffScan {
    pub n_max: usize,
    pub population: f64,
    /// `(n_max, population)` for every cutoff tried.
    pub history: Vec<(usize, f64)>,
    pub steady: SteadyStateResult,
}

/// Raises the cutoff in steps of `increment` until the steady-state
/// population changes by less than `rel_tol` (relative).
pub fn converge_cutoff(
    params: &ModelParams,
    lattice: &LatticeSpec,
    start: &FockBasis,
    increment: usize,
    rel_tol: f64,
    max_rounds: usize,
    cap: usize,
    opts: &SteadyOptions,
) -> Result<CutoffScan> {
    let mut basis = start.clone();
    let mut history = Vec::new();
    let mut prev: Option<(FockBasis, SteadyStateResult)> = None;
    for _ in 0..max_rounds.max(2) {
        let liou = build_liouvillian(params, lattice, &basis, cap)?;
        // warm start from the previous cutoff
        let initial = prev.as_ref().map(|(b, p)| p.rho.embed(b, &basis)).or_else(|| opts.initial.clone());
        let ss = match steady_state(&liou, &SteadyOptions { initial, ..opts.clone() }) {
            Err(Error::CutoffTooSmall { .. }) => {
                basis.n_max += increment;
                continue;
            }
            other => other?,
        };
        history.push((basis.n_max, ss.population));
        if let Some((b, p)) = prev {
            let rel = (ss.population - p.population).abs() / ss.population.abs().max(1e-300);
            if rel < rel_tol {
                return Ok(CutoffScan { n_max: b.n_max, population: p.population, history, steady: p });
            }
        }
        prev = Some((basis.clone(), ss));
        basis.n_max += increment;
    }
    let residual = prev.map_or(f64::INFINITY, |p| p.1.residual);
    Err(Error::NotConverged { steps: history.len(), residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::DEFAULT_DIMENSION_CAP;
    use crate::model::LatticeKind;

    fn single() -> LatticeSpec {
        LatticeSpec::wrapped(LatticeKind::Ring, 1).unwrap()
    }

    fn p1(delta: f64, u: f64, f: f64) -> ModelParams {
        ModelParams { delta, u, f, j_hop: 0.0, gamma: 1.0, z: 2 }
    }

    #[test]
    fn single_photon_decays_exponentially() {
        let lat = single();
        let basis = FockBasis::new(1, 4);
        let liou = build_liouvillian(&p1(0.1, 0.0, 0.0), &lat, &basis, 100).unwrap();
        let ev = evolve(&liou, &DensityMatrix::basis_state(&basis, &[1]), 5.0, 0.01, 0.5).unwrap();
        for (t, n) in ev.times.iter().zip(&ev.population) {
            assert!((n - (-t).exp()).abs() < 1e-6, "t={t}");
        }
        assert!(ev.max_trace_deviation < 1e-8);
    }

    #[test]
    fn undriven_vacuum_is_stationary() {
        let lat = single();
        let basis = FockBasis::new(1, 6);
        let liou = build_liouvillian(&p1(0.1, 0.1, 0.0), &lat, &basis, 100).unwrap();
        let ev = evolve(&liou, &DensityMatrix::vacuum(&basis), 3.0, 0.05, 1.0).unwrap();
        assert!(ev.population.iter().all(|n| n.abs() < 1e-15));
    }

    #[test]
    fn linear_cavity_steady_state() {
        let lat = single();
        let basis = FockBasis::new(1, 25);
        let liou = build_liouvillian(&p1(0.1, 0.0, 1.0), &lat, &basis, 100).unwrap();
        let ss = steady_state(&liou, &SteadyOptions::default()).unwrap();
        assert!((ss.population - 1.0 / (0.01 + 0.25)).abs() < 1e-6);
        let g2 = ss.rho.expectation(&basis, Observable::G2).unwrap();
        assert!((g2 - 1.0).abs() < 1e-8, "g2 = {g2}");
    }

    #[test]
    fn undriven_steady_state_is_vacuum() {
        let lat = single();
        let basis = FockBasis::new(1, 5);
        let liou = build_liouvillian(&p1(0.1, 0.1, 0.0), &lat, &basis, 100).unwrap();
        let opts = SteadyOptions { initial: Some(DensityMatrix::basis_state(&basis, &[2])), ..Default::default() };
        let ss = steady_state(&liou, &opts).unwrap();
        assert!(ss.population.abs() < 1e-9);
    }

    #[test]
    fn direct_and_relaxation_steady_states_agree() {
        let lat = LatticeSpec::wrapped(LatticeKind::Ring, 2).unwrap();
        let p = ModelParams::for_lattice(&lat, 0.1, 0.3, 0.8, 0.9).unwrap();
        let basis = FockBasis::new(2, 5);
        let liou = build_liouvillian(&p, &lat, &basis, 100).unwrap();
        let relaxed = steady_state(&liou, &SteadyOptions::default()).unwrap();
        let direct = steady_state_direct(&liou).unwrap();
        let nd = direct.expectation(&basis, Observable::Population).unwrap();
        assert!((nd - relaxed.population).abs() < 1e-6);
        let worst = direct.data.iter().zip(&relaxed.rho.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-6);
    }

    #[test]
    fn relaxation_keeps_state_physical() {
        let lat = LatticeSpec::wrapped(LatticeKind::Ring, 2).unwrap();
        let p = ModelParams::for_lattice(&lat, 0.1, 0.1, 1.2, 0.9).unwrap();
        let basis = FockBasis::new(2, 8);
        let liou = build_liouvillian(&p, &lat, &basis, DEFAULT_DIMENSION_CAP).unwrap();
        let mut rho = DensityMatrix::vacuum(&basis);
        let mut rk = Rk4::new(rho.dim);
        for _ in 0..200 {
            rk.step(&liou, &mut rho, 0.02);
            assert!(rho.hermiticity_error() < 1e-10);
            assert!((rho.trace() - 1.0).norm() < 1e-8);
        }
        assert!(rho.min_eigenvalue() > -1e-8);
    }

    #[test]
    fn rejects_unphysical_initial_state() {
        let lat = single();
        let basis = FockBasis::new(1, 3);
        let liou = build_liouvillian(&p1(0.1, 0.0, 0.0), &lat, &basis, 100).unwrap();
        let bad = DensityMatrix::zeros(4);
        assert!(evolve(&liou, &bad, 1.0, 0.01, 0.1).is_err());
    }

    #[test]
    fn small_cutoff_is_flagged() {
        let lat = single();
        let basis = FockBasis::new(1, 3);
        let liou = build_liouvillian(&p1(0.1, 0.0, 2.0), &lat, &basis, 100).unwrap();
        assert!(matches!(steady_state(&liou, &SteadyOptions::default()), Err(Error::CutoffTooSmall { .. })));
    }

    #[test]
    fn coupled_linear_modes_are_coherent() {
        // U = 0: every site sits in a coherent state with n = F^2 / ((Delta + zJ)^2 + 1/4)
        let lat = LatticeSpec::wrapped(LatticeKind::Ring, 2).unwrap();
        let p = ModelParams::for_lattice(&lat, 0.1, 0.0, 0.6, 0.9).unwrap();
        let basis = FockBasis::new(2, 8);
        let liou = build_liouvillian(&p, &lat, &basis, DEFAULT_DIMENSION_CAP).unwrap();
        let ss = steady_state(&liou, &SteadyOptions::default()).unwrap();
        let expect = 0.36 / (1.0 + 0.25);
        assert!((ss.population - expect).abs() < 1e-6, "{} vs {expect}", ss.population);
    }

    #[test]
    fn displaced_frame_reproduces_plain_result() {
        let lat = single();
        let p = p1(0.1, 0.1, 1.0);
        let plain = build_liouvillian(&p, &lat, &FockBasis::new(1, 25), 100).unwrap();
        let beta = crate::meanfield::meanfield_roots(&p)[0].alpha;
        let shifted = build_liouvillian(&p, &lat, &FockBasis::displaced(1, 25, beta), 100).unwrap();
        let a = steady_state(&plain, &SteadyOptions::default()).unwrap();
        let b = steady_state(&shifted, &SteadyOptions::default()).unwrap();
        assert!((a.population - b.population).abs() < 1e-7, "{} {}", a.population, b.population);
    }

    #[test]
    fn warm_started_cutoff_scan_matches_cold_solve() {
        let lat = single();
        let p = p1(0.1, 0.1, 1.5);
        let scan = converge_cutoff(&p, &lat, &FockBasis::new(1, 12), 4, 1e-6, 6, 100, &SteadyOptions::default()).unwrap();
        assert!(scan.history.len() >= 2);
        let liou = build_liouvillian(&p, &lat, &FockBasis::new(1, scan.n_max), 100).unwrap();
        let cold = steady_state(&liou, &SteadyOptions::default()).unwrap();
        assert!((cold.population - scan.population).abs() < 1e-8, "{} {}", cold.population, scan.population);
    }

}
