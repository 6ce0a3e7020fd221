use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{drift_into, DriftKind, FieldState, LatticeSpec, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    #[default]
    Heun,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialState {
    /// Symmetric-ordering vacuum: `alpha = (xi1 + i xi2) / 2`.
    #[default]
    WignerVacuum,
    /// Coherent state `alpha0` plus vacuum noise on every site.
    Coherent(Complex64),
    /// Fixed amplitudes, no noise.
    Custom(Vec<Complex64>),
}

/// Integration and ensemble settings. Times are in units of `1/gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub record_stride: usize,
    pub scheme: Scheme,
    pub initial_state: InitialState,
    /// Langevin noise on/off. With the noise off and `DriftKind::MeanField`
    /// the engine integrates the Gross-Pitaevskii equation.
    pub noise: bool,
    pub drift: DriftKind,
    /// If set, each trajectory also averages its moments over recorded
    /// times `t >= t_window`.
    pub t_window: Option<f64>,
    /// Keep every trajectory's site-averaged population series.
    pub store_series: bool,
    /// Keep full per-site records for the first `keep_trajectories`.
    pub keep_trajectories: usize,
    /// Maximum tolerated fraction of diverged trajectories.
    pub max_diverged_fraction: f64,
    pub execution: Execution,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            t_end: 10.0,
            n_traj: 1000,
            seed: 0,
            record_stride: 10,
            scheme: Scheme::Heun,
            initial_state: InitialState::WignerVacuum,
            noise: true,
            drift: DriftKind::Wigner,
            t_window: None,
            store_series: false,
            keep_trajectories: 0,
            max_diverged_fraction: 1e-3,
            execution: Execution::Parallel,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self, lattice: &LatticeSpec) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return Err(Error::InvalidConfig(format!("t_end = {} must be >= dt = {}", self.t_end, self.dt)));
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidConfig("n_traj must be at least 1".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig("record_stride must be at least 1".into()));
        }
        if let InitialState::Custom(a) = &self.initial_state {
            if a.len() != lattice.n_sites() {
                return Err(Error::SiteMismatch { expected: lattice.n_sites(), got: a.len() });
            }
        }
        if let Some(t) = self.t_window {
            if !(t < self.t_end) {
                return Err(Error::InvalidConfig(format!("t_window = {t} must be before t_end = {}", self.t_end)));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Recorded sample times: 0, then every `record_stride` steps.
    pub fn record_times(&self) -> Vec<f64> {
        let n = self.n_steps() / self.record_stride;
        (0..=n).map(|k| (k * self.record_stride) as f64 * self.dt).collect()
    }
}

/// Independent stream for trajectory `index`: the ChaCha key comes from
/// `seed`, the stream id is the trajectory index and the block counter
/// advances with the steps.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[inline]
fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Wiener increment `dW = sqrt(dt/2)(xi1 + i xi2)`, so `<dW dW*> = dt`.
#[inline]
pub fn noise_increment<R: Rng + ?Sized>(dt: f64, rng: &mut R) -> Complex64 {
    complex_normal(rng) * (0.5 * dt).sqrt()
}

pub fn sample_initial<R: Rng + ?Sized>(kind: &InitialState, lattice: &LatticeSpec, rng: &mut R) -> FieldState {
    let n = lattice.n_sites();
    let amplitudes = match kind {
        InitialState::WignerVacuum => (0..n).map(|_| complex_normal(rng) * 0.5).collect(),
        InitialState::Coherent(a0) => (0..n).map(|_| a0 + complex_normal(rng) * 0.5).collect(),
        InitialState::Custom(a) => a.clone(),
    };
    FieldState::new(amplitudes, 0.0)
}

/// Reusable integrator with scratch buffers for one worker.
pub struct Stepper<'a> {
    params: &'a ModelParams,
    lattice: &'a LatticeSpec,
    scheme: Scheme,
    drift: DriftKind,
    noise: bool,
    dt: f64,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    pred: Vec<Complex64>,
    dw: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    pub fn new(params: &'a ModelParams, lattice: &'a LatticeSpec, scheme: Scheme, drift: DriftKind, noise: bool, dt: f64) -> Self {
        let n = lattice.n_sites();
        let zero = Complex64::new(0.0, 0.0);
        Self { params, lattice, scheme, drift, noise, dt, k1: vec![zero; n], k2: vec![zero; n], pred: vec![zero; n], dw: vec![zero; n] }
    }

    /// Advances `amps` by one step. Non-finite results are left in place
    /// for the caller to detect.
    #[inline]
    pub fn advance<R: Rng + ?Sized>(&mut self, amps: &mut [Complex64], rng: &mut R) {
        let sigma = (0.5 * self.params.gamma).sqrt();
        if self.noise {
            for w in self.dw.iter_mut() {
                *w = noise_increment(self.dt, rng) * sigma;
            }
        }
        self.integrate(amps);
    }

    /// Like [`Stepper::advance`] with given complex Wiener increments
    /// (`E|dW|^2 = dt`), e.g. sums of finer increments for pathwise
    /// convergence checks.
    pub fn advance_with(&mut self, amps: &mut [Complex64], dw: &[Complex64]) {
        let sigma = (0.5 * self.params.gamma).sqrt();
        if self.noise {
            for (w, d) in self.dw.iter_mut().zip(dw) {
                *w = d * sigma;
            }
        }
        self.integrate(amps);
    }

    #[inline]
    fn integrate(&mut self, amps: &mut [Complex64]) {
        let dt = self.dt;
        drift_into(self.params, self.lattice, self.drift, amps, &mut self.k1);
        match self.scheme {
            Scheme::EulerMaruyama => {
                for ((a, k), w) in amps.iter_mut().zip(&self.k1).zip(&self.dw) {
                    *a += k * dt + w;
                }
            }
            Scheme::Heun => {
                for (((p, a), k), w) in self.pred.iter_mut().zip(amps.iter()).zip(&self.k1).zip(&self.dw) {
                    *p = a + k * dt + w;
                }
                drift_into(self.params, self.lattice, self.drift, &self.pred, &mut self.k2);
                let h = 0.5 * dt;
                for (((a, k1), k2), w) in amps.iter_mut().zip(&self.k1).zip(&self.k2).zip(&self.dw) {
                    *a += (k1 + k2) * h + w;
                }
            }
        }
    }
}

/// One stochastic step of a single state (allocates; see [`Stepper`] for
/// loops).
#[allow(clippy::too_many_arguments)]
pub fn step<R: Rng + ?Sized>(
    state: &mut FieldState,
    params: &ModelParams,
    lattice: &LatticeSpec,
    dt: f64,
    rng: &mut R,
    scheme: Scheme,
    drift: DriftKind,
    noise: bool,
) -> Result<()> {
    state.check(lattice)?;
    let mut stepper = Stepper::new(params, lattice, scheme, drift, noise, dt);
    stepper.advance(&mut state.amplitudes, rng);
    state.time += dt;
    state.check(lattice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LatticeKind;

    fn single() -> LatticeSpec {
        LatticeSpec::wrapped(LatticeKind::Ring, 1).unwrap()
    }

    #[test]
    fn wigner_vacuum_moments() {
        let lat = single();
        let mut rng = trajectory_rng(7, 0);
        let n = 100_000;
        let samples: Vec<Complex64> =
            (0..n).map(|_| sample_initial(&InitialState::WignerVacuum, &lat, &mut rng).amplitudes[0]).collect();
        let pops: Vec<f64> = samples.iter().map(|a| a.norm_sqr()).collect();
        let mean = pops.iter().sum::<f64>() / n as f64;
        let var = pops.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean} se {se}");
        let a2 = samples.iter().map(|a| a * a).sum::<Complex64>() / n as f64;
        // |alpha^2| has second moment 1/2, so SE of the mean is sqrt(0.5/n)
        assert!(a2.norm() < 3.0 * (0.5 / n as f64).sqrt() * std::f64::consts::SQRT_2);
    }

    #[test]
    fn coherent_initial_population() {
        let lat = single();
        let mut rng = trajectory_rng(8, 0);
        let n = 100_000;
        let pops: Vec<f64> = (0..n)
            .map(|_| sample_initial(&InitialState::Coherent(Complex64::new(2.0, 0.0)), &lat, &mut rng).amplitudes[0].norm_sqr())
            .collect();
        let mean = pops.iter().sum::<f64>() / n as f64;
        let var = pops.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 4.5).abs() < 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn noise_increment_variance() {
        let dt = 0.01;
        let mut rng = trajectory_rng(9, 3);
        let n = 100_000;
        let re: Vec<f64> = (0..n).map(|_| noise_increment(dt, &mut rng).re).collect();
        let mean = re.iter().sum::<f64>() / n as f64;
        let var = re.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // SE of a Gaussian sample variance is sigma^2 sqrt(2/(n-1))
        let se = 0.5 * dt * (2.0 / (n - 1) as f64).sqrt();
        assert!((var - 0.5 * dt).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn deterministic_linear_damping() {
        let lat = single();
        let p = ModelParams { delta: 0.0, u: 0.0, f: 0.0, j_hop: 0.0, gamma: 1.0, z: 2 };
        let mut s = FieldState::homogeneous(&lat, Complex64::new(1.0, 0.0));
        let mut rng = trajectory_rng(0, 0);
        let dt = 1e-3;
        for _ in 0..2000 {
            step(&mut s, &p, &lat, dt, &mut rng, Scheme::Heun, DriftKind::Wigner, false).unwrap();
        }
        assert!((s.amplitudes[0].norm_sqr() - (-2.0f64).exp()).abs() < 1e-6);
        assert!((s.time - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_noise_stays_on_stable_branch() {
        let lat = LatticeSpec::ring(4).unwrap();
        let p = ModelParams::for_lattice(&lat, 0.1, 0.1, 1.5695, 0.9).unwrap();
        let branches = crate::meanfield::meanfield_roots(&p);
        let mut rng = trajectory_rng(0, 0);
        for b in branches.iter().filter(|b| b.stable) {
            let mut s = FieldState::homogeneous(&lat, b.alpha);
            for _ in 0..5000 {
                step(&mut s, &p, &lat, 1e-2, &mut rng, Scheme::Heun, DriftKind::MeanField, false).unwrap();
            }
            for a in &s.amplitudes {
                assert!((a - b.alpha).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn step_reports_divergence() {
        let lat = single();
        let p = ModelParams { delta: 0.0, u: 1.0, f: 0.0, j_hop: 0.0, gamma: 1.0, z: 2 };
        let mut s = FieldState::homogeneous(&lat, Complex64::new(1e200, 0.0));
        let mut rng = trajectory_rng(0, 0);
        assert!(step(&mut s, &p, &lat, 1.0, &mut rng, Scheme::EulerMaruyama, DriftKind::Wigner, false).is_err());
    }

    #[test]
    fn config_validation() {
        let lat = single();
        let ok = EngineConfig::default();
        assert!(ok.validate(&lat).is_ok());
        assert!(EngineConfig { dt: 0.0, ..ok.clone() }.validate(&lat).is_err());
        assert!(EngineConfig { t_end: 1e-3, ..ok.clone() }.validate(&lat).is_err());
        assert!(EngineConfig { n_traj: 0, ..ok.clone() }.validate(&lat).is_err());
        assert!(EngineConfig { t_window: Some(20.0), ..ok.clone() }.validate(&lat).is_err());
        let custom = InitialState::Custom(vec![Complex64::new(0.0, 0.0); 3]);
        assert!(EngineConfig { initial_state: custom, ..ok }.validate(&lat).is_err());
    }

    #[test]
    fn record_times_are_evenly_spaced() {
        let c = EngineConfig { dt: 0.01, t_end: 1.0, record_stride: 10, ..Default::default() };
        let t = c.record_times();
        assert_eq!(t.len(), 11);
        for w in t.windows(2) {
            assert!((w[1] - w[0] - 0.1).abs() < 1e-12);
        }
    }
}
