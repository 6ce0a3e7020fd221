use num_complex::Complex64;

use super::engine::{sample_initial, trajectory_rng, EngineConfig, Stepper};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{FieldState, LatticeSpec, ModelParams};

/// Site-averaged population above which a trajectory counts as diverged.
const DIVERGENCE_BOUND: f64 = 1e12;
const MAX_BATCHES: usize = 64;

/// Raw (symmetrically ordered) moments recorded per trajectory and time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moment {
    /// `(1/N) sum_j |alpha_j|^2`
    Population = 0,
    /// `(1/N) sum_j |alpha_j|^4`
    Quartic = 1,
    /// `|b_0|^2` with `b_0 = (1/sqrt N) sum_j alpha_j`
    ZeroMode = 2,
}

pub(crate) const N_MOMENTS: usize = 3;

fn moments_of(amps: &[Complex64]) -> [f64; N_MOMENTS] {
    let n = amps.len() as f64;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut b = Complex64::new(0.0, 0.0);
    for a in amps {
        let s = a.norm_sqr();
        p += s;
        q += s * s;
        b += a;
    }
    [p / n, q / n, b.norm_sqr() / n]
}

/// Sums and sums of squares of the recorded moments over a set of
/// trajectories, plus per-site populations at the final time.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    pub count: usize,
    n_times: usize,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    site_sum: Vec<f64>,
    site_sumsq: Vec<f64>,
}

impl MomentAccumulator {
    fn new(n_times: usize, n_sites: usize) -> Self {
        Self {
            count: 0,
            n_times,
            sum: vec![0.0; n_times * N_MOMENTS],
            sumsq: vec![0.0; n_times * N_MOMENTS],
            site_sum: vec![0.0; n_sites],
            site_sumsq: vec![0.0; n_sites],
        }
    }

    fn push(&mut self, moments: &[[f64; N_MOMENTS]], final_sites: &[f64]) {
        self.count += 1;
        for (t, m) in moments.iter().enumerate() {
            for (k, &v) in m.iter().enumerate() {
                self.sum[t * N_MOMENTS + k] += v;
                self.sumsq[t * N_MOMENTS + k] += v * v;
            }
        }
        for (j, &v) in final_sites.iter().enumerate() {
            self.site_sum[j] += v;
            self.site_sumsq[j] += v * v;
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq.iter_mut().zip(&other.sumsq) {
            *a += b;
        }
        for (a, b) in self.site_sum.iter_mut().zip(&other.site_sum) {
            *a += b;
        }
        for (a, b) in self.site_sumsq.iter_mut().zip(&other.site_sumsq) {
            *a += b;
        }
        self
    }

    /// Accumulator of this set with the trajectories of `other` removed.
    pub fn without(&self, other: &Self) -> Self {
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
        Self {
            count: self.count - other.count,
            n_times: self.n_times,
            sum: sub(&self.sum, &other.sum),
            sumsq: sub(&self.sumsq, &other.sumsq),
            site_sum: sub(&self.site_sum, &other.site_sum),
            site_sumsq: sub(&self.site_sumsq, &other.site_sumsq),
        }
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn sum(&self, m: Moment, t: usize) -> f64 {
        self.sum[t * N_MOMENTS + m as usize]
    }

    pub fn mean(&self, m: Moment, t: usize) -> f64 {
        self.sum(m, t) / self.count as f64
    }

    /// Standard error of the mean from the trajectory-to-trajectory spread.
    pub fn std_error(&self, m: Moment, t: usize) -> f64 {
        let i = t * N_MOMENTS + m as usize;
        mean_se(self.sum[i], self.sumsq[i], self.count).1
    }

    /// Mean and standard error of `|alpha_j|^2` at the final time.
    pub fn final_site_population(&self, site: usize) -> (f64, f64) {
        mean_se(self.site_sum[site], self.site_sumsq[site], self.count)
    }
}

fn mean_se(sum: f64, sumsq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = ((sumsq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Full per-site record of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub times: Vec<f64>,
    /// `[time][site]` raw Wigner `|alpha_j|^2`.
    pub site_population_w: Vec<Vec<f64>>,
    pub site_avg_population_w: Vec<f64>,
    pub final_state: FieldState,
}

/// Per-trajectory moments averaged over recorded times `t >= t_start`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSamples {
    pub t_start: f64,
    pub samples: Vec<[f64; N_MOMENTS]>,
}

impl WindowSamples {
    pub fn values(&self, m: Moment) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(move |s| s[m as usize])
    }
}

/// Result of [`run_ensemble`]. Only non-diverged trajectories contribute.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub times: Vec<f64>,
    pub n_sites: usize,
    pub n_requested: usize,
    pub n_diverged: usize,
    /// Fixed contiguous partition of the trajectory indices.
    pub batches: Vec<MomentAccumulator>,
    pub total: MomentAccumulator,
    /// Site-averaged population series, one per used trajectory.
    pub series: Option<Vec<Vec<f64>>>,
    pub window: Option<WindowSamples>,
    pub records: Vec<TrajectoryRecord>,
}

impl Ensemble {
    pub fn n_used(&self) -> usize {
        self.total.count
    }

    /// `(t, mean, SE)` of the raw site-averaged Wigner population.
    pub fn summary(&self) -> Vec<(f64, f64, f64)> {
        self.times
            .iter()
            .enumerate()
            .map(|(i, &t)| (t, self.total.mean(Moment::Population, i), self.total.std_error(Moment::Population, i)))
            .collect()
    }
}

struct Partial {
    acc: MomentAccumulator,
    series: Vec<Vec<f64>>,
    window: Vec<[f64; N_MOMENTS]>,
    records: Vec<TrajectoryRecord>,
    diverged: usize,
}

impl Partial {
    fn merge(mut self, mut other: Partial) -> Partial {
        self.acc = self.acc.merge(&other.acc);
        self.series.append(&mut other.series);
        self.window.append(&mut other.window);
        self.records.append(&mut other.records);
        self.diverged += other.diverged;
        self
    }
}

struct Job<'a> {
    params: &'a ModelParams,
    lattice: &'a LatticeSpec,
    config: &'a EngineConfig,
    times: &'a [f64],
    window_from: usize,
}

impl Job<'_> {
    fn run_one(&self, index: usize, out: &mut Partial) {
        let cfg = self.config;
        let mut rng = trajectory_rng(cfg.seed, index as u64);
        let mut state = sample_initial(&cfg.initial_state, self.lattice, &mut rng);
        let mut stepper = Stepper::new(self.params, self.lattice, cfg.scheme, cfg.drift, cfg.noise, cfg.dt);
        let keep = index < cfg.keep_trajectories;

        let mut moments = Vec::with_capacity(self.times.len());
        let mut site_pops = Vec::new();
        let mut record = |amps: &[Complex64], moments: &mut Vec<[f64; N_MOMENTS]>| -> bool {
            let m = moments_of(amps);
            if keep {
                site_pops.push(amps.iter().map(|a| a.norm_sqr()).collect::<Vec<_>>());
            }
            moments.push(m);
            m[0].is_finite() && m[1].is_finite() && m[0] < DIVERGENCE_BOUND
        };

        let mut ok = record(&state.amplitudes, &mut moments);
        let n_steps = self.times.len().saturating_sub(1) * cfg.record_stride;
        let mut step = 0;
        while ok && step < n_steps {
            stepper.advance(&mut state.amplitudes, &mut rng);
            step += 1;
            if step % cfg.record_stride == 0 {
                ok = record(&state.amplitudes, &mut moments);
            }
        }
        state.time = step as f64 * cfg.dt;

        if !ok {
            out.diverged += 1;
            return;
        }
        let final_sites: Vec<f64> = state.amplitudes.iter().map(|a| a.norm_sqr()).collect();
        out.acc.push(&moments, &final_sites);
        if cfg.store_series {
            out.series.push(moments.iter().map(|m| m[0]).collect());
        }
        if cfg.t_window.is_some() {
            let tail = &moments[self.window_from..];
            let mut w = [0.0; N_MOMENTS];
            for m in tail {
                for k in 0..N_MOMENTS {
                    w[k] += m[k];
                }
            }
            w.iter_mut().for_each(|v| *v /= tail.len() as f64);
            out.window.push(w);
        }
        if keep {
            out.records.push(TrajectoryRecord {
                index,
                times: self.times.to_vec(),
                site_avg_population_w: moments.iter().map(|m| m[0]).collect(),
                site_population_w: site_pops,
                final_state: state,
            });
        }
    }

    fn empty(&self) -> Partial {
        Partial {
            acc: MomentAccumulator::new(self.times.len(), self.lattice.n_sites()),
            series: Vec::new(),
            window: Vec::new(),
            records: Vec::new(),
            diverged: 0,
        }
    }

    fn run_range(&self, lo: usize, hi: usize, exec: Execution) -> Partial {
        let map = |a: usize, b: usize| {
            let mut p = self.empty();
            for i in a..b {
                self.run_one(i, &mut p);
            }
            p
        };
        exec.tree_reduce(lo, hi, 1, &map, &|a: Partial, b: Partial| a.merge(b))
    }
}

/// Integrates `config.n_traj` independent trajectories.
///
/// Trajectory `i` always uses stream `i` of the seeded generator and the
/// reduction tree is fixed by `n_traj`, so the result is bit-identical for
/// any number of workers.
pub fn run_ensemble(params: &ModelParams, lattice: &LatticeSpec, config: &EngineConfig) -> Result<Ensemble> {
    params.check_lattice(lattice)?;
    config.validate(lattice)?;
    if let crate::twa::InitialState::Custom(a) = &config.initial_state {
        FieldState::new(a.clone(), 0.0).check(lattice)?;
    }
    let times = config.record_times();
    let window_from = match config.t_window {
        Some(ts) => times.iter().position(|&t| t >= ts - 1e-9 * config.dt).unwrap_or(times.len() - 1),
        None => 0,
    };
    let job = Job { params, lattice, config, times: &times, window_from };

    let n = config.n_traj;
    let n_batches = n.min(MAX_BATCHES);
    let exec = config.execution;
    let parts: Vec<Partial> = exec.map_indices(n_batches, |b| job.run_range(b * n / n_batches, (b + 1) * n / n_batches, exec));

    let batches: Vec<MomentAccumulator> = parts.iter().map(|p| p.acc.clone()).collect();
    let merged = pairwise_merge(parts);

    if merged.diverged == n {
        return Err(Error::AllDiverged(n));
    }
    let limit = (config.max_diverged_fraction * n as f64).floor() as usize;
    if merged.diverged > limit {
        return Err(Error::TooManyDiverged { diverged: merged.diverged, total: n, limit });
    }

    Ok(Ensemble {
        n_sites: lattice.n_sites(),
        n_requested: n,
        n_diverged: merged.diverged,
        batches,
        total: merged.acc,
        series: config.store_series.then_some(merged.series),
        window: config.t_window.map(|_| WindowSamples { t_start: times[window_from], samples: merged.window }),
        records: merged.records,
        times,
    })
}

fn pairwise_merge(mut parts: Vec<Partial>) -> Partial {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a.merge(b),
                None => a,
            });
        }
        parts = next;
    }
    parts.pop().expect("at least one batch")
}
