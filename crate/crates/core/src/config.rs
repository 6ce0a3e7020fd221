//! Run configuration in TOML. Rates and amplitudes carry an `_over_gamma`
//! suffix and times a `_times_gamma` suffix; everything is in units of the
//! loss rate, which is fixed to 1 internally.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{SteadyOptions, DEFAULT_DIMENSION_CAP};
use crate::exec::Execution;
use crate::fit::{FitOptions, GapOptions};
use crate::model::{LatticeKind, LatticeSpec, ModelParams};
use crate::observables::Binning;
use crate::twa::{EngineConfig, InitialState, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeSection,
    pub model: ModelSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub histogram: HistogramSection,
    #[serde(default)]
    pub exact: ExactSection,
    #[serde(default)]
    pub fit: FitSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub kind: LatticeKind,
    /// Linear size; use `sizes` for finite-size studies.
    pub size: Option<usize>,
    pub sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub delta_over_gamma: f64,
    pub u_over_gamma: f64,
    pub zj_over_gamma: f64,
    pub f_over_gamma: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub f_over_gamma: Option<Vec<f64>>,
    /// Evenly spaced drive values `{ from, to, points }`.
    pub f_range: Option<Range>,
    pub u_over_gamma: Option<Vec<f64>>,
    /// Fixes `U F^2 / gamma^3`; the drive then follows each `U`.
    pub uf2_over_gamma3: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineSection {
    pub dt_times_gamma: f64,
    pub t_end_times_gamma: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub record_stride: usize,
    pub scheme: Scheme,
    /// Coherent starting amplitude `[re, im]`; absent means vacuum.
    pub initial_amplitude: Option<[f64; 2]>,
    /// Start of the steady-state averaging window.
    pub t_steady_times_gamma: Option<f64>,
    pub keep_trajectories: usize,
    pub max_diverged_fraction: f64,
}

impl Default for EngineSection {
    fn default() -> Self {
        let e = EngineConfig::default();
        Self {
            dt_times_gamma: e.dt,
            t_end_times_gamma: e.t_end,
            n_traj: e.n_traj,
            seed: e.seed,
            record_stride: e.record_stride,
            scheme: e.scheme,
            initial_amplitude: None,
            t_steady_times_gamma: None,
            keep_trajectories: 0,
            max_diverged_fraction: e.max_diverged_fraction,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistogramSection {
    /// Write p(n) for every drive in `sweep`.
    pub enabled: bool,
    /// Fixed bin count; Freedman-Diaconis when absent.
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExactSection {
    /// Starting cutoff; a mean-field based guess when absent.
    pub n_max: Option<usize>,
    pub n_max_increment: usize,
    pub rel_tol: f64,
    pub max_rounds: usize,
    pub dimension_cap: usize,
    /// Expand around the mean-field amplitude.
    pub displaced: bool,
    pub dt_times_gamma: f64,
    pub tol: f64,
    pub max_time_times_gamma: f64,
}

impl Default for ExactSection {
    fn default() -> Self {
        let s = SteadyOptions::default();
        Self {
            n_max: None,
            n_max_increment: 4,
            rel_tol: 1e-3,
            max_rounds: 4,
            dimension_cap: DEFAULT_DIMENSION_CAP,
            displaced: true,
            dt_times_gamma: s.dt,
            tol: s.tol,
            max_time_times_gamma: s.max_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub r2_min: f64,
    pub signal_sigma: f64,
    pub min_points: usize,
    /// Manual `[t_lo, t_hi]` window.
    pub window_times_gamma: Option<[f64; 2]>,
    pub n_boot: usize,
    pub bootstrap_seed: u64,
}

impl Default for FitSection {
    fn default() -> Self {
        let f = FitOptions::default();
        let g = GapOptions::default();
        Self {
            r2_min: f.r2_min,
            signal_sigma: f.signal_sigma,
            min_points: f.min_points,
            window_times_gamma: None,
            n_boot: g.n_boot,
            bootstrap_seed: g.bootstrap_seed,
        }
    }
}

fn field(name: &str, ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("field `{name}` {what}")))
    }
}

impl RunConfig {
    /// Parses and validates; parse errors carry the TOML line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.lattice;
        field("lattice.size", l.size.is_some() || l.sizes.is_some(), "or `lattice.sizes` is required")?;
        for s in self.sizes() {
            field("lattice.size", s >= 1, "must be at least 1")?;
        }
        let m = &self.model;
        for (name, v) in [
            ("model.delta_over_gamma", m.delta_over_gamma),
            ("model.u_over_gamma", m.u_over_gamma),
            ("model.zj_over_gamma", m.zj_over_gamma),
        ] {
            field(name, v.is_finite(), "must be finite")?;
        }
        field("model.u_over_gamma", m.u_over_gamma >= 0.0, "must be non-negative")?;
        if let Some(f) = m.f_over_gamma {
            field("model.f_over_gamma", f.is_finite(), "must be finite")?;
        }
        let s = &self.scan;
        if let Some(r) = &s.f_range {
            field("scan.f_range.points", r.points >= 1, "must be at least 1")?;
            field("scan.f_range", r.from.is_finite() && r.to.is_finite(), "bounds must be finite")?;
        }
        if let Some(us) = &s.u_over_gamma {
            field("scan.u_over_gamma", !us.is_empty() && us.iter().all(|u| *u >= 0.0), "must be non-negative values")?;
        }
        if let Some(k) = s.uf2_over_gamma3 {
            field("scan.uf2_over_gamma3", k > 0.0, "must be positive")?;
            field("scan.uf2_over_gamma3", self.u_values().iter().all(|u| *u > 0.0), "needs every U > 0")?;
        }
        let e = &self.engine;
        field("engine.dt_times_gamma", e.dt_times_gamma > 0.0 && e.dt_times_gamma.is_finite(), "must be positive")?;
        field("engine.t_end_times_gamma", e.t_end_times_gamma >= e.dt_times_gamma, "must be at least one step")?;
        field("engine.n_traj", e.n_traj >= 1, "must be at least 1")?;
        field("engine.record_stride", e.record_stride >= 1, "must be at least 1")?;
        field(
            "engine.max_diverged_fraction",
            (0.0..=1.0).contains(&e.max_diverged_fraction),
            "must lie in [0, 1]",
        )?;
        if let Some(t) = e.t_steady_times_gamma {
            field("engine.t_steady_times_gamma", t >= 0.0 && t <= e.t_end_times_gamma, "must lie in [0, t_end]")?;
        }
        if let Some(b) = self.histogram.bins {
            field("histogram.bins", b >= 1, "must be at least 1")?;
        }
        let x = &self.exact;
        field("exact.n_max_increment", x.n_max_increment >= 1, "must be at least 1")?;
        field("exact.rel_tol", x.rel_tol > 0.0, "must be positive")?;
        field("exact.dt_times_gamma", x.dt_times_gamma > 0.0, "must be positive")?;
        let f = &self.fit;
        field("fit.r2_min", f.r2_min > 0.0 && f.r2_min < 1.0, "must lie in (0, 1)")?;
        field("fit.signal_sigma", f.signal_sigma > 0.0, "must be positive")?;
        if let Some([a, b]) = f.window_times_gamma {
            field("fit.window_times_gamma", a < b, "must satisfy t_lo < t_hi")?;
        }
        Ok(())
    }

    pub fn sizes(&self) -> Vec<usize> {
        match (&self.lattice.sizes, self.lattice.size) {
            (Some(s), _) => s.clone(),
            (None, Some(s)) => vec![s],
            (None, None) => Vec::new(),
        }
    }

    /// Lattices for every configured size. Sizes below 3 keep repeated
    /// neighbors so that `zJ` means the same on every lattice.
    pub fn lattices(&self) -> Result<Vec<LatticeSpec>> {
        self.sizes().into_iter().map(|s| LatticeSpec::wrapped(self.lattice.kind, s)).collect()
    }

    pub fn u_values(&self) -> Vec<f64> {
        self.scan.u_over_gamma.clone().unwrap_or_else(|| vec![self.model.u_over_gamma])
    }

    /// Drive values for a given `U`: the fixed-`UF^2` family when set,
    /// then an explicit list, then a range, then the single model drive.
    pub fn f_values(&self, u: f64) -> Result<Vec<f64>> {
        let s = &self.scan;
        if let Some(k) = s.uf2_over_gamma3 {
            return Ok(vec![(k / u).sqrt()]);
        }
        if let Some(fs) = &s.f_over_gamma {
            return Ok(fs.clone());
        }
        if let Some(r) = s.f_range {
            if r.points == 1 {
                return Ok(vec![r.from]);
            }
            // rounded so that e.g. 1.55 is not printed as 1.5499999999999998
            let at = |i: usize| r.from + (r.to - r.from) * i as f64 / (r.points - 1) as f64;
            return Ok((0..r.points).map(|i| (at(i) * 1e12).round() / 1e12).collect());
        }
        self.model
            .f_over_gamma
            .map(|f| vec![f])
            .ok_or_else(|| Error::Config("no drive given: set `model.f_over_gamma` or a [scan] entry".into()))
    }

    pub fn params(&self, lattice: &LatticeSpec, u: f64, f: f64) -> Result<ModelParams> {
        ModelParams::for_lattice(lattice, self.model.delta_over_gamma, u, f, self.model.zj_over_gamma)
    }

    pub fn engine_config(&self, execution: Execution) -> EngineConfig {
        let e = &self.engine;
        EngineConfig {
            dt: e.dt_times_gamma,
            t_end: e.t_end_times_gamma,
            n_traj: e.n_traj,
            seed: e.seed,
            record_stride: e.record_stride,
            scheme: e.scheme,
            initial_state: match e.initial_amplitude {
                Some([re, im]) => InitialState::Coherent(Complex64::new(re, im)),
                None => InitialState::WignerVacuum,
            },
            t_window: e.t_steady_times_gamma,
            keep_trajectories: e.keep_trajectories,
            max_diverged_fraction: e.max_diverged_fraction,
            execution,
            ..Default::default()
        }
    }

    pub fn binning(&self) -> Binning {
        self.histogram.bins.map_or(Binning::FreedmanDiaconis, Binning::Fixed)
    }

    pub fn steady_options(&self) -> SteadyOptions {
        SteadyOptions {
            dt: self.exact.dt_times_gamma,
            tol: self.exact.tol,
            max_time: self.exact.max_time_times_gamma,
            ..Default::default()
        }
    }

    pub fn gap_options(&self) -> GapOptions {
        let f = &self.fit;
        GapOptions {
            fit: FitOptions {
                r2_min: f.r2_min,
                signal_sigma: f.signal_sigma,
                min_points: f.min_points,
                window: f.window_times_gamma.map(|[a, b]| (a, b)),
                ..Default::default()
            },
            n_boot: f.n_boot,
            bootstrap_seed: f.bootstrap_seed,
        }
    }
}
