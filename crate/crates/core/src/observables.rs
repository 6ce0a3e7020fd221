//! Normally ordered observables from raw Wigner ensemble moments.
//!
//! Symmetric-to-normal ordering for one mode:
//!
//! * `<a^dag a> = <|alpha|^2>_W - 1/2`
//! * `<a^dag a^dag a a> = <|alpha|^4>_W - 2 <|alpha|^2>_W + 1/2`
//!
//! Standard errors of ratios (f0, g2) come from a jackknife over the
//! ensemble's fixed trajectory batches.

use crate::error::{Error, Result};
use crate::exec::pairwise_sum;
use crate::twa::{Ensemble, Moment, MomentAccumulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservableKind {
    Population,
    F0,
    G2,
    Custom,
}

/// Ensemble-averaged time series with standard errors. Entries that are
/// undefined at some time (e.g. a ratio with a vanishing denominator) are
/// `NaN` and listed in `undefined`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub kind: ObservableKind,
    pub times: Vec<f64>,
    pub value: Vec<f64>,
    pub std_error: Vec<f64>,
    pub undefined: Vec<usize>,
}

impl ObservableSeries {
    pub fn new(kind: ObservableKind, times: Vec<f64>, value: Vec<f64>, std_error: Vec<f64>) -> Self {
        assert_eq!(times.len(), value.len());
        assert_eq!(times.len(), std_error.len());
        let undefined = value.iter().enumerate().filter(|(_, v)| !v.is_finite()).map(|(i, _)| i).collect();
        Self { kind, times, value, std_error, undefined }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Absolute difference `|value(t) - reference|`, errors unchanged.
    pub fn abs_deviation(&self, reference: f64) -> ObservableSeries {
        let v = self.value.iter().map(|x| (x - reference).abs()).collect();
        ObservableSeries::new(ObservableKind::Custom, self.times.clone(), v, self.std_error.clone())
    }

    /// First time after which `|value - value_end| < 3 SE` holds for the
    /// rest of the series; used as the default steady-state onset.
    pub fn steady_onset(&self) -> f64 {
        let last = self.value.len() - 1;
        let end = self.value[last];
        let mut onset = last;
        for i in (0..=last).rev() {
            let tol = 3.0 * self.std_error[i].hypot(self.std_error[last]);
            if (self.value[i] - end).abs() < tol {
                onset = i;
            } else {
                break;
            }
        }
        self.times[onset]
    }
}

/// Mean population per site, `<|alpha|^2>_W - 1/2`.
pub fn population(ensemble: &Ensemble) -> Result<ObservableSeries> {
    need_two(ensemble)?;
    let acc = &ensemble.total;
    let value = (0..acc.n_times()).map(|t| acc.mean(Moment::Population, t) - 0.5).collect();
    let se = (0..acc.n_times()).map(|t| acc.std_error(Moment::Population, t)).collect();
    Ok(ObservableSeries::new(ObservableKind::Population, ensemble.times.clone(), value, se))
}

fn need_two(ensemble: &Ensemble) -> Result<()> {
    if ensemble.n_used() < 2 {
        return Err(Error::InvalidConfig("at least two trajectories are needed for standard errors".into()));
    }
    Ok(())
}

/// `f0 = n_{k=0} / n_tot` with `n_{k=0} = <|b0|^2> - 1/2` and
/// `n_tot = N (<|alpha|^2>_W - 1/2)`.
pub fn condensate_fraction(ensemble: &Ensemble) -> Result<ObservableSeries> {
    let n = ensemble.n_sites as f64;
    ratio_series(ensemble, ObservableKind::F0, |acc, t| {
        let nk0 = acc.mean(Moment::ZeroMode, t) - 0.5;
        let ntot = n * (acc.mean(Moment::Population, t) - 0.5);
        (ntot > 0.0).then(|| nk0 / ntot)
    })
}

/// Local `g2(0) = <a^dag a^dag a a> / <a^dag a>^2`, site-averaged.
pub fn g2_local(ensemble: &Ensemble) -> Result<ObservableSeries> {
    ratio_series(ensemble, ObservableKind::G2, |acc, t| {
        let w2 = acc.mean(Moment::Population, t);
        let w4 = acc.mean(Moment::Quartic, t);
        g2_from_wigner(w2, w4)
    })
}

/// `g2` from raw Wigner moments; `None` if the population is not positive.
pub fn g2_from_wigner(w2: f64, w4: f64) -> Option<f64> {
    let pop = w2 - 0.5;
    (pop > 0.0).then(|| (w4 - 2.0 * w2 + 0.5) / (pop * pop))
}

fn ratio_series<F>(ensemble: &Ensemble, kind: ObservableKind, f: F) -> Result<ObservableSeries>
where
    F: Fn(&MomentAccumulator, usize) -> Option<f64>,
{
    need_two(ensemble)?;
    let nt = ensemble.times.len();
    let mut value = Vec::with_capacity(nt);
    let mut se = Vec::with_capacity(nt);
    for t in 0..nt {
        let full = f(&ensemble.total, t);
        value.push(full.unwrap_or(f64::NAN));
        se.push(match full {
            Some(_) => jackknife_se(ensemble, |acc| f(acc, t)),
            None => f64::NAN,
        });
    }
    let mut s = ObservableSeries::new(kind, ensemble.times.clone(), value, se);
    s.undefined = s.value.iter().enumerate().filter(|(_, v)| !v.is_finite()).map(|(i, _)| i).collect();
    Ok(s)
}

/// Delete-one-batch jackknife over the fixed batches of the ensemble.
fn jackknife_se<F>(ensemble: &Ensemble, f: F) -> f64
where
    F: Fn(&MomentAccumulator) -> Option<f64>,
{
    let b = ensemble.batches.len();
    if b < 2 {
        return f64::NAN;
    }
    let loo: Vec<f64> = (0..b).filter_map(|k| f(&ensemble.total.without(&ensemble.batches[k]))).collect();
    if loo.len() < 2 {
        return f64::NAN;
    }
    let m = loo.len() as f64;
    let mean = pairwise_sum(&loo) / m;
    let ss: Vec<f64> = loo.iter().map(|x| (x - mean).powi(2)).collect();
    ((m - 1.0) / m * pairwise_sum(&ss)).sqrt()
}

/// Steady-state values from per-trajectory window averages.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SteadyState {
    /// `<a^dag a>` per site.
    pub population: f64,
    pub population_se: f64,
    /// Raw Wigner `<|alpha|^2>` per site.
    pub population_w: f64,
    pub g2: f64,
    pub g2_se: f64,
    pub f0: f64,
    pub f0_se: f64,
    pub n_traj: usize,
}

/// Steady-state observables from the window samples of an ensemble run
/// with `t_window` set. Errors use the spread of per-trajectory time
/// averages, which are independent across trajectories.
pub fn steady_state(ensemble: &Ensemble) -> Result<SteadyState> {
    let w = ensemble.window.as_ref().ok_or_else(|| Error::InvalidConfig("ensemble was run without t_window".into()))?;
    let n = w.samples.len();
    if n < 2 {
        return Err(Error::NoSamples(w.t_start));
    }
    let nf = n as f64;
    let col = |m: Moment| w.values(m).collect::<Vec<f64>>();
    let (p, q, b) = (col(Moment::Population), col(Moment::Quartic), col(Moment::ZeroMode));
    let mean = |x: &[f64]| pairwise_sum(x) / nf;
    let (mp, mq, mb) = (mean(&p), mean(&q), mean(&b));
    let se_of = |x: &[f64], m: f64| {
        let d: Vec<f64> = x.iter().map(|v| (v - m).powi(2)).collect();
        (pairwise_sum(&d) / (nf - 1.0) / nf).sqrt()
    };
    let sites = ensemble.n_sites as f64;
    let pop = mp - 0.5;
    let g2 = g2_from_wigner(mp, mq).unwrap_or(f64::NAN);
    let f0 = if pop > 0.0 { (mb - 0.5) / (sites * pop) } else { f64::NAN };

    // linearised (delta-method) errors with per-trajectory influence values
    let g2_infl: Vec<f64> = p
        .iter()
        .zip(&q)
        .map(|(pi, qi)| (qi - mq - 2.0 * (pi - mp)) / (pop * pop) - 2.0 * g2 * (pi - mp) / pop)
        .collect();
    let f0_infl: Vec<f64> = p.iter().zip(&b).map(|(pi, bi)| ((bi - mb) / sites - f0 * (pi - mp)) / pop).collect();
    let infl_se = |x: &[f64]| {
        let d: Vec<f64> = x.iter().map(|v| v * v).collect();
        (pairwise_sum(&d) / (nf - 1.0) / nf).sqrt()
    };

    Ok(SteadyState {
        population: pop,
        population_se: se_of(&p, mp),
        population_w: mp,
        g2,
        g2_se: if g2.is_finite() { infl_se(&g2_infl) } else { f64::NAN },
        f0,
        f0_se: if f0.is_finite() { infl_se(&f0_infl) } else { f64::NAN },
        n_traj: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binning {
    FreedmanDiaconis,
    Fixed(usize),
}

/// Normalised histogram of the site-averaged raw Wigner population.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationHistogram {
    pub bin_edges: Vec<f64>,
    pub probability: Vec<f64>,
    pub t_start: f64,
    pub n_samples: usize,
}

impl PopulationHistogram {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    /// Largest ratio `min(p_a, p_b) / min(p between)` over pairs of local
    /// maxima of the histogram smoothed with a 3-bin moving average.
    /// Maxima below `5%` of the highest bin are ignored. Returns 1 for a
    /// single-peaked histogram and infinity for an empty gap between peaks.
    pub fn bimodality_ratio(&self) -> f64 {
        let p = &self.probability;
        let k = p.len();
        if k < 3 {
            return 1.0;
        }
        let s: Vec<f64> = (0..k)
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(k - 1);
                p[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect();
        let top = s.iter().cloned().fold(0.0, f64::max);
        let peaks: Vec<usize> = (0..k)
            .filter(|&i| {
                let left = if i == 0 { f64::NEG_INFINITY } else { s[i - 1] };
                let right = if i + 1 == k { f64::NEG_INFINITY } else { s[i + 1] };
                s[i] > left && s[i] >= right && s[i] >= 0.05 * top
            })
            .collect();
        let mut best: f64 = 1.0;
        for (ai, &a) in peaks.iter().enumerate() {
            for &b in &peaks[ai + 1..] {
                let dip = s[a..=b].iter().cloned().fold(f64::INFINITY, f64::min);
                let ratio = s[a].min(s[b]) / dip;
                best = best.max(ratio);
            }
        }
        best
    }
}

/// Histogram of `n = nbar^W(t)` over all recorded `t > t_s` and all stored
/// trajectory series. Bins span the full sample range.
pub fn histogram_p_of_n(ensemble: &Ensemble, t_s: f64, binning: Binning) -> Result<PopulationHistogram> {
    let series = ensemble
        .series
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("ensemble was run without store_series".into()))?;
    let start = ensemble.times.iter().position(|&t| t > t_s).ok_or(Error::NoSamples(t_s))?;
    let samples: Vec<f64> = series.iter().flat_map(|s| s[start..].iter().copied()).collect();
    histogram(&samples, binning, ensemble.times[start]).ok_or(Error::NoSamples(t_s))
}

/// Histogram of arbitrary samples; `None` when `samples` is empty.
pub fn histogram(samples: &[f64], binning: Binning, t_start: f64) -> Option<PopulationHistogram> {
    if samples.is_empty() {
        return None;
    }
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let n_bins = match binning {
        Binning::Fixed(k) => k.max(1),
        Binning::FreedmanDiaconis => {
            let mut sorted = samples.to_vec();
            sorted.sort_by(f64::total_cmp);
            let q = |f: f64| sorted[((sorted.len() - 1) as f64 * f).round() as usize];
            let iqr = q(0.75) - q(0.25);
            let width = 2.0 * iqr / (samples.len() as f64).cbrt();
            if width > 0.0 {
                ((span / width).ceil() as usize).clamp(1, 10_000)
            } else {
                1
            }
        }
    };
    let width = span / n_bins as f64;
    let bin_edges: Vec<f64> = (0..=n_bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0u64; n_bins];
    for &x in samples {
        let i = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    let total = samples.len() as f64;
    let probability = counts.iter().map(|&c| c as f64 / total).collect();
    Some(PopulationHistogram { bin_edges, probability, t_start, n_samples: samples.len() })
}
