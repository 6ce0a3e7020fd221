use ddbh::exact::{build_liouvillian, evolve, DensityMatrix, FockBasis};
use ddbh::fit::{fit_exponential, fit_power_law, gap_vs_drive, FitOptions, GapOptions};
use ddbh::observables::{ObservableKind, ObservableSeries};
use ddbh::twa::EngineConfig;
use ddbh::{LatticeKind, LatticeSpec, ModelParams};

#[test]
fn single_photon_decay_fits_unit_rate() {
    let lat = LatticeSpec::wrapped(LatticeKind::Ring, 1).unwrap();
    let params = ModelParams::for_lattice(&lat, 0.1, 0.0, 0.0, 0.0).unwrap();
    let basis = FockBasis::new(1, 3);
    let liou = build_liouvillian(&params, &lat, &basis, 100).unwrap();
    let ev = evolve(&liou, &DensityMatrix::basis_state(&basis, &[1]), 12.0, 0.01, 0.1).unwrap();
    let n = ev.population.len();
    let series = ObservableSeries::new(ObservableKind::Population, ev.times, ev.population, vec![0.0; n]);
    let fit = fit_exponential(&series, &FitOptions::default()).unwrap();
    assert!((fit.lambda - 1.0).abs() < 1e-6, "{fit:?}");
    assert!(fit.n_ss.abs() < 1e-6);
}

#[test]
fn linear_cavity_relaxation_rate_is_flat_in_drive() {
    let lat = LatticeSpec::wrapped(LatticeKind::Ring, 1).unwrap();
    // vacuum start: n(t) = n_ss (1 - e^{-t/2})^2, asymptotic rate gamma/2
    let template = ModelParams::for_lattice(&lat, 0.0, 0.0, 1.0, 0.0).unwrap();
    let cfg = EngineConfig { dt: 0.01, t_end: 30.0, n_traj: 20_000, seed: 8, record_stride: 10, ..Default::default() };
    let scan = gap_vs_drive(&template, &lat, &[0.5, 1.0, 2.0], &cfg, &GapOptions { n_boot: 20, ..Default::default() }).unwrap();
    for p in &scan.points {
        let fit = p.fit.as_ref().unwrap();
        assert!((fit.lambda - 0.5).abs() < 0.03 + 3.0 * fit.lambda_err, "F {}: {fit:?}", p.f);
    }
}

#[test]
fn power_law_with_multiplicative_noise_recovers_exponent() {
    use rand_distr::{Distribution, Normal};
    let mut rng = ddbh::twa::trajectory_rng(21, 0);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let sizes: Vec<f64> = (4..=14).step_by(2).map(|l| l as f64).collect();
    let minima: Vec<f64> = sizes.iter().map(|l| 7.0 * l.powf(-3.3) * (1.0 + noise.sample(&mut rng))).collect();
    let errs: Vec<f64> = minima.iter().map(|m| 0.05 * m).collect();
    let fit = fit_power_law(&sizes, &minima, Some(&errs)).unwrap();
    assert!((fit.eta - 3.3).abs() < 3.0 * fit.eta_err, "{fit:?}");
}
