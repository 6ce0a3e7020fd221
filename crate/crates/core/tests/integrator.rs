use ddbh::observables::steady_state;
use ddbh::twa::{noise_increment, run_ensemble, sample_initial, trajectory_rng, EngineConfig, InitialState, Scheme, Stepper};
use ddbh::{DriftKind, LatticeKind, LatticeSpec, ModelParams};
use num_complex::Complex64;

fn paper(lat: &LatticeSpec, f: f64) -> ModelParams {
    ModelParams::for_lattice(lat, 0.1, 0.1, f, 0.9).unwrap()
}

/// RMS endpoint error against a fine reference driven by the same Brownian
/// path, for step sizes `fine * 2^k`.
fn strong_errors(scheme: Scheme, lat: &LatticeSpec, params: &ModelParams, levels: &[usize]) -> Vec<f64> {
    let (fine, t_end, paths) = (0.00125, 4.0, 24);
    let n_fine = (t_end / fine) as usize;
    let n = lat.n_sites();
    let mut sq = vec![0.0; levels.len()];
    for p in 0..paths {
        let mut rng = trajectory_rng(99, p);
        let start = sample_initial(&InitialState::WignerVacuum, lat, &mut rng).amplitudes;
        let dw: Vec<Vec<Complex64>> = (0..n_fine).map(|_| (0..n).map(|_| noise_increment(fine, &mut rng)).collect()).collect();
        let run = |k: usize| {
            let m = 1 << k;
            let mut s = Stepper::new(params, lat, scheme, DriftKind::Wigner, true, fine * m as f64);
            let mut a = start.clone();
            for chunk in dw.chunks(m) {
                let sum: Vec<Complex64> = (0..n).map(|i| chunk.iter().map(|d| d[i]).sum()).collect();
                s.advance_with(&mut a, &sum);
            }
            a
        };
        let reference = run(0);
        for (j, &k) in levels.iter().enumerate() {
            let a = run(k);
            sq[j] += a.iter().zip(&reference).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / n as f64;
        }
    }
    sq.into_iter().map(|s| (s / paths as f64).sqrt()).collect()
}

#[test]
fn dt_halving_converges_pathwise_on_four_site_ring() {
    let lat = LatticeSpec::ring(4).unwrap();
    let params = paper(&lat, 1.57);
    // dt = 0.04, 0.02, 0.01
    let e = strong_errors(Scheme::Heun, &lat, &params, &[5, 4, 3]);
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 1.7, "errors {e:?}");
    }
    let em = strong_errors(Scheme::EulerMaruyama, &lat, &params, &[5, 4, 3]);
    for w in em.windows(2) {
        assert!(w[0] / w[1] > 1.6, "errors {em:?}");
    }
    // Heun is the more accurate of the two at equal step
    assert!(e[0] < em[0]);
}

#[test]
fn heun_and_euler_maruyama_agree_on_steady_population() {
    let lat = LatticeSpec::wrapped(LatticeKind::Ring, 1).unwrap();
    let params = ModelParams::for_lattice(&lat, 0.1, 0.1, 1.0, 0.0).unwrap();
    let base = EngineConfig { t_end: 15.0, t_window: Some(8.0), n_traj: 8000, record_stride: 20, ..Default::default() };
    let heun = EngineConfig { dt: 0.01, seed: 1, ..base.clone() };
    let em = EngineConfig { dt: 0.0025, scheme: Scheme::EulerMaruyama, seed: 2, record_stride: 80, ..base };
    let a = steady_state(&run_ensemble(&params, &lat, &heun).unwrap()).unwrap();
    let b = steady_state(&run_ensemble(&params, &lat, &em).unwrap()).unwrap();
    let se = a.population_se.hypot(b.population_se);
    assert!((a.population - b.population).abs() < 4.0 * se, "{a:?} {b:?}");
}

fn shift(lat: &LatticeSpec, v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    let l = lat.size();
    for (i, x) in v.iter().enumerate() {
        let j = match lat.kind() {
            LatticeKind::Ring => (i + 1) % l,
            LatticeKind::Torus => {
                let (r, c) = (i / l, i % l);
                r * l + (c + 1) % l
            }
        };
        out[j] = *x;
    }
    out
}

#[test]
fn deterministic_dynamics_commute_with_lattice_translation() {
    for lat in [LatticeSpec::ring(5).unwrap(), LatticeSpec::torus(3).unwrap()] {
        let params = paper(&lat, 1.57);
        let mut rng = trajectory_rng(4, 0);
        let a0: Vec<Complex64> = (0..lat.n_sites())
            .map(|_| noise_increment(2.0, &mut rng))
            .collect();
        let evolve = |start: Vec<Complex64>| {
            let mut s = Stepper::new(&params, &lat, Scheme::Heun, DriftKind::Wigner, false, 0.01);
            let mut a = start;
            for _ in 0..500 {
                s.advance(&mut a, &mut rng.clone());
            }
            a
        };
        let lhs = shift(&lat, &evolve(a0.clone()));
        let rhs = evolve(shift(&lat, &a0));
        for (x, y) in lhs.iter().zip(&rhs) {
            assert!((x - y).norm() < 1e-10, "{} {x} {y}", lat.kind());
        }
    }
}

#[test]
fn stochastic_site_populations_are_uniform() {
    let lat = LatticeSpec::torus(3).unwrap();
    let params = paper(&lat, 1.5);
    let cfg = EngineConfig { dt: 0.02, t_end: 10.0, n_traj: 4000, seed: 3, ..Default::default() };
    let ens = run_ensemble(&params, &lat, &cfg).unwrap();
    let sites: Vec<(f64, f64)> = (0..lat.n_sites()).map(|s| ens.total.final_site_population(s)).collect();
    let mean = sites.iter().map(|s| s.0).sum::<f64>() / sites.len() as f64;
    // Bonferroni over 9 sites
    for (m, se) in &sites {
        assert!((m - mean).abs() < 3.5 * se, "{sites:?}");
    }
}
