use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ddbh::exact::{build_liouvillian, DensityMatrix, FockBasis};
use ddbh::twa::{run_ensemble, EngineConfig};
use ddbh::{Execution, LatticeSpec, ModelParams};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn ensemble(c: &mut Criterion) {
    let lat = LatticeSpec::torus(4).unwrap();
    let params = ModelParams::for_lattice(&lat, 0.1, 0.1, 1.57, 0.9).unwrap();
    let mut g = c.benchmark_group("twa_ensemble_4x4");
    g.sample_size(10);
    for (name, execution) in MODES {
        let cfg = EngineConfig { dt: 0.02, t_end: 2.0, n_traj: 256, execution, ..Default::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_ensemble(&params, &lat, &cfg).unwrap()));
    }
    g.finish();
}

fn liouvillian(c: &mut Criterion) {
    let lat = LatticeSpec::wrapped(ddbh::LatticeKind::Ring, 2).unwrap();
    let params = ModelParams::for_lattice(&lat, 0.1, 0.1, 2.0, 0.9).unwrap();
    let basis = FockBasis::new(2, 7);
    let rho = DensityMatrix::vacuum(&basis);
    let mut g = c.benchmark_group("liouvillian_apply_dim64");
    for (name, execution) in MODES {
        let mut liou = build_liouvillian(&params, &lat, &basis, 4096).unwrap();
        liou.execution = execution;
        let mut out = DensityMatrix::zeros(liou.dim());
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| liou.apply(&rho, &mut out)));
    }
    g.finish();
}

criterion_group!(benches, ensemble, liouvillian);
criterion_main!(benches);
