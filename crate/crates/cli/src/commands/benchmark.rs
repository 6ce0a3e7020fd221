use ddbh::exact::{converge_cutoff, FockBasis};
use ddbh::meanfield::meanfield_roots;
use ddbh::observables::steady_state;
use ddbh::twa::{run_ensemble, EngineConfig};
use ddbh::{Error, ModelParams};

use super::{label, Context};
use crate::cells;
use crate::error::{CliError, CliResult};
use crate::output::Csv;

/// Starting basis: around the most populated stable mean-field branch when
/// displaced, otherwise a plain cutoff sized from the mean-field density.
fn start_basis(params: &ModelParams, n_sites: usize, n_max: Option<usize>, displaced: bool) -> FockBasis {
    if displaced {
        let beta = meanfield_roots(params)
            .into_iter()
            .filter(|b| b.stable)
            .max_by(|a, b| a.n.total_cmp(&b.n))
            .map_or(num_complex::Complex64::ZERO, |b| b.alpha);
        FockBasis::displaced(n_sites, n_max.unwrap_or(8), beta)
    } else {
        let h = FockBasis::heuristic(params, n_sites);
        n_max.map_or(h, |n| FockBasis::new(n_sites, n))
    }
}

pub fn run(ctx: &mut Context) -> CliResult<()> {
    let cfg = EngineConfig { t_window: Some(ctx.t_steady()), ..ctx.cfg.engine_config(ctx.exec) };
    let x = ctx.cfg.exact.clone();
    let opts = ctx.cfg.steady_options();
    let mut table = Csv::new(&[
        "lattice",
        "size",
        "u_over_gamma",
        "f_over_gamma",
        "n_twa_per_site",
        "n_twa_se",
        "n_exact_per_site",
        "n_max",
        "ratio",
        "ratio_se",
        "status",
    ]);
    for lat in ctx.cfg.lattices()? {
        for u in ctx.cfg.u_values() {
            for f in ctx.cfg.f_values(u)? {
                let params = ctx.cfg.params(&lat, u, f)?;
                let basis = start_basis(&params, lat.n_sites(), x.n_max, x.displaced);
                let exact =
                    converge_cutoff(&params, &lat, &basis, x.n_max_increment, x.rel_tol, x.max_rounds, x.dimension_cap, &opts);
                let exact = match exact {
                    Err(e @ Error::DimensionCap { .. }) => return Err(CliError::from(e)),
                    other => other,
                };
                let twa = run_ensemble(&params, &lat, &cfg).and_then(|e| steady_state(&e));
                let kind = lat.kind().to_string();
                match (exact, twa) {
                    (Ok(ex), Ok(tw)) => {
                        let ratio = tw.population / ex.population;
                        let ratio_se = tw.population_se / ex.population;
                        table.row(cells![
                            kind.as_str(),
                            lat.size(),
                            u,
                            f,
                            tw.population,
                            tw.population_se,
                            ex.population,
                            ex.n_max,
                            ratio,
                            ratio_se,
                            "ok"
                        ]);
                    }
                    (ex, tw) => {
                        let msg = [ex.err().map(|e| format!("exact: {e}")), tw.err().map(|e| format!("twa: {e}"))]
                            .into_iter()
                            .flatten()
                            .collect::<Vec<_>>()
                            .join("; ");
                        let nan = f64::NAN;
                        table.row(cells![kind.as_str(), lat.size(), u, f, nan, nan, nan, 0usize, nan, nan, msg.as_str()]);
                        ctx.failures.push(format!("{} U={u} F={f}: {msg}", label(&lat)));
                    }
                }
            }
        }
    }
    ctx.out.csv("benchmark.csv", &table)?;
    Ok(())
}
