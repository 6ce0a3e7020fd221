use ddbh::observables::{histogram_p_of_n, steady_state};
use ddbh::twa::{run_ensemble, EngineConfig};

use super::{histogram::write_histogram, label, Context};
use crate::cells;
use crate::error::CliResult;
use crate::output::Csv;

pub fn run(ctx: &mut Context) -> CliResult<()> {
    let t_s = ctx.t_steady();
    let with_hist = ctx.cfg.histogram.enabled;
    let cfg = EngineConfig { t_window: Some(t_s), store_series: with_hist, ..ctx.cfg.engine_config(ctx.exec) };
    let mut table = Csv::new(&[
        "lattice",
        "size",
        "u_over_gamma",
        "f_over_gamma",
        "n_per_site",
        "n_se",
        "g2",
        "g2_se",
        "f0",
        "f0_se",
        "n_traj_used",
        "status",
    ]);
    for lat in ctx.cfg.lattices()? {
        for u in ctx.cfg.u_values() {
            for f in ctx.cfg.f_values(u)? {
                let params = ctx.cfg.params(&lat, u, f)?;
                let kind = lat.kind().to_string();
                let outcome = run_ensemble(&params, &lat, &cfg).and_then(|ens| {
                    let ss = steady_state(&ens)?;
                    let hist = if with_hist { Some(histogram_p_of_n(&ens, t_s, ctx.cfg.binning())?) } else { None };
                    Ok((ss, hist))
                });
                match outcome {
                    Ok((ss, hist)) => {
                        table.row(cells![
                            kind.as_str(),
                            lat.size(),
                            u,
                            f,
                            ss.population,
                            ss.population_se,
                            ss.g2,
                            ss.g2_se,
                            ss.f0,
                            ss.f0_se,
                            ss.n_traj,
                            "ok"
                        ]);
                        if let Some(h) = hist {
                            write_histogram(&mut ctx.out, &format!("p_of_n_{}_u{u}_f{f}.csv", label(&lat)), &h)?;
                        }
                    }
                    Err(e) => {
                        let nan = f64::NAN;
                        table.row(cells![kind.as_str(), lat.size(), u, f, nan, nan, nan, nan, nan, nan, 0usize, e.to_string()]);
                        ctx.failures.push(format!("{} U={u} F={f}: {e}", label(&lat)));
                    }
                }
            }
        }
    }
    ctx.out.csv("sweep.csv", &table)?;
    Ok(())
}
