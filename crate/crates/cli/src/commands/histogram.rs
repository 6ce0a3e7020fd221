use ddbh::observables::{histogram_p_of_n, PopulationHistogram};
use ddbh::twa::{run_ensemble, write_trajectory_dump, EngineConfig};

use super::{label, Context};
use crate::cells;
use crate::error::CliResult;
use crate::output::{config_tag, Csv, OutputDir};

/// Writes p(n) of the site-averaged raw Wigner population.
pub fn write_histogram(out: &mut OutputDir, name: &str, h: &PopulationHistogram) -> CliResult<()> {
    let mut t = Csv::new(&["n_w_lo_per_site", "n_w_hi_per_site", "probability"]);
    for (k, p) in h.probability.iter().enumerate() {
        t.row(cells![h.bin_edges[k], h.bin_edges[k + 1], *p]);
    }
    out.csv(name, &t)?;
    Ok(())
}

pub fn run(ctx: &mut Context) -> CliResult<()> {
    let t_s = ctx.t_steady();
    let cfg = EngineConfig { store_series: true, ..ctx.cfg.engine_config(ctx.exec) };
    let tag = config_tag(&ctx.cfg.to_toml());
    let mut summary =
        Csv::new(&["lattice", "size", "u_over_gamma", "f_over_gamma", "bimodality_ratio", "n_samples", "t_start_times_gamma"]);
    for lat in ctx.cfg.lattices()? {
        for u in ctx.cfg.u_values() {
            for f in ctx.cfg.f_values(u)? {
                let params = ctx.cfg.params(&lat, u, f)?;
                let stem = format!("{}_u{u}_f{f}", label(&lat));
                let ens = match run_ensemble(&params, &lat, &cfg) {
                    Ok(e) => e,
                    Err(e) => {
                        ctx.failures.push(format!("{stem}: {e}"));
                        continue;
                    }
                };
                let h = histogram_p_of_n(&ens, t_s, ctx.cfg.binning())?;
                write_histogram(&mut ctx.out, &format!("p_of_n_{stem}.csv"), &h)?;
                summary.row(cells![
                    lat.kind().to_string(),
                    lat.size(),
                    u,
                    f,
                    h.bimodality_ratio(),
                    h.n_samples,
                    h.t_start
                ]);
                if !ens.records.is_empty() {
                    let mut bytes = Vec::new();
                    write_trajectory_dump(&mut bytes, tag, &ens.records)?;
                    ctx.out.write(&format!("trajectories_{stem}.bin"), &bytes)?;
                }
            }
        }
    }
    ctx.out.csv("histogram_summary.csv", &summary)?;
    Ok(())
}
