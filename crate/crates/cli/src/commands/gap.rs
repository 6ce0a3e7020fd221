use ddbh::fit::{fit_power_law, gap_vs_drive};
use serde_json::json;

use super::{label, Context};
use crate::cells;
use crate::error::CliResult;
use crate::output::Csv;

pub fn run(ctx: &mut Context) -> CliResult<()> {
    let cfg = ctx.cfg.engine_config(ctx.exec);
    let opts = ctx.cfg.gap_options();
    let lattices = ctx.cfg.lattices()?;
    let mut minima = Csv::new(&[
        "lattice",
        "size",
        "u_over_gamma",
        "f_min_over_gamma",
        "min_lambda_over_gamma",
        "min_lambda_err_over_gamma",
        "refined",
    ]);
    let mut reports = Vec::new();
    let mut laws = Vec::new();
    for u in ctx.cfg.u_values() {
        let fs = ctx.cfg.f_values(u)?;
        let (mut sizes, mut mins, mut errs) = (Vec::new(), Vec::new(), Vec::new());
        for lat in &lattices {
            let template = ctx.cfg.params(lat, u, fs[0])?;
            let stem = format!("{}_u{u}", label(lat));
            let scan = match gap_vs_drive(&template, lat, &fs, &cfg, &opts) {
                Ok(s) => s,
                Err(e) => {
                    ctx.failures.push(format!("{stem}: {e}"));
                    continue;
                }
            };
            let mut table = Csv::new(&[
                "f_over_gamma",
                "lambda_over_gamma",
                "lambda_err_over_gamma",
                "n_ss_per_site",
                "t_lo_times_gamma",
                "t_hi_times_gamma",
                "r2",
                "status",
            ]);
            let mut points = Vec::new();
            for p in &scan.points {
                match &p.fit {
                    Ok(fit) => {
                        table.row(cells![
                            p.f,
                            fit.lambda,
                            fit.lambda_err,
                            fit.n_ss,
                            fit.window.0,
                            fit.window.1,
                            fit.r2,
                            "ok"
                        ]);
                        points.push(json!({ "f_over_gamma": p.f, "fit": fit }));
                    }
                    Err(e) => {
                        let nan = f64::NAN;
                        table.row(cells![p.f, nan, nan, nan, nan, nan, nan, e.as_str()]);
                        points.push(json!({ "f_over_gamma": p.f, "error": e }));
                        ctx.failures.push(format!("{stem} F={}: {e}", p.f));
                    }
                }
            }
            ctx.out.csv(&format!("gap_{stem}.csv"), &table)?;
            let minimum = scan.minimum.as_ref().map(|m| {
                json!({ "f_over_gamma": m.f, "lambda": m.lambda, "lambda_err": m.lambda_err, "refined": m.refined })
            });
            reports.push(json!({
                "lattice": lat.kind(),
                "size": lat.size(),
                "u_over_gamma": u,
                "points": points,
                "minimum": minimum,
            }));
            if let Some(m) = scan.minimum {
                minima.row(cells![lat.kind().to_string(), lat.size(), u, m.f, m.lambda, m.lambda_err, m.refined]);
                sizes.push(lat.size() as f64);
                mins.push(m.lambda);
                errs.push(m.lambda_err);
            }
        }
        if sizes.len() >= 3 {
            match fit_power_law(&sizes, &mins, Some(&errs)) {
                Ok(p) => laws.push(json!({ "u_over_gamma": u, "sizes": sizes, "fit": p })),
                Err(e) => ctx.failures.push(format!("power law at U={u}: {e}")),
            }
        }
    }
    ctx.out.csv("gap_minima.csv", &minima)?;
    ctx.out.json("gap_fits.json", &reports)?;
    if !laws.is_empty() {
        ctx.out.json("power_law.json", &laws)?;
    }
    Ok(())
}
