use ddbh::meanfield::meanfield_sweep;

use super::Context;
use crate::cells;
use crate::error::CliResult;
use crate::output::Csv;

/// Homogeneous mean-field branches; only `zJ` enters, so the first lattice
/// stands for all.
pub fn run(ctx: &mut Context) -> CliResult<()> {
    let lattices = ctx.cfg.lattices()?;
    let lat = &lattices[0];
    let mut table = Csv::new(&[
        "u_over_gamma",
        "f_over_gamma",
        "branch",
        "n_per_site",
        "re_alpha",
        "im_alpha",
        "stable",
    ]);
    let mut spinodals = Csv::new(&["u_over_gamma", "f_spinodal_over_gamma"]);
    for u in ctx.cfg.u_values() {
        let fs = ctx.cfg.f_values(u)?;
        let template = ctx.cfg.params(lat, u, fs[0])?;
        let sweep = meanfield_sweep(&template, &fs);
        for row in &sweep.rows {
            for (k, b) in row.branches.iter().enumerate() {
                table.row(cells![u, row.f, k, b.n, b.alpha.re, b.alpha.im, b.stable]);
            }
        }
        for f in sweep.spinodals {
            spinodals.row(cells![u, f]);
        }
    }
    ctx.out.csv("meanfield.csv", &table)?;
    ctx.out.csv("spinodals.csv", &spinodals)?;
    Ok(())
}
