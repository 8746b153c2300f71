//! Probability grids: both analytic upper bounds and a seeded Monte-Carlo
//! estimate as a function of the relative mean between the two vehicles.

use std::path::Path;

use collision_bounds::{contour_grid, mc_grid, DecoupleMethod};

use crate::config::{CliError, ContoursConfig};
use crate::emit::{csv_writer, finish_csv, sci, write_record};

/// Writes one `contours.csv` row per grid node. The `dominates_mc` column
/// records whether both analytic values stay above the Monte-Carlo estimate
/// minus three standard errors at that node.
pub fn run(cfg: &ContoursConfig, out: &Path, seed: u64) -> Result<(), CliError> {
    cfg.validate()?;
    let ego = cfg.ego.to_dist([0.0, 0.0], "ego")?;
    let ov = cfg.ov.to_dist([0.0, 0.0], "ov")?;
    let grid = cfg.grid.to_grid();
    let p_us1 = contour_grid(&ego, &ov, &grid, DecoupleMethod::Us1, cfg.n_phi)?;
    let p_pa = contour_grid(&ego, &ov, &grid, DecoupleMethod::Pa, cfg.n_phi)?;
    let mc = mc_grid(&ego, &ov, &grid, cfg.mc_samples, seed)?;

    let mut w = csv_writer(&out.join("contours.csv"))?;
    write_record(&mut w, ["mu_x", "mu_y", "p_us1", "p_pa", "p_mc", "mc_stderr", "dominates_mc"])?;
    let n = cfg.mc_samples as f64;
    for idx in 0..grid.len() {
        let [mu_x, mu_y] = grid.node(idx);
        // The plug-in standard error collapses to zero when every draw hits
        // or misses; smooth the rate by one pseudo-count per side before
        // taking the sampling variance so the three-sigma floor keeps its
        // intended width on saturated cells.
        let smooth = (mc[idx].estimate * n + 1.0) / (n + 2.0);
        let se = mc[idx].std_err.max((smooth * (1.0 - smooth) / n).sqrt());
        let floor = mc[idx].estimate - 3.0 * se;
        let dominates = p_us1[idx] >= floor && p_pa[idx] >= floor;
        write_record(
            &mut w,
            [
                sci(mu_x)?,
                sci(mu_y)?,
                sci(p_us1[idx])?,
                sci(p_pa[idx])?,
                sci(mc[idx].estimate)?,
                sci(mc[idx].std_err)?,
                u8::from(dominates).to_string(),
            ],
        )?;
    }
    finish_csv(w)
}
