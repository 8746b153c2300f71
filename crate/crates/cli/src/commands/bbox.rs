//! Threshold-tightened keep-out boxes across an uncertainty schedule.

use std::path::Path;

use collision_bounds::{tightened_bbox, DecoupleMethod, PtsParams};

use crate::config::{BboxConfig, CliError};
use crate::emit::{csv_writer, finish_csv, sci, write_record};

/// Writes one `bbox.csv` row per schedule entry and method pairing.
///
/// Each entry scales both vehicles' position covariances and heading
/// variances, then solves the per-axis threshold searches twice: once with
/// the principal-axes rotation on both axes (`pa`) and once with the shear
/// pairing that keeps each axis exact (`mixed-us`). Corners are listed
/// counter-clockwise in the frame the vehicle positions are given in.
pub fn run(cfg: &BboxConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let pts = PtsParams::new(cfg.delta);
    let pairings = [
        ("pa", DecoupleMethod::Pa, DecoupleMethod::Pa),
        ("mixed-us", DecoupleMethod::Us2, DecoupleMethod::Us1),
    ];

    let mut w = csv_writer(&out.join("bbox.csv"))?;
    let mut header: Vec<String> = [
        "idx",
        "pos_scale",
        "heading_scale",
        "method",
        "mu1_star",
        "mu2_star",
        "iterations_1",
        "iterations_2",
        "converged",
    ]
    .map(String::from)
    .to_vec();
    for i in 1..=4 {
        header.push(format!("c{i}x"));
        header.push(format!("c{i}y"));
    }
    write_record(&mut w, &header)?;

    for (idx, scale) in cfg.schedule.iter().enumerate() {
        let ego =
            cfg.ego.to_dist_scaled([0.0, 0.0], scale.pos_scale, scale.heading_scale, "ego")?;
        let ov = cfg.ov.to_dist_scaled(
            [cfg.ov_offset.x, cfg.ov_offset.y],
            scale.pos_scale,
            scale.heading_scale,
            "ov",
        )?;
        for (name, m1, m2) in pairings {
            let tb = tightened_bbox(&ego, &ov, cfg.n_phi, m1, m2, &pts)?;
            let mut row = vec![
                idx.to_string(),
                sci(scale.pos_scale)?,
                sci(scale.heading_scale)?,
                name.to_string(),
                sci(tb.mu1_star)?,
                sci(tb.mu2_star)?,
                tb.iterations[0].to_string(),
                tb.iterations[1].to_string(),
                u8::from(tb.converged).to_string(),
            ];
            for corner in tb.corners {
                row.push(sci(corner[0])?);
                row.push(sci(corner[1])?);
            }
            write_record(&mut w, &row)?;
        }
    }
    finish_csv(w)
}
