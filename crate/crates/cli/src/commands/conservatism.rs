//! Transformed-box sweep: the circumscribed half-dimensions of a fixed box
//! under each decoupling transform, across correlation and
//! standard-deviation-ratio values.

use std::path::Path;

use collision_bounds::geometry::transform_box;
use collision_bounds::linalg::rsh_decompose;
use collision_bounds::{decouple, CombinedBox, Cov2, DecoupleMethod, ShearCase};

use crate::config::{CliError, ConservatismConfig};
use crate::emit::{csv_writer, finish_csv, sci, write_record};

/// Writes one `conservatism.csv` row per (rho, ratio, method) triple.
///
/// `a_pp` and `b_pp` are the circumscribed half-dimensions in the
/// transformed frame. The `a_pp_over_s1` and `b_pp_over_s2` columns divide
/// out the scale factors of the two shear cases, giving metric lengths
/// comparable to the input box; the rotation rows have unit scales, so
/// there the normalized columns repeat `a_pp` and `b_pp`.
pub fn run(cfg: &ConservatismConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let bx = CombinedBox { a: cfg.a, b: cfg.b };
    let methods = [
        (DecoupleMethod::Pa, None),
        (DecoupleMethod::Us1, Some(ShearCase::One)),
        (DecoupleMethod::Us2, Some(ShearCase::Two)),
    ];

    let mut w = csv_writer(&out.join("conservatism.csv"))?;
    write_record(
        &mut w,
        ["rho", "sigma_ratio", "method", "a_pp", "b_pp", "a_pp_over_s1", "b_pp_over_s2"],
    )?;
    for &rho in &cfg.rho.values() {
        for &ratio in &cfg.sigma_ratio.values() {
            let sy = cfg.sigma_y;
            let sx = ratio * sy;
            let cov = Cov2::new(sx * sx, rho * sx * sy, sy * sy)
                .map_err(|e| CliError::Runtime(format!("rho={rho}, sigma_ratio={ratio}: {e}")))?;
            for (method, case) in methods {
                let d = decouple(&cov, method)?;
                let tb = transform_box(&d.t, &bx);
                let (s1, s2) = match case {
                    None => (1.0, 1.0),
                    Some(c) => {
                        let f = rsh_decompose(&cov, c)?;
                        (f.s1, f.s2)
                    }
                };
                write_record(
                    &mut w,
                    [
                        sci(rho)?,
                        sci(ratio)?,
                        method.as_str().to_string(),
                        sci(tb.a_pp)?,
                        sci(tb.b_pp)?,
                        sci(tb.a_pp / s1.abs())?,
                        sci(tb.b_pp / s2.abs())?,
                    ],
                )?;
            }
        }
    }
    finish_csv(w)
}
