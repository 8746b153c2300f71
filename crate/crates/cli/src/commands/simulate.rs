//! Seeded closed-loop batches: one step table and one summary per planner
//! mode, plus a cross-mode comparison when several modes run on matched
//! seeds.

use std::path::Path;

use corridor_planner::{batch_run, PlannerMode, RunResult};
use serde::Serialize;

use crate::config::{CliError, ScenarioSpec};
use crate::emit::{csv_writer, finish_csv, sci, write_json, write_record};

/// Five-point spread of a sample; quartiles interpolate linearly between
/// order statistics.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
}

impl Quantiles {
    /// `None` when the sample is empty.
    pub fn of(values: &[f64]) -> Option<Quantiles> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in quantile input"));
        let at = |p: f64| -> f64 {
            let x = p * (v.len() - 1) as f64;
            let i = x.floor() as usize;
            let f = x - i as f64;
            if i + 1 < v.len() {
                v[i] * (1.0 - f) + v[i + 1] * f
            } else {
                v[i]
            }
        };
        Some(Quantiles { min: v[0], p25: at(0.25), median: at(0.5), p75: at(0.75), max: v[v.len() - 1] })
    }
}

/// Per-vehicle spread, over runs, of the run's worst audited bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OvMaxProb {
    /// 1-based vehicle index in scenario order.
    pub ov: usize,
    pub quantiles: Quantiles,
}

/// One batch, aggregated. `solve_ms` pools every step on which the planner
/// actually ran; it is `None` when every step fell back.
#[derive(Clone, Debug, Serialize)]
pub struct BatchSummary {
    pub mode: String,
    pub n_runs: usize,
    pub base_seed: u64,
    pub success_rate: f64,
    pub collision_runs: usize,
    pub fallback_steps: usize,
    pub max_prob: Vec<OvMaxProb>,
    pub final_s: Quantiles,
    pub solve_ms: Option<Quantiles>,
}

/// Mode row of the cross-mode comparison.
#[derive(Clone, Debug, Serialize)]
pub struct ModeDigest {
    pub mode: String,
    pub successes: usize,
    pub median_solve_ms: Option<f64>,
}

/// One corridor-mode versus direct-mode pairing on matched seeds.
#[derive(Clone, Debug, Serialize)]
pub struct SpeedupRow {
    pub convex: String,
    pub direct: String,
    /// Median corridor-mode solve time over median direct-mode solve time.
    pub median_solve_ratio: f64,
    pub convex_faster: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub base_seed: u64,
    pub n_runs: usize,
    pub modes: Vec<ModeDigest>,
    pub convex_vs_direct: Vec<SpeedupRow>,
}

fn planned_solve_times(runs: &[RunResult]) -> Vec<f64> {
    runs.iter()
        .flat_map(|r| r.steps.iter())
        .filter(|s| s.sqp_iterations > 0)
        .map(|s| s.solve_ms)
        .collect()
}

fn build_summary(mode: PlannerMode, base_seed: u64, runs: &[RunResult], n_ovs: usize) -> BatchSummary {
    let successes = runs.iter().filter(|r| r.success).count();
    let max_prob = (0..n_ovs)
        .map(|k| {
            let worst: Vec<f64> = runs
                .iter()
                .map(|r| {
                    r.steps.iter().map(|s| s.bounds[k]).fold(0.0f64, f64::max)
                })
                .collect();
            OvMaxProb {
                ov: k + 1,
                quantiles: Quantiles::of(&worst).expect("at least one run"),
            }
        })
        .collect();
    let final_s: Vec<f64> = runs.iter().map(|r| r.final_s).collect();
    BatchSummary {
        mode: mode.as_str().to_string(),
        n_runs: runs.len(),
        base_seed,
        success_rate: successes as f64 / runs.len() as f64,
        collision_runs: runs.len() - successes,
        fallback_steps: runs.iter().flat_map(|r| &r.steps).filter(|s| s.fallback).count(),
        max_prob,
        final_s: Quantiles::of(&final_s).expect("at least one run"),
        solve_ms: Quantiles::of(&planned_solve_times(runs)),
    }
}

fn write_steps_csv(
    path: &Path,
    runs: &[RunResult],
    n_ovs: usize,
) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> =
        ["run", "t", "s", "y_e", "phi", "v", "a", "gamma", "solver_status", "solve_ms"]
            .map(String::from)
            .to_vec();
    for k in 1..=n_ovs {
        header.push(format!("pbound_ov{k}"));
    }
    write_record(&mut w, &header)?;
    for (i, run) in runs.iter().enumerate() {
        for step in &run.steps {
            let mut row = vec![
                i.to_string(),
                sci(step.t)?,
                sci(step.ego.s)?,
                sci(step.ego.y_e)?,
                sci(step.ego.phi)?,
                sci(step.ego.v)?,
                sci(step.ego.a)?,
                sci(step.ego.gamma)?,
                step.status.as_str().to_string(),
                sci(step.solve_ms)?,
            ];
            for k in 0..n_ovs {
                row.push(sci(step.bounds[k])?);
            }
            write_record(&mut w, &row)?;
        }
    }
    finish_csv(w)
}

/// Runs every requested mode over the same seed sequence and writes
/// `steps-<mode>.csv` and `summary-<mode>.json` per mode; two or more
/// modes additionally produce `comparison.json`.
pub fn run(
    spec: &ScenarioSpec,
    modes: &[PlannerMode],
    out: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    if modes.is_empty() {
        return Err(CliError::Config("at least one mode is required".into()));
    }
    let (sc, params) = spec.to_scenario()?;
    let base_seed = seed_override.unwrap_or(spec.seeds.base);
    let n_runs = spec.seeds.n_runs;
    let n_ovs = sc.ovs.len();

    let mut digests = Vec::new();
    for &mode in modes {
        let runs = batch_run(&sc, mode, &params, base_seed, n_runs)?;
        write_steps_csv(&out.join(format!("steps-{}.csv", mode.as_str())), &runs, n_ovs)?;
        let summary = build_summary(mode, base_seed, &runs, n_ovs);
        write_json(&out.join(format!("summary-{}.json", mode.as_str())), &summary)?;
        let times = planned_solve_times(&runs);
        digests.push(ModeDigest {
            mode: mode.as_str().to_string(),
            successes: runs.iter().filter(|r| r.success).count(),
            median_solve_ms: Quantiles::of(&times).map(|q| q.median),
        });
    }

    if modes.len() >= 2 {
        let mut pairs = Vec::new();
        for (i, &a) in modes.iter().enumerate() {
            if matches!(a, PlannerMode::Direct(_)) {
                continue;
            }
            for (j, &b) in modes.iter().enumerate() {
                if !matches!(b, PlannerMode::Direct(_)) {
                    continue;
                }
                if let (Some(ma), Some(mb)) =
                    (digests[i].median_solve_ms, digests[j].median_solve_ms)
                {
                    if mb > 0.0 {
                        pairs.push(SpeedupRow {
                            convex: a.as_str().to_string(),
                            direct: b.as_str().to_string(),
                            median_solve_ratio: ma / mb,
                            convex_faster: ma < mb,
                        });
                    }
                }
            }
        }
        let cmp = Comparison { base_seed, n_runs, modes: digests, convex_vs_direct: pairs };
        write_json(&out.join("comparison.json"), &cmp)?;
    }
    Ok(())
}
