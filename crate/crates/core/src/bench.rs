//! Tolerance sweeps, significant correct digits, and work-precision CSV.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::integrator::{solve, SolveConfig, SolveError};
use crate::problems::{OrderPolicy, Problem};

/// Reported when the final state matches the reference exactly.
pub const SCD_CAP: f64 = 16.0;
/// Lower bound for the denominator of a componentwise relative error.
pub const SCD_FLOOR: f64 = 1e-300;
/// Components smaller than this fraction of the reference's max norm are
/// left out of the relative error.
pub const SCD_EXCLUDE: f64 = 1e-12;
/// Tolerance of the reference run.
pub const REFERENCE_TOL: f64 = 3e-14;

/// Significant correct digits: `-log10` of the max-norm componentwise
/// relative error, capped at [`SCD_CAP`].
pub fn scd(x: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(x.len(), reference.len());
    let norm = reference.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    assert!(norm > 0.0, "reference must be nonzero");
    let err = x
        .iter()
        .zip(reference)
        .filter(|(_, r)| r.abs() >= SCD_EXCLUDE * norm)
        .map(|(a, r)| (a - r).abs() / r.abs().max(SCD_FLOOR))
        // `f64::max` would drop a NaN; a NaN component means no digits.
        .fold(0.0f64, |m, e| if e.is_nan() { f64::INFINITY } else { m.max(e) });
    if !err.is_finite() {
        return f64::NEG_INFINITY;
    }
    if err == 0.0 {
        SCD_CAP
    } else {
        (-err.log10()).min(SCD_CAP)
    }
}

fn config(problem: &Problem, tol: f64, policy: OrderPolicy) -> SolveConfig {
    let cfg = SolveConfig::new(problem.t_span.0, problem.t_span.1, tol);
    match policy {
        OrderPolicy::Formula => cfg,
        OrderPolicy::Fixed(p) => cfg.with_order(p),
    }
}

/// Solves `problem` with `atol = rtol = tol`.
pub fn run_one(
    problem: &Problem,
    tol: f64,
    policy: OrderPolicy,
) -> Result<crate::integrator::Solution, SolveError> {
    solve(&problem.codelist, &problem.ics, &config(problem, tol, policy))
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub problem: String,
    pub tol: f64,
    pub p: usize,
    pub scd: Option<f64>,
    pub steps_accepted: usize,
    pub steps_failed: usize,
    /// Integration time only; tracing is reported separately.
    pub time_s: f64,
    pub final_state: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub reports: Vec<RunReport>,
    pub reference: Vec<f64>,
    pub reference_time_s: f64,
}

/// Computes a reference at [`REFERENCE_TOL`] and solves at every
/// tolerance. A failing tolerance is recorded in its report and the sweep
/// continues.
pub fn run_suite(
    problem: &Problem,
    tols: &[f64],
    policy: OrderPolicy,
) -> Result<SuiteResult, SolveError> {
    let t = Instant::now();
    let reference = run_one(problem, REFERENCE_TOL, policy)?.x_final;
    let reference_time_s = t.elapsed().as_secs_f64();
    let reports = tols
        .iter()
        .map(|&tol| {
            let p = config(problem, tol, policy).order();
            match run_one(problem, tol, policy) {
                Ok(sol) => RunReport {
                    problem: problem.name.clone(),
                    tol,
                    p,
                    scd: Some(scd(&sol.x_final, &reference)),
                    steps_accepted: sol.accepted,
                    steps_failed: sol.failed,
                    time_s: sol.elapsed.as_secs_f64(),
                    final_state: sol.x_final,
                    error: None,
                },
                Err(e) => RunReport {
                    problem: problem.name.clone(),
                    tol,
                    p,
                    scd: None,
                    steps_accepted: 0,
                    steps_failed: 0,
                    time_s: 0.0,
                    final_state: vec![],
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SuiteResult {
        reports,
        reference,
        reference_time_s,
    })
}

#[derive(Serialize)]
struct CsvRow {
    tol: f64,
    p: usize,
    scd: Option<f64>,
    steps_accepted: usize,
    steps_failed: usize,
    time_s: f64,
}

/// Writes `tol,p,scd,steps_accepted,steps_failed,time_s`, one row per
/// report. Floats use the shortest representation that round-trips.
pub fn write_csv<W: Write>(reports: &[RunReport], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(CsvRow {
            tol: r.tol,
            p: r.p,
            scd: r.scd,
            steps_accepted: r.steps_accepted,
            steps_failed: r.steps_failed,
            time_s: r.time_s,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Tolerances `10^-lo, ..., 10^-hi` (inclusive, every `step` decades).
pub fn tolerance_sweep(lo: i32, hi: i32, step: usize) -> Vec<f64> {
    (lo..=hi).step_by(step).map(|e| 10f64.powi(-e)).collect()
}
