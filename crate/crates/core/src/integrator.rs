//! Fixed-order, variable-stepsize Taylor integrator with dense output.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::codelist::CodeList;
use crate::kernel::{horner, KernelError, Workspace};

pub const MIN_ORDER: usize = 4;
pub const MAX_ORDER: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("maximum number of steps ({max}) exceeded at t = {t}")]
    MaxSteps { max: usize, t: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("at t = {t}: {source}")]
    Kernel { t: f64, source: KernelError },
    #[error("t = {t} lies outside the solution interval")]
    OutOfRange { t: f64 },
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub atol: f64,
    pub rtol: f64,
    /// Fixed order; when `None` the order follows from the tolerances.
    pub order: Option<usize>,
    pub t_span: (f64, f64),
    pub max_steps: usize,
    pub safety: f64,
}

impl SolveConfig {
    pub fn new(t_begin: f64, t_end: f64, tol: f64) -> Self {
        SolveConfig {
            atol: tol,
            rtol: tol,
            order: None,
            t_span: (t_begin, t_end),
            max_steps: 1_000_000,
            safety: 0.8,
        }
    }

    pub fn with_order(mut self, p: usize) -> Self {
        self.order = Some(p);
        self
    }

    pub fn with_tols(mut self, atol: f64, rtol: f64) -> Self {
        self.atol = atol;
        self.rtol = rtol;
        self
    }

    pub fn order(&self) -> usize {
        self.order.unwrap_or_else(|| choose_order(self.atol, self.rtol))
    }

    fn check(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::InvalidConfig(m.to_string()));
        if !(self.atol > 0.0 && self.rtol > 0.0) {
            return bad("tolerances must be positive");
        }
        let (a, b) = self.t_span;
        if !(a.is_finite() && b.is_finite()) || a == b {
            return bad("t_span must be finite with t_end != t_begin");
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad("safety factor must lie in (0, 1]");
        }
        if self.order() < 1 {
            return bad("order must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t0: f64,
    /// Signed step.
    pub h: f64,
    pub p: usize,
    pub accepted: bool,
    pub err_est: f64,
}

/// One accepted step: the state series about `t0`, valid on `[t0, t0 + h]`.
#[derive(Clone, Debug)]
pub struct Segment {
    pub t0: f64,
    pub h: f64,
    pub coeffs: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub t_span: (f64, f64),
    pub p: usize,
    pub segments: Vec<Segment>,
    pub steps: Vec<StepRecord>,
    pub accepted: usize,
    pub failed: usize,
    pub x_final: Vec<f64>,
    pub elapsed: Duration,
}

impl Solution {
    /// Mesh points `t_begin, ..., t_end`.
    pub fn mesh(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.segments.iter().map(|s| s.t0).collect();
        m.push(self.t_span.1);
        m
    }

    /// State at the start of each segment followed by the final state.
    pub fn mesh_states(&self) -> Vec<Vec<f64>> {
        let mut m: Vec<Vec<f64>> = self
            .segments
            .iter()
            .map(|s| s.coeffs.iter().map(|c| c[0]).collect())
            .collect();
        m.push(self.x_final.clone());
        m
    }

    /// State at any `t` within the span. At a mesh point the stored state
    /// is returned exactly.
    pub fn dense_eval(&self, t: f64) -> Result<Vec<f64>, SolveError> {
        let (a, b) = self.t_span;
        let dir = (b - a).signum();
        if !((t - a) * dir >= 0.0 && (b - t) * dir >= 0.0) {
            return Err(SolveError::OutOfRange { t });
        }
        if t == b {
            return Ok(self.x_final.clone());
        }
        // Last segment whose start is not beyond t.
        let idx = self
            .segments
            .partition_point(|s| (t - s.t0) * dir >= 0.0)
            .saturating_sub(1);
        let seg = &self.segments[idx];
        let dt = t - seg.t0;
        Ok(seg.coeffs.iter().map(|c| horner(c, dt)).collect())
    }
}

/// Order from the tolerances: `ceil(-0.5 ln(min(atol, rtol)) + 1)`,
/// clamped to `[MIN_ORDER, MAX_ORDER]`.
pub fn choose_order(atol: f64, rtol: f64) -> usize {
    let tol = atol.min(rtol);
    let p = (-0.5 * tol.ln() + 1.0).ceil();
    (p.max(MIN_ORDER as f64).min(MAX_ORDER as f64)) as usize
}

fn rho(coeffs: &[&[f64]], scale: &[f64], q: usize) -> f64 {
    coeffs
        .iter()
        .zip(scale)
        .map(|(c, s)| c[q].abs() / s)
        .fold(0.0, f64::max)
}

/// Step size from the last two terms of the series: the largest `h` for
/// which both `|c_q| h^q / scale` (`q = p-1, p`) stay below one, times the
/// safety factor. `None` when both orders vanish.
pub fn propose_step(coeffs: &[&[f64]], scale: &[f64], p: usize, safety: f64) -> Option<f64> {
    let qs = if p >= 2 { p - 1..=p } else { p..=p };
    let h = qs
        .filter_map(|q| {
            let r = rho(coeffs, scale, q);
            (r > 0.0).then(|| (1.0 / r).powf(1.0 / q as f64))
        })
        .fold(f64::INFINITY, f64::min);
    h.is_finite().then_some(safety * h)
}

/// Tail-term error estimate `max_i |c_p| h^p / scale_i`; accepted iff ≤ 1.
pub fn step_accept(coeffs: &[&[f64]], h: f64, scale: &[f64], p: usize) -> (bool, f64) {
    let err = rho(coeffs, scale, p) * h.abs().powi(p as i32);
    (err <= 1.0, err)
}

/// Integrates `x' = f(t, x)` over `cfg.t_span`.
pub fn solve(cl: &CodeList, ics: &[f64], cfg: &SolveConfig) -> Result<Solution, SolveError> {
    cfg.check()?;
    if ics.len() != cl.n_state() {
        return Err(SolveError::InvalidConfig(format!(
            "expected {} initial values, got {}",
            cl.n_state(),
            ics.len()
        )));
    }
    let start = Instant::now();
    let p = cfg.order();
    let n = cl.n_state();
    let (t_begin, t_end) = cfg.t_span;
    let dir = (t_end - t_begin).signum();
    let mut ws = Workspace::new(cl, p);
    let mut t = t_begin;
    let mut x = ics.to_vec();
    let mut h_prev: Option<f64> = None;
    let mut sol = Solution {
        t_span: cfg.t_span,
        p,
        segments: Vec::new(),
        steps: Vec::new(),
        accepted: 0,
        failed: 0,
        x_final: Vec::new(),
        elapsed: Duration::ZERO,
    };

    while t != t_end {
        if sol.steps.len() >= cfg.max_steps {
            return Err(SolveError::MaxSteps {
                max: cfg.max_steps,
                t,
            });
        }
        ws.run(cl, &x, t)
            .map_err(|source| SolveError::Kernel { t, source })?;
        let coeffs: Vec<&[f64]> = (0..n).map(|i| ws.state(i)).collect();
        let scale: Vec<f64> = x.iter().map(|xi| cfg.atol + cfg.rtol * xi.abs()).collect();
        let remaining = (t_end - t).abs();
        let mut h = propose_step(&coeffs, &scale, p, cfg.safety)
            .or(h_prev.map(|h| 2.0 * h))
            .unwrap_or(remaining);

        loop {
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            if h <= f64::EPSILON * t.abs().max(1.0) * 4.0 && !last {
                return Err(SolveError::StepUnderflow { t });
            }
            let (ok, err_est) = step_accept(&coeffs, h, &scale, p);
            let x_new: Vec<f64> = coeffs.iter().map(|c| horner(c, dir * h)).collect();
            let finite = x_new.iter().all(|v| v.is_finite());
            let accepted = ok && finite;
            sol.steps.push(StepRecord {
                t0: t,
                h: dir * h,
                p,
                accepted,
                err_est: if finite { err_est } else { f64::INFINITY },
            });
            if accepted {
                sol.accepted += 1;
                sol.segments.push(Segment {
                    t0: t,
                    h: dir * h,
                    coeffs: coeffs.iter().map(|c| c.to_vec()).collect(),
                });
                t = if last { t_end } else { t + dir * h };
                x = x_new;
                h_prev = Some(h);
                break;
            }
            sol.failed += 1;
            h *= if finite {
                (0.9 * err_est.powf(-1.0 / p as f64)).clamp(0.1, 0.5)
            } else {
                0.5
            };
            if sol.steps.len() >= cfg.max_steps {
                return Err(SolveError::MaxSteps {
                    max: cfg.max_steps,
                    t,
                });
            }
        }
    }
    sol.x_final = x;
    sol.elapsed = start.elapsed();
    Ok(sol)
}
