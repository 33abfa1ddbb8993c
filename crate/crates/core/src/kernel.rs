//! Truncated Taylor-series arithmetic, the sub-ODE operator, and the
//! order-by-order interpreter that evaluates a code list.
//!
//! Coefficients are scaled: `c[k] = u^(k)(t0) / k!`.

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::codelist::{AlgOp, CodeList, LineId, Op, Operand};
use crate::stdfuncs::SubOdeDef;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("line {line}: division by a series with zero constant term")]
    DivisionBySingularSeries { line: LineId },
    #[error("line {line}: `{func}` is undefined at {arg}")]
    BaseFunctionDomain { line: LineId, func: String, arg: f64 },
    #[error("line {line}: read order {order} of line {target} before it was computed")]
    ForwardRead {
        line: LineId,
        target: LineId,
        order: usize,
    },
    #[error("expected {expected} initial values, got {got}")]
    IcLength { expected: usize, got: usize },
}

/// `u_k + v_k`.
pub fn ts_add(u: &[f64], v: &[f64], k: usize) -> f64 {
    u[k] + v[k]
}

/// `u_k - v_k`.
pub fn ts_sub(u: &[f64], v: &[f64], k: usize) -> f64 {
    u[k] - v[k]
}

/// Order-`k` coefficient of the product `u v`.
pub fn ts_mul(u: &[f64], v: &[f64], k: usize) -> f64 {
    (0..=k).map(|r| u[r] * v[k - r]).sum()
}

/// Order-`k` coefficient of `w = u / v`, given `w_0..w_{k-1}` in `w`.
/// Returns `None` when `v_0 = 0`.
pub fn ts_div(u: &[f64], v: &[f64], w: &[f64], k: usize) -> Option<f64> {
    if v[0] == 0.0 {
        return None;
    }
    let s: f64 = (0..k).map(|r| v[k - r] * w[r]).sum();
    Some((u[k] - s) / v[0])
}

/// Recurrence part of the sub-ODE operator for one component, `k >= 1`:
/// `v_k = (1/k) Σ_{i=1..k} i u_i h_{k-i}`.
pub fn subode_coeff(u: &[f64], h: &[f64], k: usize) -> f64 {
    debug_assert!(k >= 1);
    let s: f64 = (1..=k).map(|i| i as f64 * u[i] * h[k - i]).sum();
    s / k as f64
}

/// The sub-ODE operator for all `m` components of `def`. At `k = 0` the
/// built-in initial value `γ(u_0)` is returned; `h[c]` must hold orders
/// `0..k-1` of component `c` of `h(u, v)` for `k >= 1`.
pub fn ts_subode(def: &SubOdeDef, u: &[f64], h: &[&[f64]], k: usize) -> Option<Vec<f64>> {
    if k == 0 {
        def.eval_base(u[0])
    } else {
        Some(h.iter().map(|hc| subode_coeff(u, hc, k)).collect())
    }
}

/// A truncated power series about `t0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorCoeffs {
    pub t0: f64,
    pub c: Vec<f64>,
}

impl TaylorCoeffs {
    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    /// Value of the polynomial at `t0 + h`.
    pub fn horner(&self, h: f64) -> f64 {
        horner(&self.c, h)
    }
}

pub fn horner(c: &[f64], h: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * h + ck)
}

static TRAP_CHECKS: AtomicU64 = AtomicU64::new(0);
static TRAP_VIOLATIONS: AtomicU64 = AtomicU64::new(0);

/// Process-wide totals of the availability checks made by every
/// [`Workspace`] run so far.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrapCounters {
    pub checks: u64,
    pub violations: u64,
}

pub fn trap_counters() -> TrapCounters {
    TrapCounters {
        checks: TRAP_CHECKS.load(Ordering::Relaxed),
        violations: TRAP_VIOLATIONS.load(Ordering::Relaxed),
    }
}

const NONE: usize = usize::MAX;

/// Coefficient storage for every code-list variable plus one row per
/// immediate or time operand. Each row records how many orders are final;
/// every read is checked against that count.
pub struct Workspace {
    p: usize,
    n_lines: usize,
    data: Vec<f64>,
    avail: Vec<usize>,
    src: Vec<[usize; 2]>,
    consts: Vec<(usize, Operand)>,
    checks: u64,
    violations: u64,
}

impl Workspace {
    pub fn new(cl: &CodeList, p: usize) -> Self {
        let n_lines = cl.len();
        let mut consts = Vec::new();
        let mut src = Vec::with_capacity(n_lines);
        for l in cl.lines() {
            let mut s = [NONE; 2];
            for (slot, o) in l.operands.iter().enumerate() {
                s[slot] = match o {
                    None => NONE,
                    Some(Operand::Ref(r)) => r.index(),
                    Some(o) => {
                        consts.push((n_lines + consts.len(), *o));
                        n_lines + consts.len() - 1
                    }
                };
            }
            src.push(s);
        }
        let rows = n_lines + consts.len();
        Workspace {
            p,
            n_lines,
            data: vec![0.0; rows * (p + 1)],
            avail: vec![0; rows],
            src,
            consts,
            checks: 0,
            violations: 0,
        }
    }

    pub fn order(&self) -> usize {
        self.p
    }

    fn row(&self, r: usize) -> &[f64] {
        let w = self.p + 1;
        &self.data[r * w..(r + 1) * w]
    }

    /// Coefficients `0..=p` of a code-list variable after [`run`](Self::run).
    pub fn coeffs(&self, line: LineId) -> &[f64] {
        self.row(line.index())
    }

    /// Coefficients of state `i` (0-based).
    pub fn state(&self, i: usize) -> &[f64] {
        self.row(i)
    }

    fn set(&mut self, r: usize, k: usize, v: f64) {
        self.data[r * (self.p + 1) + k] = v;
    }

    fn require(&mut self, line: usize, r: usize, k: usize) -> Result<(), KernelError> {
        self.checks += 1;
        if self.avail[r] <= k {
            self.violations += 1;
            return Err(KernelError::ForwardRead {
                line: LineId::new(line + 1),
                target: LineId::new(r + 1),
                order: k,
            });
        }
        Ok(())
    }

    fn flush(&mut self) {
        TRAP_CHECKS.fetch_add(self.checks, Ordering::Relaxed);
        TRAP_VIOLATIONS.fetch_add(self.violations, Ordering::Relaxed);
        self.checks = 0;
        self.violations = 0;
    }

    /// Computes coefficients `0..=p` of every variable, expanding about
    /// `t0` with state initial values `ics`.
    pub fn run(&mut self, cl: &CodeList, ics: &[f64], t0: f64) -> Result<(), KernelError> {
        let r = self.run_inner(cl, ics, t0);
        self.flush();
        r
    }

    fn run_inner(&mut self, cl: &CodeList, ics: &[f64], t0: f64) -> Result<(), KernelError> {
        if ics.len() != cl.n_state() {
            return Err(KernelError::IcLength {
                expected: cl.n_state(),
                got: ics.len(),
            });
        }
        let p = self.p;
        self.avail.iter_mut().for_each(|a| *a = 0);
        for i in 0..self.consts.len() {
            let (r, o) = self.consts[i];
            let (c0, c1) = match o {
                Operand::Imm(imm) => (imm.value, 0.0),
                Operand::Time => (t0, 1.0),
                Operand::Ref(_) => unreachable!(),
            };
            self.set(r, 0, c0);
            for k in 1..=p {
                self.set(r, k, if k == 1 { c1 } else { 0.0 });
            }
            self.avail[r] = p + 1;
        }
        for q in 0..=p {
            self.sweep(cl, ics, q)?;
        }
        Ok(())
    }

    fn sweep(&mut self, cl: &CodeList, ics: &[f64], q: usize) -> Result<(), KernelError> {
        for j in 0..self.n_lines {
            let line = cl.line(LineId::new(j + 1));
            let [s0, s1] = self.src[j];
            match &line.op {
                Op::Ode => {
                    let v = if q == 0 {
                        ics[j]
                    } else {
                        self.require(j, s0, q - 1)?;
                        self.row(s0)[q - 1] / q as f64
                    };
                    self.set(j, q, v);
                    self.avail[j] = q + 1;
                }
                Op::Alg(op) => {
                    self.require(j, s0, q)?;
                    self.require(j, s1, q)?;
                    let (a, b) = (self.row(s0), self.row(s1));
                    let v = match op {
                        AlgOp::Add => ts_add(a, b, q),
                        AlgOp::Sub => ts_sub(a, b, q),
                        AlgOp::Mul => ts_mul(a, b, q),
                        AlgOp::Div => ts_div(a, b, self.row(j), q).ok_or(
                            KernelError::DivisionBySingularSeries {
                                line: LineId::new(j + 1),
                            },
                        )?,
                    };
                    self.set(j, q, v);
                    self.avail[j] = q + 1;
                }
                Op::SubOde { func, component } => {
                    // The head line computes the whole block at this order.
                    if *component != 0 {
                        continue;
                    }
                    let m = func.dim();
                    self.require(j, s1, q)?;
                    let vals = if q == 0 {
                        let u0 = self.row(s1)[0];
                        func.eval_base(u0).ok_or_else(|| KernelError::BaseFunctionDomain {
                            line: LineId::new(j + 1),
                            func: func.name().to_string(),
                            arg: u0,
                        })?
                    } else {
                        let mut vals = Vec::with_capacity(m);
                        for c in 0..m {
                            let hs = self.src[j + c][0];
                            self.require(j + c, hs, q - 1)?;
                            vals.push(subode_coeff(self.row(s1), self.row(hs), q));
                        }
                        vals
                    };
                    for (c, v) in vals.into_iter().enumerate() {
                        self.set(j + c, q, v);
                        self.avail[j + c] = q + 1;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Runs a code list once and returns the series of every variable.
pub fn run_codelist(
    cl: &CodeList,
    ics: &[f64],
    t0: f64,
    p: usize,
) -> Result<Vec<TaylorCoeffs>, KernelError> {
    let mut ws = Workspace::new(cl, p);
    ws.run(cl, ics, t0)?;
    Ok((0..cl.len())
        .map(|i| TaylorCoeffs {
            t0,
            c: ws.row(i).to_vec(),
        })
        .collect())
}
