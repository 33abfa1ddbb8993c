//! Benchmark initial-value problems.

use std::f64::consts::PI;

use crate::codelist::{CodeList, Expr, TraceError, Tracer};

pub type Invariant = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type ExactSolution = Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// How the Taylor order is chosen for a problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderPolicy {
    /// From the tolerances, see [`choose_order`](crate::integrator::choose_order).
    Formula,
    Fixed(usize),
}

pub struct Problem {
    pub name: String,
    pub codelist: CodeList,
    pub ics: Vec<f64>,
    pub t_span: (f64, f64),
    pub order_policy: OrderPolicy,
    /// Conserved quantities, by name.
    pub invariants: Vec<(String, Invariant)>,
    pub exact: Option<ExactSolution>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("n_state", &self.codelist.n_state())
            .field("lines", &self.codelist.len())
            .field("t_span", &self.t_span)
            .field("order_policy", &self.order_policy)
            .finish()
    }
}

impl Problem {
    pub fn invariant(&self, name: &str) -> Option<&Invariant> {
        self.invariants.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpringParams {
    pub g: f64,
    pub k: f64,
    pub m: f64,
    pub a: f64,
}

impl Default for SpringParams {
    fn default() -> Self {
        SpringParams {
            g: 9.81,
            k: 40.0,
            m: 1.0,
            a: 1.0,
        }
    }
}

impl SpringParams {
    /// Spring length at rest, `a + m g / k`.
    pub fn rest_length(&self) -> f64 {
        self.a + self.m * self.g / self.k
    }
}

/// Traces the spring-pendulum right-hand side in state order
/// `(r, s = ṙ, θ, ω = θ̇)` with parameters `g, k, m, a`.
pub fn spring_pendulum_codelist(p: SpringParams) -> Result<CodeList, TraceError> {
    Tracer::new(4)
        .params([("g", p.g), ("k", p.k), ("m", p.m), ("a", p.a)])
        .trace(|s| {
            let (r, sv, th, w) = (s.x(0), s.x(1), s.x(2), s.x(3));
            let (g, k, m, a) = (s.param("g"), s.param("k"), s.param("m"), s.param("a"));
            let ra = &r - &a;
            let ds = &r * &w * &w + &g * th.cos() - &k / &m * (&ra + 1.0 - (-&ra).exp());
            let dw = (-2.0 * &sv * &w - &g * th.sin()) / &r;
            vec![sv.clone(), ds, w.clone(), dw]
        })
}

/// Energy conserved by the spring-pendulum equations:
/// `½m(s² + (rω)²) + k v(r - a) - m g r cos θ`,
/// with `v(x) = ½x² + e^{-x} - 1 + x`.
pub fn spring_energy(p: SpringParams, x: &[f64]) -> f64 {
    let (r, s, th, w) = (x[0], x[1], x[2], x[3]);
    let d = r - p.a;
    let v = 0.5 * d * d + (-d).exp() - 1.0 + d;
    0.5 * p.m * (s * s + (r * w).powi(2)) + p.k * v - p.m * p.g * r * th.cos()
}

pub fn spring_pendulum(p: SpringParams) -> Result<Problem, TraceError> {
    Ok(Problem {
        name: "spring-pendulum".into(),
        codelist: spring_pendulum_codelist(p)?,
        ics: vec![p.rest_length(), 0.0, PI / 4.0, 4.65],
        t_span: (0.0, 20.0),
        order_policy: OrderPolicy::Formula,
        invariants: vec![("energy".into(), Box::new(move |x| spring_energy(p, x)))],
        exact: None,
    })
}

pub const PLEIADES_BODIES: usize = 7;

/// Seven bodies in the plane, `m_i = i`, `G = 1`. State order: all `x`,
/// all `y`, all `ẋ`, all `ẏ`.
pub fn pleiades() -> Result<Problem, TraceError> {
    const N: usize = PLEIADES_BODIES;
    let mass = |i: usize| (i + 1) as f64;
    let cl = Tracer::new(4 * N).trace(|s| {
        let x: Vec<Expr> = (0..N).map(|i| s.x(i)).collect();
        let y: Vec<Expr> = (0..N).map(|i| s.x(N + i)).collect();
        let mut ax: Vec<Option<Expr>> = vec![None; N];
        let mut ay: Vec<Option<Expr>> = vec![None; N];
        let acc = |slot: &mut Option<Expr>, term: Expr| {
            *slot = Some(match slot.take() {
                Some(a) => a + term,
                None => term,
            });
        };
        for i in 0..N {
            for j in i + 1..N {
                let dx = &x[j] - &x[i];
                let dy = &y[j] - &y[i];
                let r2 = &dx * &dx + &dy * &dy;
                let r3 = &r2 * r2.sqrt();
                let fx = &dx / &r3;
                let fy = &dy / &r3;
                acc(&mut ax[i], mass(j) * &fx);
                acc(&mut ay[i], mass(j) * &fy);
                acc(&mut ax[j], -mass(i) * &fx);
                acc(&mut ay[j], -mass(i) * &fy);
            }
        }
        let mut out: Vec<Expr> = (2 * N..4 * N).map(|i| s.x(i)).collect();
        out.extend(ax.into_iter().map(|a| a.expect("at least two bodies")));
        out.extend(ay.into_iter().map(|a| a.expect("at least two bodies")));
        out
    })?;
    let ics = [
        [3.0, 3.0, -1.0, -3.0, 2.0, -2.0, 2.0],
        [3.0, -3.0, 2.0, 0.0, 0.0, -4.0, 4.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.75, -1.5],
        [0.0, 0.0, 0.0, -1.25, 1.0, 0.0, 0.0],
    ]
    .concat();
    let momentum = move |axis: usize| -> Invariant {
        Box::new(move |s: &[f64]| (0..N).map(|i| mass(i) * s[(2 + axis) * N + i]).sum())
    };
    let angular: Invariant = Box::new(move |s: &[f64]| {
        (0..N)
            .map(|i| mass(i) * (s[i] * s[3 * N + i] - s[N + i] * s[2 * N + i]))
            .sum()
    });
    let energy: Invariant = Box::new(move |s: &[f64]| {
        let mut e = 0.0;
        for i in 0..N {
            e += 0.5 * mass(i) * (s[2 * N + i].powi(2) + s[3 * N + i].powi(2));
            for j in i + 1..N {
                let r = (s[i] - s[j]).hypot(s[N + i] - s[N + j]);
                e -= mass(i) * mass(j) / r;
            }
        }
        e
    });
    Ok(Problem {
        name: "pleiades".into(),
        codelist: cl,
        ics,
        t_span: (0.0, 3.0),
        order_policy: OrderPolicy::Formula,
        invariants: vec![
            ("momentum-x".into(), momentum(0)),
            ("momentum-y".into(), momentum(1)),
            ("angular-momentum".into(), angular),
            ("energy".into(), energy),
        ],
        exact: None,
    })
}

pub const BRUSSELATOR_ALPHA: f64 = 1.0 / 50.0;

/// Brusselator on `N` interior grid points with `u = 1`, `v = 3` at both
/// boundaries. State order: `u_1..u_N, v_1..v_N`.
pub fn brusselator(n: usize) -> Result<Problem, TraceError> {
    assert!(n >= 2, "the Brusselator needs at least two grid points");
    let c = BRUSSELATOR_ALPHA * ((n + 1) * (n + 1)) as f64;
    let cl = Tracer::new(2 * n).trace(|s| {
        let u: Vec<Expr> = (0..n).map(|i| s.x(i)).collect();
        let v: Vec<Expr> = (0..n).map(|i| s.x(n + i)).collect();
        let nb = |w: &[Expr], i: isize, edge: f64| -> Expr {
            if i < 0 || i >= n as isize {
                s.constant(edge)
            } else {
                w[i as usize].clone()
            }
        };
        let mut du = Vec::with_capacity(n);
        let mut dv = Vec::with_capacity(n);
        for i in 0..n {
            let k = i as isize;
            let uuv = &u[i] * &u[i] * &v[i];
            let lap_u = nb(&u, k - 1, 1.0) - 2.0 * &u[i] + nb(&u, k + 1, 1.0);
            let lap_v = nb(&v, k - 1, 3.0) - 2.0 * &v[i] + nb(&v, k + 1, 3.0);
            du.push(1.0 + &uuv - 4.0 * &u[i] + c * lap_u);
            dv.push(3.0 * &u[i] - &uuv + c * lap_v);
        }
        du.extend(dv);
        du
    })?;
    let mut ics: Vec<f64> = (1..=n)
        .map(|i| 1.0 + (2.0 * PI * i as f64 / (n + 1) as f64).sin())
        .collect();
    ics.extend(std::iter::repeat(3.0).take(n));
    Ok(Problem {
        name: format!("brusselator-{n}"),
        codelist: cl,
        ics,
        t_span: (0.0, 10.0),
        order_policy: OrderPolicy::Fixed(20),
        invariants: vec![],
        exact: None,
    })
}

/// `ẋ = e^{-x}`, `x(0) = 0` on `[0, 1]`, with solution `ln(1 + t)`.
pub fn expneg() -> Result<Problem, TraceError> {
    let cl = Tracer::new(1).trace(|s| vec![(-s.x(0)).exp()])?;
    Ok(Problem {
        name: "expneg".into(),
        codelist: cl,
        ics: vec![0.0],
        t_span: (0.0, 1.0),
        order_policy: OrderPolicy::Formula,
        invariants: vec![],
        exact: Some(Box::new(|t: f64| vec![t.ln_1p()])),
    })
}

pub const PROBLEM_NAMES: [&str; 4] = ["spring-pendulum", "pleiades", "brusselator", "expneg"];

/// Looks a problem up by name. `brusselator` takes its grid size from
/// `n` (default 20); the spring pendulum takes `spring` parameters.
pub fn problem_by_name(
    name: &str,
    spring: SpringParams,
    n: Option<usize>,
) -> Option<Result<Problem, TraceError>> {
    Some(match name {
        "spring-pendulum" | "spring" | "A" => spring_pendulum(spring),
        "pleiades" | "B" => pleiades(),
        "brusselator" | "C" => brusselator(n.unwrap_or(20)),
        "expneg" => expneg(),
        _ => return None,
    })
}
