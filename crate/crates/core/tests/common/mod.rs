//! Shared helpers for the integration tests: a random expression-tree
//! generator with domain guards, and an independent Taylor-series oracle
//! that composes elementary functions through their derivatives at the
//! expansion point and solves the IVP by Picard iteration.
#![allow(dead_code)]

pub mod mp;

use std::f64::consts::FRAC_PI_2;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use subode::codelist::{CodeList, Expr, Scope, TraceError, Tracer};
use subode::structural::{SigmaMatrix, Transversal};

// ---------------------------------------------------------------------
// Expression trees
// ---------------------------------------------------------------------

/// A right-hand-side expression. Arguments of functions with restricted
/// domains are wrapped so that every tree is defined everywhere:
/// `log`, `sqrt`, non-integer and negative powers and division act on
/// `1 + a²`, and `tan` acts on `sin(a)`.
#[derive(Clone, Debug)]
pub enum Tree {
    X(usize),
    T,
    C(f64),
    Add(Box<Tree>, Box<Tree>),
    Sub(Box<Tree>, Box<Tree>),
    Mul(Box<Tree>, Box<Tree>),
    /// `a / (1 + b²)`
    Div(Box<Tree>, Box<Tree>),
    Neg(Box<Tree>),
    Exp(Box<Tree>),
    /// `log(1 + a²)`
    Log(Box<Tree>),
    /// `sqrt(1 + a²)`
    Sqrt(Box<Tree>),
    Sin(Box<Tree>),
    Cos(Box<Tree>),
    /// `tan(sin(a))`
    Tan(Box<Tree>),
    Atan(Box<Tree>),
    /// `a^n`, `n >= 0`
    PowI(Box<Tree>, i32),
    /// `(1 + a²)^n`, `n < 0`
    PowNeg(Box<Tree>, i32),
    /// `(1 + a²)^c`, `c` not an integer
    PowF(Box<Tree>, f64),
}

const FRACTIONAL_EXPONENTS: [f64; 5] = [0.5, 1.5, -0.5, 2.5, 1.0 / 3.0];

pub fn random_tree(rng: &mut impl Rng, depth: usize, n_state: usize, allow_t: bool) -> Tree {
    use Tree::*;
    let leaf = |rng: &mut dyn rand::RngCore| -> Tree {
        let r: f64 = rng.gen();
        if allow_t && r < 0.1 {
            T
        } else if r < 0.25 {
            C((rng.gen_range(-20..=20) as f64) / 8.0)
        } else {
            X(rng.gen_range(0..n_state))
        }
    };
    if depth == 0 || rng.gen_bool(0.2) {
        return leaf(rng);
    }
    let sub = |rng: &mut _| Box::new(random_tree(rng, depth - 1, n_state, allow_t));
    match rng.gen_range(0..17) {
        0 => Add(sub(rng), sub(rng)),
        1 => Sub(sub(rng), sub(rng)),
        2 | 3 => Mul(sub(rng), sub(rng)),
        4 => Div(sub(rng), sub(rng)),
        5 => Neg(sub(rng)),
        6 => Exp(sub(rng)),
        7 => Log(sub(rng)),
        8 => Sqrt(sub(rng)),
        9 => Sin(sub(rng)),
        10 => Cos(sub(rng)),
        11 => Tan(sub(rng)),
        12 => Atan(sub(rng)),
        13 => PowI(sub(rng), rng.gen_range(0..=5)),
        14 => PowNeg(sub(rng), rng.gen_range(-3..=-1)),
        15 => PowF(sub(rng), FRACTIONAL_EXPONENTS[rng.gen_range(0..FRACTIONAL_EXPONENTS.len())]),
        _ => Add(sub(rng), leaf(rng).into()),
    }
}

/// A random ODE: `n_state` trees plus initial values in `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct RandomOde {
    pub f: Vec<Tree>,
    pub ics: Vec<f64>,
    pub t0: f64,
}

pub fn random_ode(seed: u64, max_depth: usize, max_states: usize) -> RandomOde {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_states);
    let depth = rng.gen_range(1..=max_depth);
    let f = (0..n).map(|_| random_tree(&mut rng, depth, n, true)).collect();
    let ics = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let t0 = rng.gen_range(-1.0..1.0);
    RandomOde { f, ics, t0 }
}

impl RandomOde {
    pub fn trace(&self) -> Result<CodeList, TraceError> {
        self.trace_with(Tracer::new(self.f.len()))
    }

    pub fn trace_with(&self, tracer: Tracer) -> Result<CodeList, TraceError> {
        tracer.trace(|s| self.f.iter().map(|t| to_expr(t, s)).collect())
    }
}

fn one_plus_sq_expr(a: &Expr) -> Expr {
    1.0 + a * a
}

pub fn to_expr(t: &Tree, s: &Scope) -> Expr {
    use Tree::*;
    let e = |t: &Tree| to_expr(t, s);
    match t {
        X(i) => s.x(*i),
        T => s.t(),
        C(c) => s.constant(*c),
        Add(a, b) => e(a) + e(b),
        Sub(a, b) => e(a) - e(b),
        Mul(a, b) => e(a) * e(b),
        Div(a, b) => e(a) / one_plus_sq_expr(&e(b)),
        Neg(a) => -e(a),
        Exp(a) => e(a).exp(),
        Log(a) => one_plus_sq_expr(&e(a)).ln(),
        Sqrt(a) => one_plus_sq_expr(&e(a)).sqrt(),
        Sin(a) => e(a).sin(),
        Cos(a) => e(a).cos(),
        Tan(a) => e(a).sin().tan(),
        Atan(a) => e(a).atan(),
        PowI(a, n) => e(a).powi(*n),
        PowNeg(a, n) => one_plus_sq_expr(&e(a)).powi(*n),
        PowF(a, c) => one_plus_sq_expr(&e(a)).powf(*c),
    }
}

pub fn eval_f64(t: &Tree, x: &[f64], time: f64) -> f64 {
    use Tree::*;
    let e = |t: &Tree| eval_f64(t, x, time);
    match t {
        X(i) => x[*i],
        T => time,
        C(c) => *c,
        Add(a, b) => e(a) + e(b),
        Sub(a, b) => e(a) - e(b),
        Mul(a, b) => e(a) * e(b),
        Div(a, b) => e(a) / (1.0 + e(b).powi(2)),
        Neg(a) => -e(a),
        Exp(a) => e(a).exp(),
        Log(a) => (1.0 + e(a).powi(2)).ln(),
        Sqrt(a) => (1.0 + e(a).powi(2)).sqrt(),
        Sin(a) => e(a).sin(),
        Cos(a) => e(a).cos(),
        Tan(a) => e(a).sin().tan(),
        Atan(a) => e(a).atan(),
        PowI(a, n) => e(a).powi(*n),
        PowNeg(a, n) => (1.0 + e(a).powi(2)).powi(*n),
        PowF(a, c) => (1.0 + e(a).powi(2)).powf(*c),
    }
}

/// Number of nodes.
pub fn tree_size(t: &Tree) -> usize {
    use Tree::*;
    match t {
        X(_) | T | C(_) => 1,
        Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => 1 + tree_size(a) + tree_size(b),
        Neg(a) | Exp(a) | Log(a) | Sqrt(a) | Sin(a) | Cos(a) | Tan(a) | Atan(a) => {
            1 + tree_size(a)
        }
        PowI(a, _) | PowNeg(a, _) | PowF(a, _) => 1 + tree_size(a),
    }
}

// ---------------------------------------------------------------------
// Series oracle
// ---------------------------------------------------------------------

/// A truncated power series `c_0 + c_1 s + ... + c_p s^p`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series(pub Vec<f64>);

impl Series {
    pub fn constant(v: f64, p: usize) -> Self {
        let mut c = vec![0.0; p + 1];
        c[0] = v;
        Series(c)
    }

    pub fn p(&self) -> usize {
        self.0.len() - 1
    }

    pub fn add(&self, o: &Series) -> Series {
        Series(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &Series) -> Series {
        Series(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: f64) -> Series {
        Series(self.0.iter().map(|a| a * k).collect())
    }

    pub fn mul(&self, o: &Series) -> Series {
        let p = self.p();
        let mut c = vec![0.0; p + 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate().take(p + 1 - i) {
                c[i + j] += a * b;
            }
        }
        Series(c)
    }

    /// `f(self)` where `derivs[m] = f^{(m)}(c_0)`: the Taylor polynomial
    /// of `f` about `c_0` composed with the non-constant part.
    pub fn compose(&self, derivs: &[f64]) -> Series {
        let p = self.p();
        assert!(derivs.len() > p);
        let mut tail = self.clone();
        tail.0[0] = 0.0;
        let mut out = Series::constant(derivs[0], p);
        let mut power = Series::constant(1.0, p);
        let mut fact = 1.0;
        for (m, dm) in derivs.iter().enumerate().take(p + 1).skip(1) {
            power = power.mul(&tail);
            fact *= m as f64;
            out = out.add(&power.scale(dm / fact));
        }
        out
    }

    /// `∫_0^s`, shifting into order `k + 1` and dropping the top order.
    pub fn integrate(&self, c0: f64) -> Series {
        let p = self.p();
        let mut c = vec![0.0; p + 1];
        c[0] = c0;
        for k in 1..=p {
            c[k] = self.0[k - 1] / k as f64;
        }
        Series(c)
    }
}

/// Derivatives `f^{(m)}(a)` for `m = 0..=p` of the elementary functions.
pub mod derivs {
    use super::FRAC_PI_2;

    pub fn exp(a: f64, p: usize) -> Vec<f64> {
        vec![a.exp(); p + 1]
    }

    pub fn ln(a: f64, p: usize) -> Vec<f64> {
        // (ln)^{(m)}(a) = (-1)^{m-1} (m-1)! / a^m
        let mut d = vec![a.ln()];
        let mut fact = 1.0;
        for m in 1..=p {
            if m > 1 {
                fact *= (m - 1) as f64;
            }
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign * fact / a.powi(m as i32));
        }
        d
    }

    pub fn sin(a: f64, p: usize) -> Vec<f64> {
        (0..=p).map(|m| (a + m as f64 * FRAC_PI_2).sin()).collect()
    }

    pub fn cos(a: f64, p: usize) -> Vec<f64> {
        (0..=p).map(|m| (a + m as f64 * FRAC_PI_2).cos()).collect()
    }

    /// `d^m/da^m a^c = c (c-1) ... (c-m+1) a^{c-m}`.
    pub fn pow(a: f64, c: f64, p: usize) -> Vec<f64> {
        let mut d = Vec::with_capacity(p + 1);
        let mut falling = 1.0;
        for m in 0..=p {
            d.push(falling * a.powf(c - m as f64));
            falling *= c - m as f64;
        }
        d
    }

    /// `atan^{(m)}(a) = (-1)^{m-1} (m-1)! sin(m (π/2 - atan a)) / (1+a²)^{m/2}`.
    pub fn atan(a: f64, p: usize) -> Vec<f64> {
        let theta = FRAC_PI_2 - a.atan();
        let r = (1.0 + a * a).sqrt();
        let mut d = vec![a.atan()];
        let mut fact = 1.0;
        for m in 1..=p {
            if m > 1 {
                fact *= (m - 1) as f64;
            }
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign * fact * (m as f64 * theta).sin() / r.powi(m as i32));
        }
        d
    }

    /// Derivatives of `tan` from the polynomial recursion `P_{m+1} =
    /// (1 + y²) P_m'(y)` with `y = tan a`.
    pub fn tan(a: f64, p: usize) -> Vec<f64> {
        let y = a.tan();
        // Coefficients of P_m in powers of y.
        let mut poly = vec![0.0, 1.0];
        let mut d = Vec::with_capacity(p + 1);
        for _ in 0..=p {
            d.push(poly.iter().rev().fold(0.0, |acc, c| acc * y + c));
            let deriv: Vec<f64> = (1..poly.len()).map(|i| i as f64 * poly[i]).collect();
            let mut next = vec![0.0; deriv.len() + 2];
            for (i, c) in deriv.iter().enumerate() {
                next[i] += c;
                next[i + 2] += c;
            }
            poly = next;
        }
        d
    }
}

fn one_plus_sq(a: &Series) -> Series {
    Series::constant(1.0, a.p()).add(&a.mul(a))
}

pub fn to_series(t: &Tree, x: &[Series], time: &Series) -> Series {
    use Tree::*;
    let p = time.p();
    let e = |t: &Tree| to_series(t, x, time);
    match t {
        X(i) => x[*i].clone(),
        T => time.clone(),
        C(c) => Series::constant(*c, p),
        Add(a, b) => e(a).add(&e(b)),
        Sub(a, b) => e(a).sub(&e(b)),
        Mul(a, b) => e(a).mul(&e(b)),
        Div(a, b) => {
            let den = one_plus_sq(&e(b));
            e(a).mul(&den.compose(&derivs::pow(den.0[0], -1.0, p)))
        }
        Neg(a) => e(a).scale(-1.0),
        Exp(a) => {
            let s = e(a);
            s.compose(&derivs::exp(s.0[0], p))
        }
        Log(a) => {
            let s = one_plus_sq(&e(a));
            s.compose(&derivs::ln(s.0[0], p))
        }
        Sqrt(a) => {
            let s = one_plus_sq(&e(a));
            s.compose(&derivs::pow(s.0[0], 0.5, p))
        }
        Sin(a) => {
            let s = e(a);
            s.compose(&derivs::sin(s.0[0], p))
        }
        Cos(a) => {
            let s = e(a);
            s.compose(&derivs::cos(s.0[0], p))
        }
        Tan(a) => {
            let s = e(a);
            let s = s.compose(&derivs::sin(s.0[0], p));
            s.compose(&derivs::tan(s.0[0], p))
        }
        Atan(a) => {
            let s = e(a);
            s.compose(&derivs::atan(s.0[0], p))
        }
        PowI(a, n) => {
            let s = e(a);
            (0..*n).fold(Series::constant(1.0, p), |acc, _| acc.mul(&s))
        }
        PowNeg(a, n) => {
            let s = one_plus_sq(&e(a));
            s.compose(&derivs::pow(s.0[0], *n as f64, p))
        }
        PowF(a, c) => {
            let s = one_plus_sq(&e(a));
            s.compose(&derivs::pow(s.0[0], *c, p))
        }
    }
}

/// Taylor coefficients of the solution of `x' = f(t, x)`, `x(t0) = ics`,
/// through order `p`, by `p + 1` Picard iterations on truncated series.
pub fn picard(f: &[Tree], ics: &[f64], t0: f64, p: usize) -> Vec<Series> {
    let mut time = Series::constant(t0, p);
    if p >= 1 {
        time.0[1] = 1.0;
    }
    let mut x: Vec<Series> = ics.iter().map(|&v| Series::constant(v, p)).collect();
    for _ in 0..=p {
        x = f
            .iter()
            .zip(ics)
            .map(|(fi, &x0)| to_series(fi, &x, &time).integrate(x0))
            .collect();
    }
    x
}

/// Largest coefficientwise error of `got` against `want`, relative to the
/// largest magnitude in `want` (at least 1).
pub fn series_rel_err(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    got.iter()
        .zip(want)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------
// Signature-matrix oracles
// ---------------------------------------------------------------------

/// Random `n × n` signature matrix with entries in `{−∞, 0, 1, 2}`.
pub fn random_sigma(rng: &mut impl Rng, n: usize, p_neg_inf: f64) -> SigmaMatrix {
    let rows: Vec<Vec<Option<i64>>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    if rng.gen_bool(p_neg_inf) {
                        None
                    } else {
                        Some(rng.gen_range(0..=2))
                    }
                })
                .collect()
        })
        .collect();
    SigmaMatrix::from_rows(&rows)
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Highest transversal value and the set of transversals attaining it, by
/// trying every permutation.
pub fn brute_force_hvts(s: &SigmaMatrix) -> (Option<i64>, Vec<Vec<usize>>) {
    let mut best: Option<i64> = None;
    let mut all = Vec::new();
    for perm in permutations(s.n()) {
        let v: Option<i64> = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| s.get(i, j))
            .sum();
        let Some(v) = v else { continue };
        match best {
            Some(b) if v < b => {}
            Some(b) if v == b => all.push(perm),
            _ => {
                best = Some(v);
                all = vec![perm];
            }
        }
    }
    all.sort();
    (best, all)
}

pub fn transversal_cols(ts: &[Transversal]) -> Vec<Vec<usize>> {
    let mut v: Vec<Vec<usize>> = ts.iter().map(|t| t.cols.clone()).collect();
    v.sort();
    v
}

/// Smallest normalised valid offsets, by longest paths.
///
/// For a highest-value transversal `T`, valid offsets are exactly the
/// solutions of `d_j − c_i ≥ σ_ij` with equality on `T`. Substituting
/// `d_{T(i)} = c_i + σ_{i,T(i)}` leaves `c_k ≥ c_i + σ_{i,j} − σ_{k,j}`
/// for `k = T⁻¹(j)`: a longest-path problem from the zero vector, solved
/// here by Bellman–Ford relaxation.
pub fn bellman_ford_offsets(s: &SigmaMatrix, t: &[usize]) -> (Vec<i64>, Vec<i64>) {
    let n = s.n();
    let mut row_of = vec![0; n];
    for (i, &j) in t.iter().enumerate() {
        row_of[j] = i;
    }
    let mut c = vec![0i64; n];
    for _ in 0..=n {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if let Some(v) = s.get(i, j) {
                    let k = row_of[j];
                    let w = v - s.get(k, j).expect("transversal entry is finite");
                    if c[i] + w > c[k] {
                        c[k] = c[i] + w;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let d = (0..n)
        .map(|j| {
            let k = row_of[j];
            c[k] + s.get(k, j).unwrap()
        })
        .collect();
    (c, d)
}

// ---------------------------------------------------------------------
// Spring-pendulum golden listing
// ---------------------------------------------------------------------

/// The published spring-pendulum code list, one row per line:
/// (kind, op, mode, r1, r2, imm).
pub const GOLDEN_SPRING: [(&str, &str, &str, Option<&str>, Option<&str>, Option<f64>); 23] = [
    ("ODE", "", "R", Some("2"), None, None),
    ("ODE", "", "R", Some("18"), None, None),
    ("ODE", "", "R", Some("4"), None, None),
    ("ODE", "", "R", Some("23"), None, None),
    ("ALG", "sub", "RI", Some("1"), None, Some(1.0)),
    ("ALG", "mul", "RR", Some("1"), Some("4"), None),
    ("ALG", "mul", "RR", Some("6"), Some("4"), None),
    ("SUB", "cs", "RR", Some("10"), Some("3"), None),
    ("SUB", "", "RR", Some("8"), Some("3"), None),
    ("ALG", "sub", "IR", None, Some("9"), Some(0.0)),
    ("ALG", "mul", "IR", None, Some("8"), Some(9.81)),
    ("ALG", "add", "RR", Some("7"), Some("11"), None),
    ("ALG", "add", "RI", Some("5"), None, Some(1.0)),
    ("ALG", "sub", "IR", None, Some("5"), Some(0.0)),
    ("SUB", "exp", "RR", Some("15"), Some("14"), None),
    ("ALG", "sub", "RR", Some("13"), Some("15"), None),
    ("ALG", "mul", "IR", None, Some("16"), Some(40.0)),
    ("ALG", "sub", "RR", Some("12"), Some("17"), None),
    ("ALG", "mul", "IR", None, Some("2"), Some(-2.0)),
    ("ALG", "mul", "RR", Some("19"), Some("4"), None),
    ("ALG", "mul", "IR", None, Some("9"), Some(9.81)),
    ("ALG", "sub", "RR", Some("20"), Some("21"), None),
    ("ALG", "div", "RR", Some("22"), Some("1"), None),
];

/// Differences between `cl` and [`GOLDEN_SPRING`], one message per line.
pub fn golden_spring_mismatches(cl: &CodeList) -> Vec<String> {
    let recs = cl.dump_records();
    if recs.len() != GOLDEN_SPRING.len() {
        return vec![format!("{} lines, expected {}", recs.len(), GOLDEN_SPRING.len())];
    }
    recs.iter()
        .zip(GOLDEN_SPRING.iter())
        .filter_map(|(rec, want)| {
            let got = (
                rec.kind,
                rec.op.as_str(),
                rec.mode.as_str(),
                rec.r1.as_deref(),
                rec.r2.as_deref(),
                rec.imm,
            );
            (got != *want).then(|| format!("line {}: got {got:?}, expected {want:?}", rec.line))
        })
        .collect()
}
