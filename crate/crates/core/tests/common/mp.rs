//! A multiprecision variant of the composition oracle. High-order Taylor
//! coefficients obtained by composing through point derivatives suffer
//! heavy cancellation, which in `f64` can cost more digits than the kernel
//! itself loses; carrying 256 bits makes the oracle's own error negligible.

use std::cell::RefCell;

use astro_float::{BigFloat, Consts, RoundingMode};

use super::Tree;

const PREC: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CC: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

fn with_cc<R>(f: impl FnOnce(&mut Consts) -> R) -> R {
    CC.with(|c| f(&mut c.borrow_mut()))
}

#[derive(Clone, Debug)]
pub struct Mp(pub BigFloat);

impl Mp {
    pub fn f(v: f64) -> Self {
        Mp(BigFloat::from_f64(v, PREC))
    }

    pub fn int(v: i64) -> Self {
        Mp(BigFloat::from_i64(v, PREC))
    }

    pub fn add(&self, o: &Mp) -> Mp {
        Mp(self.0.add(&o.0, PREC, RM))
    }

    pub fn sub(&self, o: &Mp) -> Mp {
        Mp(self.0.sub(&o.0, PREC, RM))
    }

    pub fn mul(&self, o: &Mp) -> Mp {
        Mp(self.0.mul(&o.0, PREC, RM))
    }

    pub fn div(&self, o: &Mp) -> Mp {
        Mp(self.0.div(&o.0, PREC, RM))
    }

    pub fn neg(&self) -> Mp {
        Mp(self.0.neg())
    }

    pub fn exp(&self) -> Mp {
        Mp(with_cc(|cc| self.0.exp(PREC, RM, cc)))
    }

    pub fn ln(&self) -> Mp {
        Mp(with_cc(|cc| self.0.ln(PREC, RM, cc)))
    }

    pub fn sin(&self) -> Mp {
        Mp(with_cc(|cc| self.0.sin(PREC, RM, cc)))
    }

    pub fn cos(&self) -> Mp {
        Mp(with_cc(|cc| self.0.cos(PREC, RM, cc)))
    }

    pub fn tan(&self) -> Mp {
        Mp(with_cc(|cc| self.0.tan(PREC, RM, cc)))
    }

    pub fn atan(&self) -> Mp {
        Mp(with_cc(|cc| self.0.atan(PREC, RM, cc)))
    }

    /// `self^c` for `self > 0`. `BigFloat::pow` does not terminate when the
    /// result is exactly representable (e.g. `1.5625^0.5`), so it is
    /// avoided.
    pub fn powf(&self, c: f64) -> Mp {
        if c == 0.5 {
            return Mp(self.0.sqrt(PREC, RM));
        }
        if c.fract() == 0.0 {
            let r = (0..c.abs() as i64).fold(Mp::int(1), |acc, _| acc.mul(self));
            return if c < 0.0 { Mp::int(1).div(&r) } else { r };
        }
        self.ln().mul(&Mp::f(c)).exp()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_string().parse().expect("decimal rendering parses as f64")
    }
}

/// Truncated power series with multiprecision coefficients.
#[derive(Clone, Debug)]
pub struct MpSeries(pub Vec<Mp>);

impl MpSeries {
    fn constant(v: Mp, len: usize) -> Self {
        let mut c = vec![Mp::int(0); len];
        c[0] = v;
        MpSeries(c)
    }

    fn len(&self) -> usize {
        self.0.len()
    }

    fn add(&self, o: &Self) -> Self {
        MpSeries(self.0.iter().zip(&o.0).map(|(a, b)| a.add(b)).collect())
    }

    fn sub(&self, o: &Self) -> Self {
        MpSeries(self.0.iter().zip(&o.0).map(|(a, b)| a.sub(b)).collect())
    }

    fn neg(&self) -> Self {
        MpSeries(self.0.iter().map(Mp::neg).collect())
    }

    fn mul(&self, o: &Self) -> Self {
        let n = self.len();
        MpSeries(
            (0..n)
                .map(|k| {
                    (0..=k).fold(Mp::int(0), |acc, i| acc.add(&self.0[i].mul(&o.0[k - i])))
                })
                .collect(),
        )
    }

    /// `Σ_j d_j (self − self_0)^j` where `d_j` are the Taylor coefficients
    /// of the outer function at `self_0`.
    fn compose(&self, d: &[Mp]) -> Self {
        let n = self.len();
        let mut shift = self.clone();
        shift.0[0] = Mp::int(0);
        let mut out = MpSeries::constant(d[0].clone(), n);
        let mut pw = MpSeries::constant(Mp::int(1), n);
        for dj in d.iter().take(n).skip(1) {
            pw = pw.mul(&shift);
            for (o, q) in out.0.iter_mut().zip(&pw.0) {
                *o = o.add(&dj.mul(q));
            }
        }
        out
    }

    fn one_plus_sq(&self) -> Self {
        let mut s = self.mul(self);
        s.0[0] = s.0[0].add(&Mp::int(1));
        s
    }

    /// Antiderivative with constant term `c0`, one order longer.
    fn integrate(&self, c0: f64) -> Self {
        let mut c = vec![Mp::f(c0)];
        c.extend(self.0.iter().enumerate().map(|(k, v)| v.div(&Mp::int(k as i64 + 1))));
        MpSeries(c)
    }
}

/// Taylor coefficients at `a` of the outer functions, through order `p`.
mod point {
    use super::Mp;

    fn factorials(p: usize) -> Vec<Mp> {
        let mut f = vec![Mp::int(1)];
        for j in 1..=p {
            let next = f[j - 1].mul(&Mp::int(j as i64));
            f.push(next);
        }
        f
    }

    pub fn exp(a: &Mp, p: usize) -> Vec<Mp> {
        let e = a.exp();
        factorials(p).iter().map(|f| e.div(f)).collect()
    }

    pub fn ln(a: &Mp, p: usize) -> Vec<Mp> {
        let mut d = vec![a.ln()];
        let mut apow = Mp::int(1);
        for j in 1..=p {
            apow = apow.mul(a);
            let sign = if j % 2 == 1 { 1 } else { -1 };
            d.push(Mp::int(sign).div(&Mp::int(j as i64).mul(&apow)));
        }
        d
    }

    fn cyclic(vals: [Mp; 4], p: usize) -> Vec<Mp> {
        factorials(p)
            .iter()
            .enumerate()
            .map(|(j, f)| vals[j % 4].div(f))
            .collect()
    }

    pub fn sin(a: &Mp, p: usize) -> Vec<Mp> {
        let (s, c) = (a.sin(), a.cos());
        cyclic([s.clone(), c.clone(), s.neg(), c.neg()], p)
    }

    pub fn cos(a: &Mp, p: usize) -> Vec<Mp> {
        let (s, c) = (a.sin(), a.cos());
        cyclic([c.clone(), s.neg(), c.neg(), s], p)
    }

    /// `(a + s)^c = a^c Σ binom(c, j) (s / a)^j`, `a > 0`.
    pub fn pow(a: &Mp, c: f64, p: usize) -> Vec<Mp> {
        let mut d = vec![a.powf(c)];
        let cm = Mp::f(c);
        for j in 1..=p {
            let k = cm.sub(&Mp::int(j as i64 - 1)).div(&Mp::int(j as i64).mul(a));
            let next = d[j - 1].mul(&k);
            d.push(next);
        }
        d
    }

    /// `atan(a + s)`: integrate the series of `1 / (1 + (a + s)²)`.
    pub fn atan(a: &Mp, p: usize) -> Vec<Mp> {
        // q · (b0 + b1 s + s²) = 1 with b0 = 1 + a², b1 = 2a.
        let b0 = Mp::int(1).add(&a.mul(a));
        let b1 = Mp::int(2).mul(a);
        let mut q: Vec<Mp> = Vec::with_capacity(p);
        for k in 0..p {
            let mut r = if k == 0 { Mp::int(1) } else { Mp::int(0) };
            if k >= 1 {
                r = r.sub(&b1.mul(&q[k - 1]));
            }
            if k >= 2 {
                r = r.sub(&q[k - 2]);
            }
            q.push(r.div(&b0));
        }
        let mut d = vec![a.atan()];
        d.extend(q.iter().enumerate().map(|(k, v)| v.div(&Mp::int(k as i64 + 1))));
        d
    }

    /// `tan(a + s)` from `T' = 1 + T²`.
    pub fn tan(a: &Mp, p: usize) -> Vec<Mp> {
        let mut t = vec![a.tan()];
        for k in 0..p {
            let mut s = if k == 0 { Mp::int(1) } else { Mp::int(0) };
            for i in 0..=k {
                s = s.add(&t[i].mul(&t[k - i]));
            }
            t.push(s.div(&Mp::int(k as i64 + 1)));
        }
        t
    }
}

fn eval(t: &Tree, x: &[MpSeries], time: &MpSeries) -> MpSeries {
    use Tree::*;
    let n = time.len();
    let p = n - 1;
    let e = |t: &Tree| eval(t, x, time);
    match t {
        X(i) => x[*i].clone(),
        T => time.clone(),
        C(c) => MpSeries::constant(Mp::f(*c), n),
        Add(a, b) => e(a).add(&e(b)),
        Sub(a, b) => e(a).sub(&e(b)),
        Mul(a, b) => e(a).mul(&e(b)),
        Div(a, b) => {
            let den = e(b).one_plus_sq();
            e(a).mul(&den.compose(&point::pow(&den.0[0], -1.0, p)))
        }
        Neg(a) => e(a).neg(),
        Exp(a) => {
            let s = e(a);
            s.compose(&point::exp(&s.0[0], p))
        }
        Log(a) => {
            let s = e(a).one_plus_sq();
            s.compose(&point::ln(&s.0[0], p))
        }
        Sqrt(a) => {
            let s = e(a).one_plus_sq();
            s.compose(&point::pow(&s.0[0], 0.5, p))
        }
        Sin(a) => {
            let s = e(a);
            s.compose(&point::sin(&s.0[0], p))
        }
        Cos(a) => {
            let s = e(a);
            s.compose(&point::cos(&s.0[0], p))
        }
        Tan(a) => {
            let s = e(a);
            let s = s.compose(&point::sin(&s.0[0], p));
            s.compose(&point::tan(&s.0[0], p))
        }
        Atan(a) => {
            let s = e(a);
            s.compose(&point::atan(&s.0[0], p))
        }
        PowI(a, k) => {
            let s = e(a);
            (0..*k).fold(MpSeries::constant(Mp::int(1), n), |acc, _| acc.mul(&s))
        }
        PowNeg(a, k) => {
            let s = e(a).one_plus_sq();
            s.compose(&point::pow(&s.0[0], *k as f64, p))
        }
        PowF(a, c) => {
            let s = e(a).one_plus_sq();
            s.compose(&point::pow(&s.0[0], *c, p))
        }
    }
}

/// Taylor coefficients through order `p` of the solution of
/// `x' = f(t, x)`, `x(t0) = ics`, rounded to `f64`. Picard iteration `m`
/// fixes order `m`, so it works on series of length `m` only.
pub fn picard_mp(f: &[Tree], ics: &[f64], t0: f64, p: usize) -> Vec<Vec<f64>> {
    let mut x: Vec<MpSeries> = ics.iter().map(|&v| MpSeries(vec![Mp::f(v)])).collect();
    for m in 1..=p {
        let mut time = MpSeries::constant(Mp::f(t0), m);
        if m > 1 {
            time.0[1] = Mp::int(1);
        }
        x = f
            .iter()
            .zip(ics)
            .map(|(fi, &x0)| eval(fi, &x, &time).integrate(x0))
            .collect();
    }
    x.iter()
        .map(|s| s.0.iter().map(Mp::to_f64).collect())
        .collect()
}
