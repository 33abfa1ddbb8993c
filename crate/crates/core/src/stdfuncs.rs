//! Standard functions as sub-ODEs.
//!
//! A standard function `v = g(u)` enters the library as the ODE it obeys,
//! `dv/du = h(u, v)`, where `h` uses only the four arithmetic operations,
//! together with its base function `γ` (the ordinary numeric routine) that
//! supplies the value at order zero.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::codelist::AlgOp;

/// Integer exponents up to this magnitude are lowered to multiplications.
pub const INTEGER_POWER_CUTOFF: f64 = 2147483648.0; // 2^31

pub type BaseFn = Arc<dyn Fn(f64) -> Option<Vec<f64>> + Send + Sync>;

/// Arithmetic template for `h(u, v)`.
#[derive(Clone, Debug, PartialEq)]
pub enum HExpr {
    U,
    V(usize),
    Const(f64),
    Neg(Box<HExpr>),
    Bin(AlgOp, Box<HExpr>, Box<HExpr>),
}

impl HExpr {
    pub fn u() -> Self {
        HExpr::U
    }

    pub fn v(i: usize) -> Self {
        HExpr::V(i)
    }

    pub fn eval(&self, u: f64, v: &[f64]) -> f64 {
        match self {
            HExpr::U => u,
            HExpr::V(i) => v[*i],
            HExpr::Const(c) => *c,
            HExpr::Neg(a) => -a.eval(u, v),
            HExpr::Bin(op, a, b) => op.apply(a.eval(u, v), b.eval(u, v)),
        }
    }

    fn max_v(&self) -> Option<usize> {
        match self {
            HExpr::U | HExpr::Const(_) => None,
            HExpr::V(i) => Some(*i),
            HExpr::Neg(a) => a.max_v(),
            HExpr::Bin(_, a, b) => a.max_v().max(b.max_v()),
        }
    }
}

macro_rules! hexpr_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl $trait for HExpr {
            type Output = HExpr;
            fn $method(self, rhs: HExpr) -> HExpr {
                HExpr::Bin($op, Box::new(self), Box::new(rhs))
            }
        }
        impl $trait<f64> for HExpr {
            type Output = HExpr;
            fn $method(self, rhs: f64) -> HExpr {
                HExpr::Bin($op, Box::new(self), Box::new(HExpr::Const(rhs)))
            }
        }
        impl $trait<HExpr> for f64 {
            type Output = HExpr;
            fn $method(self, rhs: HExpr) -> HExpr {
                HExpr::Bin($op, Box::new(HExpr::Const(self)), Box::new(rhs))
            }
        }
    };
}

hexpr_binop!(Add, add, AlgOp::Add);
hexpr_binop!(Sub, sub, AlgOp::Sub);
hexpr_binop!(Mul, mul, AlgOp::Mul);
hexpr_binop!(Div, div, AlgOp::Div);

impl Neg for HExpr {
    type Output = HExpr;
    fn neg(self) -> HExpr {
        HExpr::Neg(Box::new(self))
    }
}

/// A registered standard function.
pub struct SubOdeDef {
    name: String,
    key: String,
    base: BaseFn,
    h: Vec<HExpr>,
    samples: Vec<f64>,
}

impl fmt::Debug for SubOdeDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubOdeDef")
            .field("name", &self.name)
            .field("key", &self.key)
            .field("h", &self.h)
            .finish()
    }
}

impl SubOdeDef {
    /// `h` has one template per output component; `samples` are the fixed
    /// points used by the registration self-test.
    pub fn new(
        name: &str,
        base: impl Fn(f64) -> Option<Vec<f64>> + Send + Sync + 'static,
        h: Vec<HExpr>,
        samples: &[f64],
    ) -> Self {
        SubOdeDef {
            name: name.to_string(),
            key: name.to_string(),
            base: Arc::new(base),
            h,
            samples: samples.to_vec(),
        }
    }

    /// `v = u^c` for constant `c`, with `h(u, v) = c v / u`.
    pub fn power(c: f64) -> Self {
        let mut def = SubOdeDef::new(
            "pow",
            move |u: f64| {
                if u < 0.0 && c.fract() != 0.0 {
                    return None;
                }
                let v = u.powf(c);
                v.is_finite().then(|| vec![v])
            },
            vec![c * HExpr::v(0) / HExpr::u()],
            &[0.25, 0.5, 1.0, 2.0, 5.0],
        );
        def.key = format!("pow:{:016x}", c.to_bits());
        def
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Identity used for deduplication; distinguishes members of a family
    /// such as `pow` with different exponents.
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn h(&self) -> &[HExpr] {
        &self.h
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// The base function γ; `None` outside its domain.
    pub fn eval_base(&self, u: f64) -> Option<Vec<f64>> {
        (self.base)(u).filter(|v| v.len() == self.dim() && v.iter().all(|x| x.is_finite()))
    }

    pub fn eval_h(&self, u: f64, v: &[f64]) -> Vec<f64> {
        self.h.iter().map(|e| e.eval(u, v)).collect()
    }

    /// Checks `γ'(u) = h(u, γ(u))` at the sample points, with `γ'` by
    /// central differences.
    pub fn self_test(&self) -> Result<(), RegistryError> {
        for &u in &self.samples {
            let v = self.eval_base(u).ok_or_else(|| RegistryError::Inconsistent {
                name: self.name.clone(),
                u,
                detail: "base function undefined at sample point".into(),
            })?;
            let step = 1e-5 * u.abs().max(1.0);
            let (lo, hi) = match (self.eval_base(u - step), self.eval_base(u + step)) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => {
                    return Err(RegistryError::Inconsistent {
                        name: self.name.clone(),
                        u,
                        detail: "base function undefined near sample point".into(),
                    })
                }
            };
            let h = self.eval_h(u, &v);
            for c in 0..self.dim() {
                let fd = (hi[c] - lo[c]) / (2.0 * step);
                if (fd - h[c]).abs() > 1e-6 * (1.0 + fd.abs()) {
                    return Err(RegistryError::Inconsistent {
                        name: self.name.clone(),
                        u,
                        detail: format!("component {c}: dγ/du ≈ {fd}, h = {}", h[c]),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RegistryError {
    #[error("function `{0}` is already registered")]
    Duplicate(String),
    #[error("function `{name}`: bad dimension ({detail})")]
    BadDimension { name: String, detail: String },
    #[error("function `{name}` fails its self-test at u = {u}: {detail}")]
    Inconsistent { name: String, u: f64, detail: String },
}

/// Set of sub-ODE definitions plus user-facing aliases that select one
/// component of a vector function (`cos` is component 0 of `cs`).
#[derive(Debug, Default)]
pub struct Registry {
    defs: HashMap<String, Arc<SubOdeDef>>,
    aliases: HashMap<String, (String, usize)>,
}

impl Registry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn register(&mut self, def: SubOdeDef) -> Result<Arc<SubOdeDef>, RegistryError> {
        if self.defs.contains_key(def.name()) || self.aliases.contains_key(def.name()) {
            return Err(RegistryError::Duplicate(def.name().to_string()));
        }
        if def.dim() == 0 {
            return Err(RegistryError::BadDimension {
                name: def.name().to_string(),
                detail: "m must be at least 1".into(),
            });
        }
        if let Some(i) = def.h.iter().filter_map(HExpr::max_v).max() {
            if i >= def.dim() {
                return Err(RegistryError::BadDimension {
                    name: def.name().to_string(),
                    detail: format!("h references v[{i}] but m = {}", def.dim()),
                });
            }
        }
        def.self_test()?;
        let def = Arc::new(def);
        self.defs.insert(def.name().to_string(), def.clone());
        Ok(def)
    }

    pub fn alias(&mut self, alias: &str, target: &str, component: usize) -> Result<(), RegistryError> {
        if self.defs.contains_key(alias) || self.aliases.contains_key(alias) {
            return Err(RegistryError::Duplicate(alias.to_string()));
        }
        match self.defs.get(target) {
            Some(d) if component < d.dim() => {
                self.aliases.insert(alias.to_string(), (target.to_string(), component));
                Ok(())
            }
            _ => Err(RegistryError::BadDimension {
                name: alias.to_string(),
                detail: format!("no component {component} of `{target}`"),
            }),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Arc<SubOdeDef>> {
        self.defs.get(name)
    }

    /// Resolves a function name or alias to a definition and component.
    pub fn resolve(&self, name: &str) -> Option<(Arc<SubOdeDef>, usize)> {
        if let Some(d) = self.defs.get(name) {
            return Some((d.clone(), 0));
        }
        let (target, c) = self.aliases.get(name)?;
        Some((self.defs[target].clone(), *c))
    }

    pub fn names(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.defs.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }
}

/// The built-in library: exp, log, sqrt, cs (with cos/sin aliases), tan,
/// atan. Powers `u^c` are created on demand by [`SubOdeDef::power`].
pub fn builtin_library() -> Registry {
    let mut r = Registry::empty();
    let defs = [
        SubOdeDef::new(
            "exp",
            |u: f64| Some(vec![u.exp()]),
            vec![HExpr::v(0)],
            &[-2.0, -0.5, 0.0, 0.7, 2.0],
        ),
        SubOdeDef::new(
            "log",
            |u: f64| (u > 0.0).then(|| vec![u.ln()]),
            vec![1.0 / HExpr::u()],
            &[0.1, 0.5, 1.0, 2.0, 10.0],
        ),
        SubOdeDef::new(
            "sqrt",
            |u: f64| (u >= 0.0).then(|| vec![u.sqrt()]),
            vec![0.5 * HExpr::v(0) / HExpr::u()],
            &[0.1, 0.5, 1.0, 2.0, 9.0],
        ),
        SubOdeDef::new(
            "cs",
            |u: f64| Some(vec![u.cos(), u.sin()]),
            vec![-HExpr::v(1), HExpr::v(0)],
            &[-2.0, -0.3, 0.0, 1.0, 3.0],
        ),
        SubOdeDef::new(
            "tan",
            |u: f64| (u.cos() != 0.0).then(|| vec![u.tan()]),
            vec![1.0 + HExpr::v(0) * HExpr::v(0)],
            &[-1.2, -0.4, 0.0, 0.5, 1.2],
        ),
        SubOdeDef::new(
            "atan",
            |u: f64| Some(vec![u.atan()]),
            vec![1.0 / (1.0 + HExpr::u() * HExpr::u())],
            &[-3.0, -0.5, 0.0, 0.8, 4.0],
        ),
    ];
    for d in defs {
        r.register(d).expect("builtin sub-ODE failed its self-test");
    }
    r.alias("cos", "cs", 0).unwrap();
    r.alias("sin", "cs", 1).unwrap();
    r
}

/// Shared instance of [`builtin_library`].
pub fn builtins() -> Arc<Registry> {
    static LIB: OnceLock<Arc<Registry>> = OnceLock::new();
    LIB.get_or_init(|| Arc::new(builtin_library())).clone()
}
