//! Expression tracing: user code written against [`Expr`] with ordinary
//! operators emits code-list lines as it executes.

use std::cell::RefCell;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::rc::Rc;
use std::sync::Arc;

use thiserror::Error;

use super::line::{AlgOp, ClLine, Imm, LineId, Op, Operand};
use super::param::{ParamExpr, ParamExprId, ParamTable};
use super::{CodeList, CodeListError};
use crate::stdfuncs::{builtins, HExpr, Registry, SubOdeDef, INTEGER_POWER_CUTOFF};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("unsupported function `{0}`")]
    UnsupportedFunction(String),
    #[error("a parameter cannot be used as a power exponent")]
    UnsupportedParamExponent,
    #[error("a variable cannot be used as a power exponent")]
    UnsupportedVariableExponent,
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{0}` declared twice")]
    DuplicateParameter(String),
    #[error("right-hand side returned {got} components, expected {expected}")]
    OutputCount { expected: usize, got: usize },
    #[error("`{func}` is undefined at constant argument {arg}")]
    BaseFunctionDomain { func: String, arg: f64 },
    #[error("traced code list is malformed: {0}")]
    Malformed(#[from] CodeListError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum KeyOp {
    Alg(AlgOp),
    /// Sub-ODE identified by [`SubOdeDef::key`].
    Func(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum KeyOperand {
    Ref(LineId),
    Const(u64),
    Param(ParamExprId),
    Time,
}

impl KeyOperand {
    pub fn from_operand(o: &Operand) -> Self {
        match o {
            Operand::Ref(l) => KeyOperand::Ref(*l),
            Operand::Imm(Imm { param: Some(p), .. }) => KeyOperand::Param(*p),
            Operand::Imm(Imm { value, param: None }) => KeyOperand::Const(value.to_bits()),
            Operand::Time => KeyOperand::Time,
        }
    }
}

/// Full `(operation, operands)` tuple used to recognise a repeated
/// expression. Operand order matters: `a*b` and `b*a` are distinct.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DedupKey {
    pub op: KeyOp,
    pub operands: Vec<KeyOperand>,
}

impl DedupKey {
    pub fn new(op: KeyOp, operands: Vec<KeyOperand>) -> Self {
        DedupKey { op, operands }
    }

    pub fn hash64(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }
}

/// 64-bit key of an `(operation, operands)` tuple.
pub fn dedup_key(op: &KeyOp, operands: &[KeyOperand]) -> u64 {
    DedupKey::new(op.clone(), operands.to_vec()).hash64()
}

/// Map from hashed keys to lines. Each bucket keeps the full tuples so a
/// hash collision can never merge two different expressions.
#[derive(Clone, Debug, Default)]
pub struct DedupIndex {
    buckets: HashMap<u64, Vec<(DedupKey, LineId)>>,
}

impl DedupIndex {
    pub fn get(&self, key: &DedupKey) -> Option<LineId> {
        self.get_hashed(key.hash64(), key)
    }

    pub fn insert(&mut self, key: DedupKey, line: LineId) {
        self.insert_hashed(key.hash64(), key, line)
    }

    pub(crate) fn get_hashed(&self, hash: u64, key: &DedupKey) -> Option<LineId> {
        self.buckets
            .get(&hash)?
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, l)| *l)
    }

    pub(crate) fn insert_hashed(&mut self, hash: u64, key: DedupKey, line: LineId) {
        self.buckets.entry(hash).or_default().push((key, line));
    }

    pub fn len(&self) -> usize {
        self.buckets.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Node {
    Const(f64),
    Param(ParamExprId),
    Line(LineId),
    Time,
}

pub(crate) struct Builder {
    registry: Arc<Registry>,
    n_state: usize,
    lines: Vec<ClLine>,
    params: ParamTable,
    dedup: DedupIndex,
    dedup_enabled: bool,
    error: Option<TraceError>,
}

impl Builder {
    fn fail(&mut self, e: TraceError) {
        if self.error.is_none() {
            self.error = Some(e);
        }
    }

    fn pexpr(&mut self, n: Node) -> ParamExprId {
        match n {
            Node::Param(p) => p,
            Node::Const(c) => self.params.intern(ParamExpr::Const(c)).expect("constant"),
            _ => unreachable!("not a constant node"),
        }
    }

    fn operand(&self, n: Node) -> Operand {
        match n {
            Node::Const(c) => Operand::Imm(Imm::constant(c)),
            Node::Param(p) => Operand::Imm(Imm {
                value: self.params.value(p),
                param: Some(p),
            }),
            Node::Line(l) => Operand::Ref(l),
            Node::Time => Operand::Time,
        }
    }

    fn note_params(&mut self, line: LineId) {
        let params: Vec<ParamExprId> = self.lines[line.index()]
            .operands
            .iter()
            .flatten()
            .filter_map(|o| o.as_imm().and_then(|i| i.param))
            .collect();
        for p in params {
            for s in self.params.dependencies(p) {
                self.params.slots[s].lines_using.insert(line);
            }
        }
    }

    fn push(&mut self, line: ClLine) -> LineId {
        self.lines.push(line);
        let id = LineId::from_index(self.lines.len() - 1);
        self.note_params(id);
        id
    }

    fn binary(&mut self, op: AlgOp, a: Node, b: Node) -> Node {
        use Node::*;
        match (a, b) {
            (Const(x), Const(y)) => Const(op.apply(x, y)),
            (Const(_) | Param(_), Const(_) | Param(_)) => {
                let (pa, pb) = (self.pexpr(a), self.pexpr(b));
                Param(self.params.intern(ParamExpr::Bin(op, pa, pb)).expect("arithmetic"))
            }
            _ => {
                let operands = [self.operand(a), self.operand(b)];
                Line(self.emit(Op::Alg(op), KeyOp::Alg(op), operands))
            }
        }
    }

    fn emit(&mut self, op: Op, kop: KeyOp, operands: [Operand; 2]) -> LineId {
        let key = DedupKey::new(kop, operands.iter().map(KeyOperand::from_operand).collect());
        if self.dedup_enabled {
            if let Some(l) = self.dedup.get(&key) {
                return l;
            }
        }
        let id = self.push(ClLine {
            op,
            operands: [Some(operands[0]), Some(operands[1])],
        });
        self.dedup.insert(key, id);
        id
    }

    fn neg(&mut self, a: Node) -> Node {
        match a {
            Node::Const(c) => Node::Const(-c),
            Node::Param(p) => Node::Param(self.params.intern(ParamExpr::Neg(p)).expect("negation")),
            _ => self.binary(AlgOp::Sub, Node::Const(0.0), a),
        }
    }

    fn hexpr(&mut self, e: &HExpr, u: Node, v: &[Node]) -> Node {
        match e {
            HExpr::U => u,
            HExpr::V(i) => v[*i],
            HExpr::Const(c) => Node::Const(*c),
            HExpr::Neg(a) => {
                let a = self.hexpr(a, u, v);
                self.neg(a)
            }
            HExpr::Bin(op, a, b) => {
                let a = self.hexpr(a, u, v);
                let b = self.hexpr(b, u, v);
                self.binary(*op, a, b)
            }
        }
    }

    fn apply_def(&mut self, def: &Arc<SubOdeDef>, arg: Node) -> Vec<Node> {
        let m = def.dim();
        match arg {
            Node::Const(c) => match def.eval_base(c) {
                Some(v) => v.into_iter().map(Node::Const).collect(),
                None => {
                    self.fail(TraceError::BaseFunctionDomain {
                        func: def.name().to_string(),
                        arg: c,
                    });
                    vec![Node::Const(f64::NAN); m]
                }
            },
            Node::Param(p) => (0..m)
                .map(|component| {
                    let e = ParamExpr::Func {
                        func: def.clone(),
                        component,
                        arg: p,
                    };
                    match self.params.intern(e) {
                        Some(id) => Node::Param(id),
                        None => {
                            let arg = self.params.value(p);
                            self.fail(TraceError::BaseFunctionDomain {
                                func: def.name().to_string(),
                                arg,
                            });
                            Node::Const(f64::NAN)
                        }
                    }
                })
                .collect(),
            Node::Line(_) | Node::Time => {
                let u = self.operand(arg);
                let key = DedupKey::new(
                    KeyOp::Func(def.key().to_string()),
                    vec![KeyOperand::from_operand(&u)],
                );
                if self.dedup_enabled {
                    if let Some(head) = self.dedup.get(&key) {
                        return (0..m).map(|c| Node::Line(LineId::new(head.get() + c))).collect();
                    }
                }
                let head = LineId::from_index(self.lines.len());
                for component in 0..m {
                    self.lines.push(ClLine {
                        op: Op::SubOde {
                            func: def.clone(),
                            component,
                        },
                        operands: [None, Some(u)],
                    });
                }
                let v: Vec<Node> = (0..m).map(|c| Node::Line(LineId::new(head.get() + c))).collect();
                for (c, h) in def.h().iter().enumerate() {
                    let hn = self.hexpr(h, arg, &v);
                    let line = LineId::new(head.get() + c);
                    self.lines[line.index()].operands[0] = Some(self.operand(hn));
                    self.note_params(line);
                }
                self.dedup.insert(key, head);
                v
            }
        }
    }

    fn call(&mut self, name: &str, arg: Node) -> Vec<Node> {
        match self.registry.resolve(name) {
            Some((def, c)) => {
                let all = self.apply_def(&def, arg);
                if self.registry.get(name).is_some() {
                    all
                } else {
                    vec![all[c]]
                }
            }
            None => {
                self.fail(TraceError::UnsupportedFunction(name.to_string()));
                vec![Node::Const(f64::NAN)]
            }
        }
    }

    /// Integer exponents become a square-and-multiply chain; anything else
    /// uses the `u^c` sub-ODE.
    fn power(&mut self, u: Node, c: f64) -> Node {
        if c.fract() == 0.0 && c.abs() <= INTEGER_POWER_CUTOFF {
            let n = c.abs() as u64;
            if n == 0 {
                return Node::Const(1.0);
            }
            let mut acc = u;
            for bit in (0..(63 - n.leading_zeros())).rev() {
                acc = self.binary(AlgOp::Mul, acc, acc);
                if (n >> bit) & 1 == 1 {
                    acc = self.binary(AlgOp::Mul, acc, u);
                }
            }
            if c < 0.0 {
                acc = self.binary(AlgOp::Div, Node::Const(1.0), acc);
            }
            acc
        } else {
            let def = Arc::new(SubOdeDef::power(c));
            self.apply_def(&def, u)[0]
        }
    }
}

type Tape = Rc<RefCell<Builder>>;

/// A traced value. Arithmetic on `Expr` emits code-list lines; constants
/// and parameters fold without emitting anything.
#[derive(Clone)]
pub struct Expr {
    tape: Tape,
    node: Node,
}

impl std::fmt::Debug for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Expr({:?})", self.node)
    }
}

impl Expr {
    fn with(&self, node: Node) -> Expr {
        Expr {
            tape: self.tape.clone(),
            node,
        }
    }

    /// The line this value lives on, if it is a code-list variable.
    pub fn line(&self) -> Option<LineId> {
        match self.node {
            Node::Line(l) => Some(l),
            _ => None,
        }
    }

    /// The folded value, if this is a constant.
    pub fn constant(&self) -> Option<f64> {
        match self.node {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_time(&self) -> bool {
        self.node == Node::Time
    }

    /// Applies a registered function or alias by name. For a vector
    /// function called by its own name this is component 0.
    pub fn call(&self, name: &str) -> Expr {
        let n = self.tape.borrow_mut().call(name, self.node)[0];
        self.with(n)
    }

    /// All components of a registered (possibly vector) function.
    pub fn call_vec(&self, name: &str) -> Vec<Expr> {
        let ns = self.tape.borrow_mut().call(name, self.node);
        ns.into_iter().map(|n| self.with(n)).collect()
    }

    pub fn exp(&self) -> Expr {
        self.call("exp")
    }

    pub fn ln(&self) -> Expr {
        self.call("log")
    }

    pub fn sqrt(&self) -> Expr {
        self.call("sqrt")
    }

    pub fn cos(&self) -> Expr {
        self.call("cos")
    }

    pub fn sin(&self) -> Expr {
        self.call("sin")
    }

    /// `(cos u, sin u)` from a single block.
    pub fn cs(&self) -> (Expr, Expr) {
        let v = self.call_vec("cs");
        (v[0].clone(), v[1].clone())
    }

    pub fn tan(&self) -> Expr {
        self.call("tan")
    }

    pub fn atan(&self) -> Expr {
        self.call("atan")
    }

    pub fn powi(&self, n: i32) -> Expr {
        self.powf(n as f64)
    }

    pub fn powf(&self, c: f64) -> Expr {
        let n = self.tape.borrow_mut().power(self.node, c);
        self.with(n)
    }

    /// Power with a traced exponent. Only constant exponents are supported.
    pub fn pow(&self, exponent: &Expr) -> Expr {
        match exponent.node {
            Node::Const(c) => self.powf(c),
            Node::Param(_) => {
                self.tape.borrow_mut().fail(TraceError::UnsupportedParamExponent);
                self.with(Node::Const(f64::NAN))
            }
            _ => {
                self.tape.borrow_mut().fail(TraceError::UnsupportedVariableExponent);
                self.with(Node::Const(f64::NAN))
            }
        }
    }

    fn bin(&self, op: AlgOp, rhs: Node) -> Expr {
        let n = self.tape.borrow_mut().binary(op, self.node, rhs);
        self.with(n)
    }

    fn bin_rev(&self, op: AlgOp, lhs: Node) -> Expr {
        let n = self.tape.borrow_mut().binary(op, lhs, self.node);
        self.with(n)
    }
}

macro_rules! expr_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                debug_assert!(Rc::ptr_eq(&self.tape, &rhs.tape), "mixing traces");
                self.bin($op, rhs.node)
            }
        }
        impl $trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                self.$method(&rhs)
            }
        }
        impl $trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                (&self).$method(rhs)
            }
        }
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                (&self).$method(&rhs)
            }
        }
        impl $trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                self.bin($op, Node::Const(rhs))
            }
        }
        impl $trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                (&self).$method(rhs)
            }
        }
        impl $trait<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                rhs.bin_rev($op, Node::Const(self))
            }
        }
        impl $trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                self.$method(&rhs)
            }
        }
    };
}

expr_binop!(Add, add, AlgOp::Add);
expr_binop!(Sub, sub, AlgOp::Sub);
expr_binop!(Mul, mul, AlgOp::Mul);
expr_binop!(Div, div, AlgOp::Div);

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        let n = self.tape.borrow_mut().neg(self.node);
        self.with(n)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

/// Handles available inside a traced right-hand side.
pub struct Scope {
    tape: Tape,
}

impl Scope {
    fn expr(&self, node: Node) -> Expr {
        Expr {
            tape: self.tape.clone(),
            node,
        }
    }

    pub fn t(&self) -> Expr {
        self.expr(Node::Time)
    }

    /// State variable `i` (0-based), i.e. line `i + 1`.
    pub fn x(&self, i: usize) -> Expr {
        assert!(i < self.tape.borrow().n_state, "state index {i} out of range");
        self.expr(Node::Line(LineId::from_index(i)))
    }

    pub fn state(&self) -> Vec<Expr> {
        (0..self.tape.borrow().n_state).map(|i| self.x(i)).collect()
    }

    pub fn constant(&self, v: f64) -> Expr {
        self.expr(Node::Const(v))
    }

    /// A declared parameter. Unknown names are reported by `trace`.
    pub fn param(&self, name: &str) -> Expr {
        let slot = self.tape.borrow().params.slot_index(name);
        match slot {
            Some(s) => {
                let id = self.tape.borrow_mut().params.intern(ParamExpr::Slot(s)).expect("slot");
                self.expr(Node::Param(id))
            }
            None => {
                self.tape
                    .borrow_mut()
                    .fail(TraceError::UnknownParameter(name.to_string()));
                self.expr(Node::Const(f64::NAN))
            }
        }
    }
}

/// Configures and runs a trace.
pub struct Tracer {
    registry: Arc<Registry>,
    n_state: usize,
    params: Vec<(String, f64)>,
    dedup: bool,
}

impl Tracer {
    pub fn new(n_state: usize) -> Self {
        Tracer {
            registry: builtins(),
            n_state,
            params: Vec::new(),
            dedup: true,
        }
    }

    pub fn registry(mut self, registry: Arc<Registry>) -> Self {
        self.registry = registry;
        self
    }

    pub fn param(mut self, name: &str, value: f64) -> Self {
        self.params.push((name.to_string(), value));
        self
    }

    pub fn params<'a>(mut self, defs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        for (n, v) in defs {
            self.params.push((n.to_string(), v));
        }
        self
    }

    /// Disabling deduplication is only useful for testing.
    pub fn dedup(mut self, on: bool) -> Self {
        self.dedup = on;
        self
    }

    pub fn trace<F>(self, f: F) -> Result<CodeList, TraceError>
    where
        F: FnOnce(&Scope) -> Vec<Expr>,
    {
        let mut params = ParamTable::default();
        for (name, value) in &self.params {
            if params.add_slot(name, *value).is_none() {
                return Err(TraceError::DuplicateParameter(name.clone()));
            }
        }
        let n = self.n_state;
        let lines = (0..n)
            .map(|_| ClLine {
                op: Op::Ode,
                operands: [None, None],
            })
            .collect();
        let tape = Rc::new(RefCell::new(Builder {
            registry: self.registry,
            n_state: n,
            lines,
            params,
            dedup: DedupIndex::default(),
            dedup_enabled: self.dedup,
            error: None,
        }));
        let scope = Scope { tape: tape.clone() };
        let outputs: Vec<Node> = f(&scope).into_iter().map(|e| e.node).collect();
        drop(scope);

        let mut b = tape.borrow_mut();
        if let Some(e) = b.error.take() {
            return Err(e);
        }
        if outputs.len() != n {
            return Err(TraceError::OutputCount {
                expected: n,
                got: outputs.len(),
            });
        }
        for (i, out) in outputs.into_iter().enumerate() {
            b.lines[i].operands[0] = Some(b.operand(out));
            b.note_params(LineId::from_index(i));
        }
        let cl = CodeList::from_parts(
            std::mem::take(&mut b.lines),
            n,
            std::mem::take(&mut b.params),
            std::mem::take(&mut b.dedup),
        )?;
        Ok(cl)
    }
}

/// Traces `f` for an `n_state`-dimensional ODE with the built-in library.
pub fn trace<F>(n_state: usize, f: F) -> Result<CodeList, TraceError>
where
    F: FnOnce(&Scope) -> Vec<Expr>,
{
    Tracer::new(n_state).trace(f)
}
