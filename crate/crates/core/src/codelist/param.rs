//! Parameters ("variable constants"): scalars that stay fixed during an
//! integration but can be changed between integrations without re-tracing.
//!
//! Constant-only subexpressions that involve a parameter (such as `k/m`)
//! are folded into a small parameter expression rather than a code-list
//! line, so the immediate that carries them can be recomputed in place.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use super::line::{AlgOp, LineId};
use crate::stdfuncs::SubOdeDef;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamExprId(pub(crate) usize);

#[derive(Clone, Debug)]
pub enum ParamExpr {
    Const(f64),
    Slot(usize),
    Neg(ParamExprId),
    Bin(AlgOp, ParamExprId, ParamExprId),
    Func {
        func: Arc<SubOdeDef>,
        component: usize,
        arg: ParamExprId,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum ExprKey {
    Const(u64),
    Slot(usize),
    Neg(ParamExprId),
    Bin(AlgOp, ParamExprId, ParamExprId),
    Func(String, usize, ParamExprId),
}

impl ParamExpr {
    fn key(&self) -> ExprKey {
        match self {
            ParamExpr::Const(c) => ExprKey::Const(c.to_bits()),
            ParamExpr::Slot(s) => ExprKey::Slot(*s),
            ParamExpr::Neg(a) => ExprKey::Neg(*a),
            ParamExpr::Bin(op, a, b) => ExprKey::Bin(*op, *a, *b),
            ParamExpr::Func {
                func,
                component,
                arg,
            } => ExprKey::Func(func.key().to_string(), *component, *arg),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamSlot {
    pub name: String,
    pub value: f64,
    /// Lines whose immediate depends on this slot.
    pub lines_using: BTreeSet<LineId>,
}

#[derive(Clone, Debug, Default)]
pub struct ParamTable {
    pub(crate) slots: Vec<ParamSlot>,
    exprs: Vec<ParamExpr>,
    values: Vec<f64>,
    intern: HashMap<ExprKey, ParamExprId>,
}

impl ParamTable {
    pub(crate) fn add_slot(&mut self, name: &str, value: f64) -> Option<usize> {
        if self.slot_index(name).is_some() {
            return None;
        }
        self.slots.push(ParamSlot {
            name: name.to_string(),
            value,
            lines_using: BTreeSet::new(),
        });
        Some(self.slots.len() - 1)
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }

    pub fn slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    pub fn expr(&self, id: ParamExprId) -> &ParamExpr {
        &self.exprs[id.0]
    }

    pub fn value(&self, id: ParamExprId) -> f64 {
        self.values[id.0]
    }

    /// Interns `expr`, returning the existing id for a structurally equal
    /// expression. Returns `None` if the expression cannot be evaluated at
    /// the current slot values (base-function domain error).
    pub(crate) fn intern(&mut self, expr: ParamExpr) -> Option<ParamExprId> {
        let key = expr.key();
        if let Some(&id) = self.intern.get(&key) {
            return Some(id);
        }
        let value = self.eval_node(&expr)?;
        let id = ParamExprId(self.exprs.len());
        self.exprs.push(expr);
        self.values.push(value);
        self.intern.insert(key, id);
        Some(id)
    }

    fn eval_node(&self, expr: &ParamExpr) -> Option<f64> {
        Some(match expr {
            ParamExpr::Const(c) => *c,
            ParamExpr::Slot(s) => self.slots[*s].value,
            ParamExpr::Neg(a) => -self.values[a.0],
            ParamExpr::Bin(op, a, b) => op.apply(self.values[a.0], self.values[b.0]),
            ParamExpr::Func {
                func,
                component,
                arg,
            } => func.eval_base(self.values[arg.0])?[*component],
        })
    }

    /// Slots that `id` depends on.
    pub fn dependencies(&self, id: ParamExprId) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![id];
        while let Some(e) = stack.pop() {
            match &self.exprs[e.0] {
                ParamExpr::Const(_) => {}
                ParamExpr::Slot(s) => {
                    out.insert(*s);
                }
                ParamExpr::Neg(a) => stack.push(*a),
                ParamExpr::Bin(_, a, b) => {
                    stack.push(*a);
                    stack.push(*b);
                }
                ParamExpr::Func { arg, .. } => stack.push(*arg),
            }
        }
        out
    }

    /// Sets a slot and re-evaluates every expression. Expressions are stored
    /// in creation order, which is a topological order. On a domain error
    /// the table is left unchanged.
    pub(crate) fn set_slot(&mut self, slot: usize, value: f64) -> Result<(), usize> {
        let old = self.slots[slot].value;
        self.slots[slot].value = value;
        let mut values: Vec<f64> = Vec::with_capacity(self.exprs.len());
        for (i, e) in self.exprs.iter().enumerate() {
            // eval_node reads self.values, so evaluate against the new prefix.
            let v = match e {
                ParamExpr::Const(c) => Some(*c),
                ParamExpr::Slot(s) => Some(self.slots[*s].value),
                ParamExpr::Neg(a) => Some(-values[a.0]),
                ParamExpr::Bin(op, a, b) => Some(op.apply(values[a.0], values[b.0])),
                ParamExpr::Func {
                    func,
                    component,
                    arg,
                } => func.eval_base(values[arg.0]).map(|v| v[*component]),
            };
            match v {
                Some(v) => values.push(v),
                None => {
                    self.slots[slot].value = old;
                    return Err(i);
                }
            }
        }
        self.values = values;
        Ok(())
    }
}
