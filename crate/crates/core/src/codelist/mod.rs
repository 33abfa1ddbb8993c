//! Code lists: straight-line programs in single-assignment form that
//! describe an ODE right-hand side line by line.
//!
//! Lines `1..=n` are ODE lines (one per state). Every other line is either
//! an arithmetic (ALG) line or one component of a sub-ODE (SUB) block that
//! defines a standard function through its own small ODE.

mod builder;
mod dump;
mod line;
mod param;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

pub use builder::{
    dedup_key, trace, DedupIndex, DedupKey, Expr, KeyOp, KeyOperand, Scope, TraceError, Tracer,
};
pub use dump::DumpRecord;
pub use line::{AlgOp, ClLine, Imm, Kind, LineId, Op, Operand};
pub use param::{ParamExpr, ParamExprId, ParamSlot, ParamTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodeListError {
    #[error("line {line}: operand refers to line {target}, which is not available yet")]
    UnsoundReference { line: LineId, target: LineId },
    #[error("line {line}: operand refers to nonexistent line {target}")]
    DanglingReference { line: LineId, target: usize },
    #[error("line {line}: missing operand")]
    MissingOperand { line: LineId },
    #[error("line {line}: malformed sub-ODE block")]
    MalformedBlock { line: LineId },
    #[error("ODE lines must be exactly lines 1..={n_state}")]
    OdeSection { n_state: usize },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("setting `{name}` = {value} puts a base function outside its domain")]
    ParamDomain { name: String, value: f64 },
}

/// A traced right-hand side `x' = f(t, x)`.
#[derive(Clone, Debug)]
pub struct CodeList {
    lines: Vec<ClLine>,
    n_state: usize,
    params: ParamTable,
    dedup: DedupIndex,
}

impl CodeList {
    pub(crate) fn from_parts(
        lines: Vec<ClLine>,
        n_state: usize,
        params: ParamTable,
        dedup: DedupIndex,
    ) -> Result<Self, CodeListError> {
        let cl = CodeList {
            lines,
            n_state,
            params,
            dedup,
        };
        cl.validate()?;
        Ok(cl)
    }

    /// Builds a code list from explicit lines, checking well-formedness.
    pub fn from_lines(n_state: usize, lines: Vec<ClLine>) -> Result<Self, CodeListError> {
        Self::from_parts(lines, n_state, ParamTable::default(), DedupIndex::default())
    }

    /// Builds a code list without any checks. Evaluating a malformed list
    /// is caught at run time by the kernel; this exists to exercise that.
    #[doc(hidden)]
    pub fn from_lines_unchecked(n_state: usize, lines: Vec<ClLine>) -> Self {
        CodeList {
            lines,
            n_state,
            params: ParamTable::default(),
            dedup: DedupIndex::default(),
        }
    }

    pub fn lines(&self) -> &[ClLine] {
        &self.lines
    }

    pub fn line(&self, id: LineId) -> &ClLine {
        &self.lines[id.index()]
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn n_state(&self) -> usize {
        self.n_state
    }

    /// Output operand of state `i` (0-based): `x'_i` is this value.
    pub fn out(&self, i: usize) -> Operand {
        self.lines[i].operands[0].expect("validated ODE line")
    }

    pub fn count(&self, kind: Kind) -> usize {
        self.lines.iter().filter(|l| l.kind() == kind).count()
    }

    pub fn uses_time(&self) -> bool {
        self.lines.iter().any(ClLine::uses_time)
    }

    /// First line of the sub-ODE block containing `id`.
    pub fn block_start(&self, id: LineId) -> LineId {
        let c = self.line(id).sub_component().unwrap_or(0);
        LineId::new(id.get() - c)
    }

    pub fn params(&self) -> &ParamTable {
        &self.params
    }

    pub fn param_value(&self, name: &str) -> Option<f64> {
        self.params.slot_index(name).map(|s| self.params.slots()[s].value)
    }

    /// Looks up a previously emitted expression.
    pub fn lookup(&self, key: &DedupKey) -> Option<LineId> {
        self.dedup.get(key)
    }

    /// Changes a parameter and rewrites every immediate derived from it.
    /// The structure of the list is untouched.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<(), CodeListError> {
        let slot = self
            .params
            .slot_index(name)
            .ok_or_else(|| CodeListError::UnknownParameter(name.to_string()))?;
        self.params
            .set_slot(slot, value)
            .map_err(|_| CodeListError::ParamDomain {
                name: name.to_string(),
                value,
            })?;
        let users: Vec<LineId> = self.params.slots()[slot].lines_using.iter().copied().collect();
        for l in users {
            for o in self.lines[l.index()].operands.iter_mut().flatten() {
                if let Operand::Imm(Imm {
                    value,
                    param: Some(p),
                }) = o
                {
                    *value = self.params.value(*p);
                }
            }
        }
        Ok(())
    }

    /// Hash of everything except immediate values: two lists with equal
    /// structure hashes share a sparsity structure.
    pub fn structure_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.n_state.hash(&mut h);
        for l in &self.lines {
            l.kind().hash(&mut h);
            match &l.op {
                Op::Ode => 0u8.hash(&mut h),
                Op::Alg(a) => a.hash(&mut h),
                Op::SubOde { func, component } => {
                    func.key().hash(&mut h);
                    component.hash(&mut h);
                }
            }
            l.mode().hash(&mut h);
            l.r1().hash(&mut h);
            l.r2().hash(&mut h);
        }
        h.finish()
    }

    /// Checks that the list is well formed and that every algebraic operand
    /// is computed before it is read.
    ///
    /// ODE outputs may refer to any line, since order `q` of an ODE line
    /// only needs order `q-1` of its output. A SUB block's input `u` must
    /// precede the block; its `h` operands may refer to any line because
    /// order `q` of the block only needs orders `< q` of `h`.
    pub fn validate(&self) -> Result<(), CodeListError> {
        let len = self.lines.len();
        let n = self.n_state;
        let ode_ok = self
            .lines
            .iter()
            .enumerate()
            .all(|(i, l)| (l.kind() == Kind::Ode) == (i < n));
        if !ode_ok || len < n {
            return Err(CodeListError::OdeSection { n_state: n });
        }
        let check_ref = |line: LineId, o: &Operand, limit: usize| -> Result<(), CodeListError> {
            if let Operand::Ref(t) = o {
                if t.get() > len {
                    return Err(CodeListError::DanglingReference {
                        line,
                        target: t.get(),
                    });
                }
                if t.get() > limit {
                    return Err(CodeListError::UnsoundReference { line, target: *t });
                }
            }
            Ok(())
        };
        for (i, l) in self.lines.iter().enumerate() {
            let id = LineId::from_index(i);
            match &l.op {
                Op::Ode => {
                    let o = l.operands[0].ok_or(CodeListError::MissingOperand { line: id })?;
                    check_ref(id, &o, len)?;
                }
                Op::Alg(_) => {
                    for o in &l.operands {
                        let o = o.ok_or(CodeListError::MissingOperand { line: id })?;
                        check_ref(id, &o, i)?;
                    }
                }
                Op::SubOde { func, component } => {
                    let bad = CodeListError::MalformedBlock { line: id };
                    if *component >= func.dim() || i < *component {
                        return Err(bad);
                    }
                    let start = i - component;
                    let head = &self.lines[start];
                    let same_block = match &head.op {
                        Op::SubOde {
                            func: f0,
                            component: 0,
                        } => Arc::ptr_eq(f0, func) || f0.key() == func.key(),
                        _ => false,
                    };
                    if !same_block || head.operands[1] != l.operands[1] {
                        return Err(bad);
                    }
                    if *component == 0 {
                        let end = start + func.dim();
                        if end > len
                            || (1..func.dim()).any(|c| {
                                self.lines[start + c].sub_component() != Some(c)
                            })
                        {
                            return Err(bad);
                        }
                    }
                    let h = l.operands[0].ok_or(CodeListError::MissingOperand { line: id })?;
                    check_ref(id, &h, len)?;
                    let u = l.operands[1].ok_or(CodeListError::MissingOperand { line: id })?;
                    check_ref(id, &u, start)?;
                }
            }
        }
        Ok(())
    }

    /// Human-readable table with columns Line, Kind, Op, Mode, R1, R2, Imm.
    pub fn dump(&self) -> String {
        dump::table(self)
    }

    /// One record per line, for machine consumption.
    pub fn dump_records(&self) -> Vec<DumpRecord> {
        dump::records(self)
    }

    /// JSON-lines rendering of [`dump_records`](Self::dump_records).
    pub fn dump_jsonl(&self) -> String {
        dump::records(self)
            .iter()
            .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
            .collect()
    }
}
