use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::param::ParamExprId;
use crate::stdfuncs::SubOdeDef;

/// A 1-based code-list line number. Line `i` assigns variable `x_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct LineId(usize);

impl LineId {
    pub fn new(one_based: usize) -> Self {
        assert!(one_based > 0, "line numbers are 1-based");
        LineId(one_based)
    }

    pub(crate) fn from_index(index: usize) -> Self {
        LineId(index + 1)
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// 0-based position in the line vector.
    pub fn index(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Ode,
    Alg,
    Sub,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Ode => "ODE",
            Kind::Alg => "ALG",
            Kind::Sub => "SUB",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AlgOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl AlgOp {
    pub fn as_str(self) -> &'static str {
        match self {
            AlgOp::Add => "add",
            AlgOp::Sub => "sub",
            AlgOp::Mul => "mul",
            AlgOp::Div => "div",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            AlgOp::Add => a + b,
            AlgOp::Sub => a - b,
            AlgOp::Mul => a * b,
            AlgOp::Div => a / b,
        }
    }
}

/// A scalar immediate. When `param` is set the value is derived from
/// parameter slots and is rewritten by [`CodeList::set_param`](super::CodeList::set_param).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Imm {
    pub value: f64,
    pub param: Option<ParamExprId>,
}

impl Imm {
    pub fn constant(value: f64) -> Self {
        Imm { value, param: None }
    }
}

/// How an instruction obtains one operand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Operand {
    /// Reference to the variable assigned by another line.
    Ref(LineId),
    Imm(Imm),
    /// The independent variable `t` (logically `x_{n+1}`).
    Time,
}

impl Operand {
    pub fn mode_char(&self) -> char {
        match self {
            Operand::Ref(_) => 'R',
            Operand::Imm(_) => 'I',
            Operand::Time => 'T',
        }
    }

    pub fn as_ref(&self) -> Option<LineId> {
        match self {
            Operand::Ref(l) => Some(*l),
            _ => None,
        }
    }

    pub fn as_imm(&self) -> Option<Imm> {
        match self {
            Operand::Imm(i) => Some(*i),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Op {
    /// `x'_i = x_out(i)`; the single operand is the output.
    Ode,
    Alg(AlgOp),
    /// Component `component` of a sub-ODE block. Operand slot 0 holds the
    /// matching component of `h(u, v)`, slot 1 holds the input `u`.
    SubOde {
        func: Arc<SubOdeDef>,
        component: usize,
    },
}

/// One code-list instruction.
///
/// Operand slots follow the R1/R2 column convention: for ALG lines they
/// are the left and right operands, for ODE lines slot 0 is the output
/// reference, for SUB lines slot 0 is the `h` component and slot 1 is `u`.
#[derive(Clone, Debug)]
pub struct ClLine {
    pub op: Op,
    pub operands: [Option<Operand>; 2],
}

impl ClLine {
    pub fn kind(&self) -> Kind {
        match self.op {
            Op::Ode => Kind::Ode,
            Op::Alg(_) => Kind::Alg,
            Op::SubOde { .. } => Kind::Sub,
        }
    }

    /// Operation name as shown in the Op column: blank for ODE lines and
    /// for the non-head lines of a sub-ODE block.
    pub fn op_name(&self) -> &str {
        match &self.op {
            Op::Ode => "",
            Op::Alg(a) => a.as_str(),
            Op::SubOde { func, component } => {
                if *component == 0 {
                    func.name()
                } else {
                    ""
                }
            }
        }
    }

    pub fn mode(&self) -> String {
        self.operands
            .iter()
            .flatten()
            .map(Operand::mode_char)
            .collect()
    }

    pub fn r1(&self) -> Option<LineId> {
        self.operands[0].and_then(|o| o.as_ref())
    }

    pub fn r2(&self) -> Option<LineId> {
        self.operands[1].and_then(|o| o.as_ref())
    }

    /// The immediate operand, if any. At most one slot of a line is ever
    /// immediate since constant-only subexpressions are folded.
    pub fn imm(&self) -> Option<Imm> {
        self.operands.iter().flatten().find_map(|o| o.as_imm())
    }

    pub fn uses_time(&self) -> bool {
        self.operands.iter().flatten().any(|o| matches!(o, Operand::Time))
    }

    /// Component index within a sub-ODE block, for SUB lines.
    pub fn sub_component(&self) -> Option<usize> {
        match self.op {
            Op::SubOde { component, .. } => Some(component),
            _ => None,
        }
    }
}
