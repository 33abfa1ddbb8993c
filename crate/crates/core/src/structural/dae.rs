//! The DAE induced by a code list.
//!
//! Every code-list variable becomes a DAE unknown. ODE line `i` gives the
//! row `ẋ_i - x_out(i) = 0`; an ALG line `x_j = φ(a, b)` gives
//! `x_j - φ(a, b) = 0`; component `c` of a sub-ODE block gives
//! `v̇_c - h_c(u, v) u̇ = 0`; and the time alias gives `x_t - t = 0`.
//! Columns are ordered states, then `t`, then the remaining lines.

use crate::codelist::{AlgOp, CodeList, LineId, Op, Operand};
use crate::kernel::{run_codelist, KernelError};

use super::offsets::Offsets;
use super::sigma::SigmaMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Ode,
    Sub,
    Ordinary,
}

/// A scalar factor of a partial derivative, evaluated at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Factor {
    Const(f64),
    /// Value of an operand.
    Value(Operand),
    /// First time derivative of an operand.
    Deriv(Operand),
    /// `1 / b`.
    Recip(Operand),
    /// `a / b²`.
    QuotientOverDivisor(Operand, Operand),
}

/// `∂f_row / ∂ x_col^(order)`, as a sum of signed factors.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub col: usize,
    pub order: i64,
    pub partial: Vec<(f64, Factor)>,
}

#[derive(Clone, Debug)]
pub struct DaeRow {
    pub kind: RowKind,
    /// Code-list line of this row; `None` for the time alias.
    pub line: Option<LineId>,
    pub terms: Vec<Term>,
}

impl DaeRow {
    fn add(&mut self, col: usize, order: i64, sign: f64, f: Factor) {
        match self.terms.iter_mut().find(|t| t.col == col && t.order == order) {
            Some(t) => t.partial.push((sign, f)),
            None => self.terms.push(Term {
                col,
                order,
                partial: vec![(sign, f)],
            }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DaeView {
    n_state: usize,
    time_col: Option<usize>,
    rows: Vec<DaeRow>,
}

/// DAE view including the time-alias row.
pub fn dae_view(cl: &CodeList) -> DaeView {
    DaeView::build(cl, true)
}

/// DAE view that omits the time-alias row when `t` is not used.
pub fn dae_view_compact(cl: &CodeList) -> DaeView {
    DaeView::build(cl, cl.uses_time())
}

impl DaeView {
    fn build(cl: &CodeList, with_time: bool) -> Self {
        let n = cl.n_state();
        let time_col = with_time.then_some(n);
        let shift = usize::from(with_time);
        let col_of_line = |l: LineId| {
            if l.get() <= n {
                l.index()
            } else {
                l.index() + shift
            }
        };
        let col_of = |o: &Operand| match o {
            Operand::Ref(l) => Some(col_of_line(*l)),
            Operand::Time => time_col,
            Operand::Imm(_) => None,
        };
        let mut rows: Vec<DaeRow> = Vec::with_capacity(cl.len() + shift);
        for (idx, l) in cl.lines().iter().enumerate() {
            let id = LineId::new(idx + 1);
            let own = col_of_line(id);
            let mut row = DaeRow {
                kind: RowKind::Ordinary,
                line: Some(id),
                terms: Vec::new(),
            };
            match &l.op {
                Op::Ode => {
                    row.kind = RowKind::Ode;
                    row.add(own, 1, 1.0, Factor::Const(1.0));
                    let out = l.operands[0].expect("ODE output");
                    if let Some(c) = col_of(&out) {
                        row.add(c, 0, -1.0, Factor::Const(1.0));
                    }
                }
                Op::Alg(op) => {
                    row.add(own, 0, 1.0, Factor::Const(1.0));
                    let a = l.operands[0].expect("left operand");
                    let b = l.operands[1].expect("right operand");
                    // Partials of φ(a, b); the row is x - φ.
                    let (da, db) = match op {
                        AlgOp::Add => ((1.0, Factor::Const(1.0)), (1.0, Factor::Const(1.0))),
                        AlgOp::Sub => ((1.0, Factor::Const(1.0)), (-1.0, Factor::Const(1.0))),
                        AlgOp::Mul => ((1.0, Factor::Value(b)), (1.0, Factor::Value(a))),
                        AlgOp::Div => (
                            (1.0, Factor::Recip(b)),
                            (-1.0, Factor::QuotientOverDivisor(a, b)),
                        ),
                    };
                    if let Some(c) = col_of(&a) {
                        row.add(c, 0, -da.0, da.1);
                    }
                    if let Some(c) = col_of(&b) {
                        row.add(c, 0, -db.0, db.1);
                    }
                }
                Op::SubOde { .. } => {
                    row.kind = RowKind::Sub;
                    let h = l.operands[0].expect("h operand");
                    let u = l.operands[1].expect("u operand");
                    row.add(own, 1, 1.0, Factor::Const(1.0));
                    if let Some(c) = col_of(&u) {
                        row.add(c, 1, -1.0, Factor::Value(h));
                    }
                    if let Some(c) = col_of(&h) {
                        row.add(c, 0, -1.0, Factor::Deriv(u));
                    }
                }
            }
            rows.push(row);
            if idx + 1 == n && with_time {
                rows.push(DaeRow {
                    kind: RowKind::Ordinary,
                    line: None,
                    terms: vec![Term {
                        col: n,
                        order: 0,
                        partial: vec![(1.0, Factor::Const(1.0))],
                    }],
                });
            }
        }
        DaeView {
            n_state: n,
            time_col,
            rows,
        }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn n_state(&self) -> usize {
        self.n_state
    }

    pub fn time_col(&self) -> Option<usize> {
        self.time_col
    }

    pub fn rows(&self) -> &[DaeRow] {
        &self.rows
    }

    /// Column labels: `x1..xn`, `t`, then `x{line}` for the other lines.
    pub fn labels(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| match r.line {
                Some(l) => format!("x{l}"),
                None => "t".to_string(),
            })
            .collect()
    }

    pub fn sigma(&self) -> SigmaMatrix {
        let mut s = SigmaMatrix::empty(self.size());
        for (i, r) in self.rows.iter().enumerate() {
            for t in &r.terms {
                s.raise(i, t.col, t.order);
            }
        }
        s
    }

    /// Offsets read off the row kinds: `d = 1` everywhere, `c = 0` on ODE
    /// and sub-ODE rows and `c = 1` on ordinary rows.
    pub fn codelist_offsets(&self) -> Offsets {
        Offsets {
            c: self
                .rows
                .iter()
                .map(|r| i64::from(r.kind == RowKind::Ordinary))
                .collect(),
            d: vec![1; self.size()],
        }
    }

    /// Values and first derivatives of every DAE unknown on the solution
    /// through `(t0, ics)`.
    pub fn point(&self, cl: &CodeList, ics: &[f64], t0: f64) -> Result<DaePoint, KernelError> {
        let series = run_codelist(cl, ics, t0, 1)?;
        let mut value = vec![0.0; self.size()];
        let mut deriv = vec![0.0; self.size()];
        for (i, r) in self.rows.iter().enumerate() {
            match r.line {
                Some(l) => {
                    value[i] = series[l.index()].c[0];
                    deriv[i] = series[l.index()].c[1];
                }
                None => {
                    value[i] = t0;
                    deriv[i] = 1.0;
                }
            }
        }
        Ok(DaePoint {
            value,
            deriv,
            time_col: self.time_col,
            t0,
            n_state: self.n_state,
        })
    }
}

/// Values and first derivatives of the DAE unknowns at one point.
#[derive(Clone, Debug)]
pub struct DaePoint {
    pub value: Vec<f64>,
    pub deriv: Vec<f64>,
    time_col: Option<usize>,
    t0: f64,
    n_state: usize,
}

impl DaePoint {
    fn col(&self, l: LineId) -> usize {
        if l.get() <= self.n_state {
            l.index()
        } else {
            l.index() + usize::from(self.time_col.is_some())
        }
    }

    fn operand(&self, o: &Operand) -> (f64, f64) {
        match o {
            Operand::Ref(l) => {
                let c = self.col(*l);
                (self.value[c], self.deriv[c])
            }
            Operand::Imm(i) => (i.value, 0.0),
            Operand::Time => (self.t0, 1.0),
        }
    }

    pub fn factor(&self, f: &Factor) -> f64 {
        match f {
            Factor::Const(c) => *c,
            Factor::Value(o) => self.operand(o).0,
            Factor::Deriv(o) => self.operand(o).1,
            Factor::Recip(b) => 1.0 / self.operand(b).0,
            Factor::QuotientOverDivisor(a, b) => {
                let b = self.operand(b).0;
                self.operand(a).0 / (b * b)
            }
        }
    }

    pub fn partial(&self, t: &Term) -> f64 {
        t.partial.iter().map(|(s, f)| s * self.factor(f)).sum()
    }
}
