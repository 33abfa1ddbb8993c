use std::fmt::Write;

use serde::Serialize;

use super::line::{ClLine, Operand};
use super::CodeList;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DumpRecord {
    pub line: usize,
    pub kind: &'static str,
    pub op: String,
    pub mode: String,
    pub r1: Option<String>,
    pub r2: Option<String>,
    pub imm: Option<f64>,
    /// Names of parameters the immediate depends on.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<String>,
}

fn ref_col(o: &Option<Operand>) -> Option<String> {
    match o {
        Some(Operand::Ref(l)) => Some(l.to_string()),
        Some(Operand::Time) => Some("t".to_string()),
        _ => None,
    }
}

fn record(cl: &CodeList, i: usize, l: &ClLine) -> DumpRecord {
    let imm = l.imm();
    let params = imm
        .and_then(|i| i.param)
        .map(|p| {
            cl.params()
                .dependencies(p)
                .into_iter()
                .map(|s| cl.params().slots()[s].name.clone())
                .collect()
        })
        .unwrap_or_default();
    DumpRecord {
        line: i + 1,
        kind: l.kind().as_str(),
        op: l.op_name().to_string(),
        mode: l.mode(),
        r1: ref_col(&l.operands[0]),
        r2: ref_col(&l.operands[1]),
        imm: imm.map(|i| i.value),
        params,
    }
}

pub(super) fn records(cl: &CodeList) -> Vec<DumpRecord> {
    cl.lines()
        .iter()
        .enumerate()
        .map(|(i, l)| record(cl, i, l))
        .collect()
}

pub(super) fn table(cl: &CodeList) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:>5} {:<4} {:<5} {:<4} {:>5} {:>5} {}",
        "Line", "Kind", "Op", "Mode", "R1", "R2", "Imm"
    )
    .unwrap();
    for r in records(cl) {
        writeln!(
            out,
            "{:>5} {:<4} {:<5} {:<4} {:>5} {:>5} {}",
            r.line,
            r.kind,
            r.op,
            r.mode,
            r.r1.unwrap_or_default(),
            r.r2.unwrap_or_default(),
            r.imm.map(|v| v.to_string()).unwrap_or_default()
        )
        .unwrap();
    }
    out
}
