use std::fmt::Write;

use super::offsets::Offsets;

/// Stand-in for −∞: far below any reachable sum, so saturating sums of a
/// few entries stay recognisably negative-infinite.
pub const NEG_INF: i64 = i64::MIN / 4;

/// Signature matrix: `σ_ij` is the highest derivative order of `x_j` in
/// equation `i`, or −∞ if `x_j` does not occur.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SigmaMatrix {
    n: usize,
    e: Vec<i64>,
}

impl SigmaMatrix {
    /// All entries −∞.
    pub fn empty(n: usize) -> Self {
        SigmaMatrix {
            n,
            e: vec![NEG_INF; n * n],
        }
    }

    /// From rows where `None` means −∞.
    pub fn from_rows(rows: &[Vec<Option<i64>>]) -> Self {
        let n = rows.len();
        let mut s = SigmaMatrix::empty(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "signature matrix must be square");
            for (j, v) in r.iter().enumerate() {
                s.set(i, j, *v);
            }
        }
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Option<i64> {
        let v = self.e[i * self.n + j];
        (v > NEG_INF).then_some(v)
    }

    /// Raw entry, with −∞ as [`NEG_INF`].
    pub fn raw(&self, i: usize, j: usize) -> i64 {
        self.e[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Option<i64>) {
        if let Some(v) = v {
            assert!(v >= 0, "signature entries are non-negative or -inf");
        }
        self.e[i * self.n + j] = v.unwrap_or(NEG_INF);
    }

    /// Raises entry `(i, j)` to at least `v`.
    pub fn raise(&mut self, i: usize, j: usize, v: i64) {
        let e = &mut self.e[i * self.n + j];
        *e = (*e).max(v);
    }

    pub fn rows(&self) -> Vec<Vec<Option<i64>>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Finite entries of row `i` as `(j, σ_ij)`.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        (0..self.n).filter_map(move |j| self.get(i, j).map(|v| (j, v)))
    }

    /// Reorders rows and columns: new row `a` is old row `rows[a]`, new
    /// column `b` is old column `cols[b]`.
    pub fn permuted(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut s = SigmaMatrix::empty(self.n);
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                s.set(a, b, self.get(i, j));
            }
        }
        s
    }

    /// Text rendering with `-` for −∞, row offsets `c` in a right margin
    /// and column offsets `d` along the bottom.
    pub fn render(&self, offsets: Option<&Offsets>, labels: Option<&[String]>) -> String {
        let cell = |v: Option<i64>| v.map_or("-".to_string(), |v| v.to_string());
        let mut w = 3;
        if let Some(l) = labels {
            w = w.max(l.iter().map(|s| s.len() + 1).max().unwrap_or(0));
        }
        let mut out = String::new();
        if let Some(l) = labels {
            for s in l {
                write!(out, "{s:>w$}").unwrap();
            }
            out.push('\n');
        }
        for i in 0..self.n {
            for j in 0..self.n {
                write!(out, "{:>w$}", cell(self.get(i, j))).unwrap();
            }
            if let Some(o) = offsets {
                write!(out, "  | c={}", o.c[i]).unwrap();
            }
            out.push('\n');
        }
        if let Some(o) = offsets {
            for d in &o.d {
                write!(out, "{d:>w$}").unwrap();
            }
            out.push_str("  = d\n");
        }
        out
    }
}

/// A transversal: row `i` is matched to column `cols[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transversal {
    pub cols: Vec<usize>,
}

impl Transversal {
    pub fn diagonal(n: usize) -> Self {
        Transversal {
            cols: (0..n).collect(),
        }
    }

    /// Sum of σ over the positions, `None` if any position is −∞.
    pub fn value(&self, s: &SigmaMatrix) -> Option<i64> {
        self.cols
            .iter()
            .enumerate()
            .map(|(i, &j)| s.get(i, j))
            .sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.cols.iter().enumerate().all(|(i, &j)| i == j)
    }
}
