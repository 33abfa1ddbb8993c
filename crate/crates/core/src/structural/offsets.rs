use super::assignment::hvt;
use super::sigma::SigmaMatrix;
use super::StructuralError;

/// Row offsets `c` (equations) and column offsets `d` (variables).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Offsets {
    pub c: Vec<i64>,
    pub d: Vec<i64>,
}

impl Offsets {
    /// Positions where `d_j - c_i < σ_ij`.
    pub fn violations(&self, s: &SigmaMatrix) -> Vec<(usize, usize)> {
        let n = s.n();
        let mut v = Vec::new();
        for i in 0..n {
            for (j, sij) in s.row_entries(i) {
                if self.d[j] - self.c[i] < sij {
                    v.push((i, j));
                }
            }
        }
        v
    }

    /// `d_j - c_i >= σ_ij` everywhere.
    pub fn is_weakly_valid(&self, s: &SigmaMatrix) -> bool {
        self.violations(s).is_empty()
    }

    /// Non-negative with `min c = 0`.
    pub fn is_normalised(&self) -> bool {
        self.c.iter().chain(&self.d).all(|&x| x >= 0) && self.c.iter().min() == Some(&0)
    }

    /// Whether `d_j - c_i = σ_ij` at `(i, j)`.
    pub fn is_tight(&self, s: &SigmaMatrix, i: usize, j: usize) -> bool {
        s.get(i, j) == Some(self.d[j] - self.c[i])
    }

    /// Weakly valid with equality on some transversal. Equivalent to the
    /// tight positions containing a perfect matching.
    pub fn is_valid(&self, s: &SigmaMatrix) -> bool {
        if !self.is_weakly_valid(s) {
            return false;
        }
        let mut mask = SigmaMatrix::empty(s.n());
        for i in 0..s.n() {
            for j in 0..s.n() {
                if self.is_tight(s, i, j) {
                    mask.set(i, j, Some(0));
                }
            }
        }
        hvt(&mask).is_ok()
    }

    /// `Σ d_j - Σ c_i`, which equals `Val(Σ)` for valid offsets.
    pub fn value(&self) -> i64 {
        self.d.iter().sum::<i64>() - self.c.iter().sum::<i64>()
    }
}

/// The elementwise smallest normalised valid offsets.
///
/// Starting from `c = 0`, alternate `d_j = max_i(σ_ij + c_i)` and
/// `c_i = d_{T(i)} - σ_{i,T(i)}` on a highest-value transversal `T` until
/// nothing changes.
pub fn canonical_offsets(s: &SigmaMatrix) -> Result<Offsets, StructuralError> {
    let n = s.n();
    let (t, _) = hvt(s)?;
    let mut c = vec![0i64; n];
    let mut d = vec![0i64; n];
    // Each round raises some c_i by at least one, and c_i is bounded by
    // the sum of positive entries, so this always terminates.
    loop {
        for (j, dj) in d.iter_mut().enumerate() {
            *dj = (0..n)
                .filter_map(|i| s.get(i, j).map(|v| v + c[i]))
                .max()
                .expect("a transversal covers every column");
        }
        let mut changed = false;
        for i in 0..n {
            let j = t.cols[i];
            let ci = d[j] - s.get(i, j).expect("finite on the transversal");
            if ci != c[i] {
                c[i] = ci;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(Offsets { c, d })
}
