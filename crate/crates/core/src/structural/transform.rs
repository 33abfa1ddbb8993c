//! Structural transforms: differentiating equations and extracting a
//! subexpression into a new variable, with their effect on offsets.

use super::assignment::{all_hvts, hvt};
use super::offsets::Offsets;
use super::sigma::SigmaMatrix;
use super::StructuralError;

/// Differentiates equation `r` (0-based) once: its finite entries rise by
/// one, `c_r` drops by one, and if that makes `c_r = -1` every offset is
/// raised by one to renormalise.
pub fn dif_r(s: &SigmaMatrix, o: &Offsets, r: usize) -> (SigmaMatrix, Offsets) {
    let mut k = vec![0; s.n()];
    k[r] = 1;
    dif_multi(s, o, &k)
}

/// Differentiates equation `i` `k[i]` times, for every `i`.
pub fn dif_multi(s: &SigmaMatrix, o: &Offsets, k: &[i64]) -> (SigmaMatrix, Offsets) {
    let n = s.n();
    assert_eq!(k.len(), n);
    assert!(k.iter().all(|&x| x >= 0), "differentiation counts are non-negative");
    let mut t = s.clone();
    for (i, &ki) in k.iter().enumerate() {
        for j in 0..n {
            if let Some(v) = s.get(i, j) {
                t.set(i, j, Some(v + ki));
            }
        }
    }
    let mut c: Vec<i64> = o.c.iter().zip(k).map(|(c, k)| c - k).collect();
    let mut d = o.d.clone();
    let shift = -c.iter().copied().min().unwrap_or(0).min(0);
    c.iter_mut().for_each(|x| *x += shift);
    d.iter_mut().for_each(|x| *x += shift);
    (t, Offsets { c, d })
}

/// Outcome of [`check_dif_r`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifCheck {
    pub val_before: i64,
    pub val_after: i64,
    pub hvts_preserved: bool,
    pub offsets_valid: bool,
    pub offsets_normalised: bool,
}

impl DifCheck {
    pub fn holds(&self) -> bool {
        self.val_after == self.val_before + 1
            && self.hvts_preserved
            && self.offsets_valid
            && self.offsets_normalised
    }
}

/// Applies [`dif_r`] and checks its laws: `Val` rises by one, the set of
/// highest-value transversals is unchanged (by exhaustive enumeration, so
/// `n <= 9`), and the new offsets are valid and normalised.
pub fn check_dif_r(s: &SigmaMatrix, o: &Offsets, r: usize) -> Result<DifCheck, StructuralError> {
    let (_, val_before) = hvt(s)?;
    let (t, o2) = dif_r(s, o, r);
    let (_, val_after) = hvt(&t)?;
    Ok(DifCheck {
        val_before,
        val_after,
        hvts_preserved: all_hvts(s).1 == all_hvts(&t).1,
        offsets_valid: o2.is_valid(&t),
        offsets_normalised: o2.is_normalised(),
    })
}

/// Result of [`extract_subexpr`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Extraction {
    pub sigma: SigmaMatrix,
    /// The original offsets extended by `d_{n+1} = max_{r∈R} c_r` (0 for
    /// empty `R`) and `c_{n+1} = d_{n+1}`.
    pub offsets: Offsets,
    pub weakly_valid: bool,
}

/// Replaces a subexpression `ψ(x)` occurring in equations `rows` by a new
/// variable `u`, appended as column `n`, with the new equation
/// `u - ψ(x) = 0` appended as row `n`.
///
/// `psi[j]` is the highest order of `x_j` in `ψ`. `body` is the signature
/// of the first `n` rewritten equations in the original variables; it
/// defaults to `s` (every occurrence of each `x_j` kept outside `ψ` too).
/// It must satisfy `s_ij = max(body_ij, psi_j)` for `i ∈ rows` and
/// `s_ij = body_ij` otherwise.
pub fn extract_subexpr(
    s: &SigmaMatrix,
    o: &Offsets,
    psi: &[Option<i64>],
    rows: &[usize],
    body: Option<&SigmaMatrix>,
) -> Result<Extraction, StructuralError> {
    let n = s.n();
    let pre = |m: String| Err(StructuralError::Precondition(m));
    if psi.len() != n {
        return pre(format!("psi has {} entries, expected {n}", psi.len()));
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= n) {
        return pre(format!("row {r} out of range"));
    }
    let body = body.unwrap_or(s);
    if body.n() != n {
        return pre("body has the wrong size".into());
    }
    for i in 0..n {
        let in_r = rows.contains(&i);
        for j in 0..n {
            let want = if in_r {
                body.get(i, j).max(psi[j])
            } else {
                body.get(i, j)
            };
            if want != s.get(i, j) {
                return pre(format!("entry ({i}, {j}) is inconsistent with the extraction"));
            }
        }
    }
    let mut t = SigmaMatrix::empty(n + 1);
    for i in 0..n {
        for j in 0..n {
            t.set(i, j, body.get(i, j));
        }
    }
    for &r in rows {
        t.set(r, n, Some(0));
    }
    for (j, p) in psi.iter().enumerate() {
        t.set(n, j, *p);
    }
    t.set(n, n, Some(0));
    let dn = rows.iter().map(|&r| o.c[r]).max().unwrap_or(0);
    let mut c = o.c.clone();
    let mut d = o.d.clone();
    c.push(dn);
    d.push(dn);
    let offsets = Offsets { c, d };
    let weakly_valid = offsets.is_weakly_valid(&t);
    Ok(Extraction {
        sigma: t,
        offsets,
        weakly_valid,
    })
}
