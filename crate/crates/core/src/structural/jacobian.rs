use nalgebra::DMatrix;

use super::assignment::hvt;
use super::dae::{DaePoint, DaeView};
use super::offsets::Offsets;
use super::sigma::{SigmaMatrix, Transversal};

/// `J̃_ij = ∂f_i / ∂x_j^(d_j - c_i)` where `d_j - c_i = σ_ij`, else 0,
/// evaluated at `point`.
pub fn system_jacobian(view: &DaeView, offsets: &Offsets, point: &DaePoint) -> DMatrix<f64> {
    let n = view.size();
    let mut j = DMatrix::zeros(n, n);
    for (i, r) in view.rows().iter().enumerate() {
        for t in &r.terms {
            if offsets.d[t.col] - offsets.c[i] == t.order {
                j[(i, t.col)] += point.partial(t);
            }
        }
    }
    j
}

/// Positions where `J̃` can be nonzero: tight offsets and the variable
/// actually occurs at that derivative order.
pub fn system_jacobian_pattern(view: &DaeView, offsets: &Offsets) -> Vec<Vec<bool>> {
    let n = view.size();
    let mut p = vec![vec![false; n]; n];
    for (i, r) in view.rows().iter().enumerate() {
        for t in &r.terms {
            if offsets.d[t.col] - offsets.c[i] == t.order {
                p[i][t.col] = true;
            }
        }
    }
    p
}

/// Lower triangular with every diagonal entry exactly 1.
pub fn is_unit_lower_triangular(j: &DMatrix<f64>) -> bool {
    let n = j.nrows();
    (0..n).all(|i| j[(i, i)] == 1.0 && (i + 1..n).all(|k| j[(i, k)] == 0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// Offsets are weakly valid, equality holds on `transversal`, and the
    /// system Jacobian is nonsingular.
    Valid { transversal: Transversal },
    /// Weakly valid, but the Jacobian is singular at the point checked
    /// (or no equality transversal among its nonzeros exists).
    WeaklyValidUncertified,
    /// `d_j - c_i < σ_ij` at these positions.
    Invalid { violations: Vec<(usize, usize)> },
}

fn nonsingular(j: &DMatrix<f64>) -> bool {
    let n = j.nrows();
    if n == 0 {
        return true;
    }
    // Triangular matrices are decided exactly from the diagonal.
    let lower = (0..n).all(|i| (i + 1..n).all(|k| j[(i, k)] == 0.0));
    if lower {
        return (0..n).all(|i| j[(i, i)] != 0.0);
    }
    let sv = j.clone().svd(false, false).singular_values;
    let max = sv.max();
    let tol = max * n as f64 * f64::EPSILON;
    max > 0.0 && sv.iter().all(|&s| s > tol)
}

/// Checks offsets against `Σ` and a system Jacobian. A nonsingular `J̃`
/// from weakly valid offsets implies an equality transversal exists among
/// its nonzero entries; that transversal is located and returned.
pub fn check_valid(s: &SigmaMatrix, offsets: &Offsets, j: &DMatrix<f64>) -> Verdict {
    let violations = offsets.violations(s);
    if !violations.is_empty() {
        return Verdict::Invalid { violations };
    }
    let n = s.n();
    let mut mask = SigmaMatrix::empty(n);
    for a in 0..n {
        for b in 0..n {
            if offsets.is_tight(s, a, b) && j[(a, b)] != 0.0 {
                mask.set(a, b, Some(0));
            }
        }
    }
    match hvt(&mask) {
        Ok((transversal, _)) if nonsingular(j) => Verdict::Valid { transversal },
        _ => Verdict::WeaklyValidUncertified,
    }
}
