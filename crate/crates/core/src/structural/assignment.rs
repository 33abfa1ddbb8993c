//! Highest-value transversal via an exact linear assignment solver
//! (shortest augmenting paths with dual potentials, O(n³)).

use super::sigma::{SigmaMatrix, Transversal};
use super::StructuralError;

/// Minimum-cost perfect assignment on a dense square cost matrix.
/// Returns `col_of_row`.
fn min_cost_assignment(n: usize, cost: impl Fn(usize, usize) -> i64) -> Vec<usize> {
    // 1-based arrays; index 0 is the virtual root of each augmenting tree.
    const INF: i64 = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    col_of
}

/// A highest-value transversal of `s` and its value `Val(Σ)`.
///
/// −∞ entries are given a cost so large that any assignment using one is
/// worse than every finite assignment; if the optimum still uses one, no
/// finite transversal exists.
pub fn hvt(s: &SigmaMatrix) -> Result<(Transversal, i64), StructuralError> {
    let n = s.n();
    if n == 0 {
        return Ok((Transversal { cols: vec![] }, 0));
    }
    let max = (0..n)
        .flat_map(|i| s.row_entries(i).map(|(_, v)| v))
        .max()
        .ok_or(StructuralError::StructurallyIllPosed)?;
    let big = (n as i64 + 1) * (max + 1) + 1;
    let cols = min_cost_assignment(n, |i, j| s.get(i, j).map_or(big, |v| -v));
    let t = Transversal { cols };
    let val = t.value(s).ok_or(StructuralError::StructurallyIllPosed)?;
    Ok((t, val))
}

/// Every highest-value transversal, by enumerating all `n!` permutations.
/// Intended for small `n` only (checks of structural transforms).
pub fn all_hvts(s: &SigmaMatrix) -> (Option<i64>, Vec<Transversal>) {
    let n = s.n();
    assert!(n <= 9, "exhaustive enumeration is limited to n <= 9");
    let mut best: Option<i64> = None;
    let mut found = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let mut visit = |perm: &[usize]| {
        let t = Transversal {
            cols: perm.to_vec(),
        };
        if let Some(v) = t.value(s) {
            match best {
                Some(b) if v < b => {}
                Some(b) if v == b => found.push(t),
                _ => {
                    best = Some(v);
                    found = vec![t];
                }
            }
        }
    };
    // Heap's algorithm.
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    found.sort();
    (best, found)
}
