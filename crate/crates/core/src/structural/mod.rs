//! Signature-matrix (Σ-method) analysis of the DAE that a code list
//! induces, and the structural transforms used to certify it.

mod assignment;
mod dae;
mod jacobian;
mod offsets;
mod sigma;
mod transform;

use thiserror::Error;

pub use assignment::{all_hvts, hvt};
pub use dae::{dae_view, dae_view_compact, DaePoint, DaeRow, DaeView, Factor, RowKind, Term};
pub use jacobian::{
    check_valid, is_unit_lower_triangular, system_jacobian, system_jacobian_pattern, Verdict,
};
pub use offsets::{canonical_offsets, Offsets};
pub use sigma::{SigmaMatrix, Transversal, NEG_INF};
pub use transform::{check_dif_r, dif_multi, dif_r, extract_subexpr, DifCheck, Extraction};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructuralError {
    #[error("no finite transversal: the system is structurally ill-posed")]
    StructurallyIllPosed,
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Everything the structural check of a traced code list produces.
#[derive(Clone, Debug)]
pub struct CodeListAnalysis {
    pub view: DaeView,
    pub sigma: SigmaMatrix,
    pub codelist_offsets: Offsets,
    pub canonical_offsets: Offsets,
    pub hvt: Transversal,
    pub val: i64,
    pub jacobian: nalgebra::DMatrix<f64>,
    pub verdict: Verdict,
}

impl CodeListAnalysis {
    /// Code-list offsets valid, the diagonal a highest-value transversal,
    /// and the system Jacobian unit lower triangular.
    pub fn theorem_holds(&self) -> bool {
        let diag_val = Transversal::diagonal(self.sigma.n()).value(&self.sigma);
        self.codelist_offsets.is_valid(&self.sigma)
            && diag_val == Some(self.val)
            && is_unit_lower_triangular(&self.jacobian)
            && matches!(self.verdict, Verdict::Valid { .. })
    }
}

/// Builds the DAE view of `cl` and analyses it at the point `(t0, ics)`.
pub fn analyze(
    cl: &crate::codelist::CodeList,
    ics: &[f64],
    t0: f64,
) -> Result<CodeListAnalysis, AnalysisError> {
    let view = dae_view(cl);
    let sigma = view.sigma();
    let (hvt_t, val) = hvt(&sigma)?;
    let codelist_offsets = view.codelist_offsets();
    let canonical = canonical_offsets(&sigma)?;
    let point = view.point(cl, ics, t0)?;
    let jacobian = system_jacobian(&view, &codelist_offsets, &point);
    let verdict = check_valid(&sigma, &codelist_offsets, &jacobian);
    Ok(CodeListAnalysis {
        view,
        sigma,
        codelist_offsets,
        canonical_offsets: canonical,
        hvt: hvt_t,
        val,
        jacobian,
        verdict,
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Structural(#[from] StructuralError),
    #[error(transparent)]
    Kernel(#[from] crate::kernel::KernelError),
}
