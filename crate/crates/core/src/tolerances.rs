use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by every module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Algebraic identities such as Hermiticity checks.
    pub algebraic: f64,
    /// Allowed drift of Tr[rho] over an integration run.
    pub trace_drift: f64,
    /// Most negative eigenvalue accepted for a density matrix.
    pub positivity: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        algebraic: 1e-12,
        trace_drift: 1e-9,
        positivity: 1e-10,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
