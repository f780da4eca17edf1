use thiserror::Error;

use super::linalg::{self, CMatrix};
use super::TRACE_TOL;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("a channel needs at least one Kraus operator")]
    Empty,
    #[error("Kraus operators must all be {expected}×{expected}, found {found_rows}×{found_cols}")]
    Shape { expected: usize, found_rows: usize, found_cols: usize },
    #[error("channel is not trace-preserving: ‖ΣK†K − 1‖ = {defect:.3e}")]
    NotTracePreserving { defect: f64 },
    #[error("matrix is not unitary within {tol:.1e}")]
    NotUnitary { tol: f64 },
}

/// A completely positive trace-preserving map in Kraus form over an
/// ordered list of subsystems.
///
/// Complete positivity is structural (any Kraus family is CP); trace
/// preservation is checked on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    ops: Vec<CMatrix>,
    dims: Vec<usize>,
}

impl KrausChannel {
    pub fn new(ops: Vec<CMatrix>, dims: Vec<usize>) -> Result<Self, ChannelError> {
        let ch = Self::unchecked(ops, dims)?;
        match ch.validate() {
            ChannelReport::Ok { .. } => Ok(ch),
            ChannelReport::NotTracePreserving { defect } => {
                Err(ChannelError::NotTracePreserving { defect })
            }
        }
    }

    /// Shape-checked but not CPTP-checked construction.
    pub(crate) fn unchecked(ops: Vec<CMatrix>, dims: Vec<usize>) -> Result<Self, ChannelError> {
        if ops.is_empty() {
            return Err(ChannelError::Empty);
        }
        let expected: usize = dims.iter().product();
        for k in &ops {
            if k.nrows() != expected || k.ncols() != expected {
                return Err(ChannelError::Shape {
                    expected,
                    found_rows: k.nrows(),
                    found_cols: k.ncols(),
                });
            }
        }
        Ok(KrausChannel { ops, dims })
    }

    pub fn identity(dims: &[usize]) -> Self {
        let d = dims.iter().product();
        KrausChannel { ops: vec![linalg::identity(d)], dims: dims.to_vec() }
    }

    pub fn from_unitary(u: CMatrix, dims: Vec<usize>) -> Result<Self, ChannelError> {
        if !linalg::is_unitary(&u, TRACE_TOL) {
            return Err(ChannelError::NotUnitary { tol: TRACE_TOL });
        }
        Self::new(vec![u], dims)
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Checks ΣᵢKᵢ†Kᵢ = 1 within tolerance. Complete positivity needs no
    /// check: it is automatic for any map given in Kraus form.
    pub fn validate(&self) -> ChannelReport {
        let defect = linalg::kraus_defect(&self.ops);
        if defect <= TRACE_TOL {
            ChannelReport::Ok { complete_positivity: "structural (Kraus form)" }
        } else {
            ChannelReport::NotTracePreserving { defect }
        }
    }
}

/// Result of [`validate_channel`].
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelReport {
    Ok { complete_positivity: &'static str },
    NotTracePreserving { defect: f64 },
}

impl ChannelReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, ChannelReport::Ok { .. })
    }
}

/// Validates a Kraus family as a trace-preserving superoperator.
pub fn validate_channel(ch: &KrausChannel) -> ChannelReport {
    ch.validate()
}
