mod bsb;
mod bz;
mod hjb;
mod lqr;

pub use bsb::{BsbExact, BsbProblem};
pub use bz::{BzExact, BzProblem};
pub use hjb::{hjb_reference, HjbProblem, HjbReferenceCache, McEstimate};
pub use lqr::{Lqr1dProblem, LqrExact};

use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::model::{ScaledExact, SmoothFn};
use crate::problem::PdeProblem;

/// Construct a built-in benchmark problem by name.
pub fn problem_by_name(name: &str, dim: usize) -> Result<Box<dyn PdeProblem>> {
    match name {
        "hjb" => Ok(Box::new(HjbProblem::new(dim))),
        "bsb" => Ok(Box::new(BsbProblem::new(dim))),
        "bz" => Ok(Box::new(BzProblem::new(dim))),
        "lqr1d" => {
            if dim != 1 {
                return Err(CoreError::Precondition("lqr1d is one-dimensional".into()));
            }
            Ok(Box::new(Lqr1dProblem::default()))
        }
        other => Err(CoreError::Precondition(format!("unknown problem '{other}'"))),
    }
}

/// The exact solution of a benchmark wrapped as a smooth field, for use in
/// `ScaledExact` models and oracle evaluations. Errors for HJB, whose
/// reference is Monte-Carlo only.
pub fn exact_field(name: &str, dim: usize) -> Result<Arc<dyn SmoothFn>> {
    match name {
        "bsb" => Ok(Arc::new(BsbExact::new(dim))),
        "bz" => Ok(Arc::new(BzExact::new(dim))),
        "lqr1d" => Ok(Arc::new(LqrExact::new(Lqr1dProblem::default()))),
        "hjb" => Err(CoreError::MissingReference("hjb".into())),
        other => Err(CoreError::Precondition(format!("unknown problem '{other}'"))),
    }
}

/// ScaledExact model family around a benchmark's exact solution.
pub fn scaled_exact_model(name: &str, dim: usize) -> Result<ScaledExact> {
    Ok(ScaledExact::new(exact_field(name, dim)?))
}
