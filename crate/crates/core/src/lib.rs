//! Distributionally robust fault detection.
//!
//! Worst-case false-alarm bounds for quadratic detection statistics under
//! moment, unimodality and support ambiguity, residual-generator designs that
//! keep the worst-case false-alarm rate below a tolerance, and safe alarm
//! thresholds. The numerical layers underneath are a dense symmetric
//! linear-algebra toolkit and a small interior-point SDP solver.

pub mod ambiguity;
pub mod bounds;
pub mod conic;
pub mod design;
pub mod linalg;
pub mod sysmodel;
pub mod verify;

pub use ambiguity::{Alpha, AmbiguityError, AmbiguitySet, Ellipsoid, SupportSet};
pub use design::{DesignError, DesignOptions, DesignResult, Metric, Scheme};
pub use conic::{ConicError, SdpProblem, SdpSolution, SdpStatus};
pub use linalg::{LinalgError, SymMatrix};
