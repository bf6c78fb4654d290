//! Magnus-expansion synthesis of control corrections that suppress leakage
//! and non-adiabatic errors in driven few-level quantum systems.

pub mod corrections;
pub mod error;
pub mod fidelity;
pub mod jet;
pub mod magnus;
pub mod models;
pub mod ode;
pub mod ops;
pub mod partition;
pub mod problem;
pub mod propagator;
pub mod quad;
pub mod sweep;
pub mod timedep;

pub use error::{Error, Result};
pub use ops::{Mat, OperatorMatrix, Role, C64};
pub use partition::HilbertPartition;
pub use problem::LeakageProblem;
pub use propagator::PropagationResult;
pub use timedep::TimeDepOperator;
