//! Small dense constrained optimisation used by both pipeline stages.

pub mod dual;
pub mod qp;
pub mod sqp;

pub use dual::{DualQp, DualSolution, DualStatus};
pub use qp::{QpProblem, QpSettings, QpSolution, QpStatus};
pub use sqp::{minimize, Evaluation, NlpProblem, SqpResult, SqpSettings, Termination};
