//! Experiment harness: curvature bounds, auxiliary-function and Jacobi
//! diagnostics on solved patches, and parameter sweeps.

mod diagnostics;
mod sweep;

pub use diagnostics::{
    aux_p, aux_p_max, curvature_report, default_c_candidate, jacobi_slack, AuxFunction, AuxMax,
    JacobiContext, JacobiSummary, TheoremDiagnostics, JACOBI_GAP_FACTOR, JACOBI_MIN_RING,
};
pub use sweep::{run_sweep, run_sweep_with, SweepReport, SweepRow, SWEEP_HEADER};
