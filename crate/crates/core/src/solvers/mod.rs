//! VQE optimizers and quantum subspace expansion.

mod optimize;
mod qse;

pub use optimize::{
    minimize, run_vqe, trace_csv, OptimizerConfig, OptimizerKind, SpsaGains, VqeIteration, VqeTrace,
};
pub use qse::{
    build_qse, degeneracy_groups, extrapolate_problems, qse_operators, solve_generalized, QseDiagnostics, QseOperator,
    QseProblem, QseSolution, DEFAULT_S_THRESHOLD_NOISELESS, DEFAULT_S_THRESHOLD_NOISY,
};
