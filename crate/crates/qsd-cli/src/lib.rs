//! Library half of the `qsd` experiment driver: trial specs and ensemble
//! files, random generation, solver comparisons, the rotation-noise sweep,
//! and the trine demonstration. The binary in `main.rs` is a thin argument
//! parser over these calls, so integration tests can drive the exact same
//! code paths in-process.

pub mod compare;
pub mod generate;
pub mod noise;
pub mod schema;
pub mod trine;

pub use compare::{run_comparison, ComparisonRow, ComparisonTable};
pub use generate::{apply_rotation_noise, generate_ensemble};
pub use noise::{noise_sweep, NoiseRecord, NoiseSweepResult, DEFAULT_THETA_GRID};
pub use schema::{EnsembleFile, SolverKind, TrialSpec};
pub use trine::{trine_demo, trine_demo_with, TrineReport};

/// Process exit code for a library error: 2 for solver non-convergence,
/// 3 for invariant or bound violations (including malformed input files),
/// 1 for everything else (I/O and usage).
pub fn exit_code(err: &qsd_core::Error) -> u8 {
    use qsd_core::Error;
    match err {
        Error::Convergence { .. } => 2,
        Error::BoundViolation { .. }
        | Error::Invalid { .. }
        | Error::PolicyGap { .. }
        | Error::Dimension(_)
        | Error::ImpossibleOutcome { .. } => 3,
        _ => 1,
    }
}
