//! Parameter sweeps over `q` and `‖μ‖`, verification suites and CSV output.

pub mod config;
pub mod records;
pub mod sweep;
pub mod verify;

pub use config::{Model, RPolicy, SweepConfig, SweepRegime};
pub use records::{
    read_records_csv, summarize, write_records_csv, write_summary_csv, Metric, SweepRecord,
};
pub use sweep::{run_vary_distance_sweep, run_vary_q_sweep};
pub use verify::{run_verification_suite, Suite, VerificationReport};
