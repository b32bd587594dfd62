//! Config-driven sweeps, CSV output, plot scripts, the ordinal summary
//! checks and the analytic-versus-simulation report.

pub mod config;
pub mod output;
pub mod plot;
pub mod sweep;
pub mod table1;
pub mod validation;

pub use config::ExperimentConfig;
pub use output::{emit_csv, format_number, read_csv, write_csv, CSV_HEADER};
pub use plot::{emit_plot_script, plot_script, Figure};
pub use sweep::{run_sweep, thread_pool_from_env, Metric, SweepResult, SweepRow, SweepSpec, SweptParameter};
pub use table1::{table1_check, table1_check_with, Table1Report};
pub use validation::ValidationReport;
