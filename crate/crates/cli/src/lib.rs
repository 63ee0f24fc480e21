//! Scenario runner for the `noether-paths` library: parse a JSON scenario,
//! run one experiment, write CSV tables and a metadata sidecar.

pub mod error;
pub mod experiments;
pub mod output;
pub mod scenario;

pub use error::CliError;
pub use experiments::{run_scenario, Cell, ResultRecord, Table};
pub use output::{emit_csv, write_record};
pub use scenario::{parse_scenario, Experiment, Scenario};
