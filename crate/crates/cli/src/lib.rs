//! Library half of the `lmo-approx` command: density documents, bundled
//! examples and report generation.

pub mod error;
pub mod example;
pub mod format;
pub mod report;
pub mod spec;

pub use error::CliError;
pub use report::{build_report, ReportBundle, ReportConfig};
pub use spec::DensitySpec;
