pub mod config;
pub mod database;
pub mod report;

pub use config::{parse_config, RunConfig};
pub use database::{read_database, write_database, ParameterDatabaseFile};
pub use report::{emit_report, machine_block};
