//! Graph calibration of gate frequencies on a grid processor.
//!
//! A calibration run decomposes the global frequency assignment into many
//! small local optimizations. Each step optimizes the uncalibrated elements
//! near a central element, holding nearby calibrated elements fixed as
//! constraints. Steps are ordered by traversals over the grid, which are
//! grouped into independent subgoals that can run in parallel.

pub mod algorithm;
pub mod engine;
pub mod error;
pub mod graph;
pub mod io;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod scheduler;

pub use algorithm::{ActivitySet, AlgorithmMode};
pub use engine::{
    build_constraints, build_parameters, calibrate_element, calibrate_graph, calibrate_graph_with, calibrate_thread,
    recalibrate, stitch, CalibrationState, RunSummary, StepRecord,
};
pub use error::{CalibrationError, ConfigError, DatabaseError, InfeasibleStep, ModelError, OracleError};
pub use graph::{build_grid_graph, ElementId, ElementKind, Orientation, ProcessorGraph};
pub use io::{emit_report, parse_config, RunConfig};
pub use oracle::{global_brute_force, total_system_error, validate, GlobalAssignment, Violation};
pub use scheduler::{Heuristic, TraversalOrder};
