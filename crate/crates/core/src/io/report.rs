//! Run report: a human-readable summary followed by a `[machine]` block of
//! `key = value` lines that is stable across runs with the same inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use crate::engine::CalibrationState;
use crate::oracle::{total_system_error, validate};

fn histogram(values: impl Iterator<Item = usize>) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for v in values {
        *h.entry(v).or_insert(0) += 1;
    }
    h
}

fn compact(h: &BTreeMap<usize, usize>) -> String {
    h.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(",")
}

pub fn emit_report(state: &CalibrationState, wall_time: Option<Duration>) -> String {
    let steps = state.step_log();
    let dims = histogram(steps.iter().map(|s| s.parameter_count));
    let constraints = histogram(steps.iter().map(|s| s.constraint_count));
    let total = if state.is_complete() { total_system_error(state, &state.database()).ok() } else { None };
    let violations = validate(state).len();
    let run = state.last_run().unwrap_or_default();
    let cfg = state.config();

    let mut out = String::new();
    let _ = writeln!(out, "calibration report");
    let _ = writeln!(out, "  grid            {}x{} ({}, k = {})", cfg.rows, cfg.cols, cfg.algorithm, cfg.k);
    let _ = writeln!(out, "  calibrated      {} of {}", state.status().len(), state.goal().len());
    let _ = writeln!(out, "  steps           {}", steps.len());
    let _ = writeln!(out, "  subgoals        {}", run.subgoals);
    let _ = writeln!(out, "  threads         {}", run.threads);
    let _ = writeln!(out, "  seeds           {}", run.seeds);
    match total {
        Some(t) => {
            let _ = writeln!(out, "  total error     {t:.6e}");
        }
        None => {
            let _ = writeln!(out, "  total error     n/a (incomplete)");
        }
    }
    let _ = writeln!(out, "  violations      {violations}");
    match wall_time {
        Some(t) => {
            let _ = writeln!(out, "  wall time       {:.3} s", t.as_secs_f64());
        }
        None => {
            let _ = writeln!(out, "  wall time       n/a");
        }
    }
    let _ = writeln!(out, "  step dimension histogram");
    for (d, n) in &dims {
        let _ = writeln!(out, "    {d:>4}  {n}");
    }
    let _ = writeln!(out, "  step constraint histogram");
    for (d, n) in &constraints {
        let _ = writeln!(out, "    {d:>4}  {n}");
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "[machine]");
    let _ = writeln!(out, "steps = {}", steps.len());
    let _ = writeln!(out, "dimension_hist = {}", compact(&dims));
    let _ = writeln!(out, "constraint_hist = {}", compact(&constraints));
    let _ = writeln!(out, "total_system_error = {}", total.map_or_else(|| "n/a".to_string(), |t| t.to_string()));
    let _ = writeln!(out, "subgoals = {}", run.subgoals);
    let _ = writeln!(out, "threads = {}", run.threads);
    let _ = writeln!(out, "seeds = {}", run.seeds);
    let _ = writeln!(out, "calibrated = {}", state.status().len());
    let _ = writeln!(out, "goal = {}", state.goal().len());
    let _ = writeln!(out, "complete = {}", state.is_complete());
    let _ = writeln!(out, "violations = {violations}");
    out
}

/// The `[machine]` block of a report as key/value pairs.
pub fn machine_block(report: &str) -> BTreeMap<String, String> {
    report
        .lines()
        .skip_while(|l| l.trim() != "[machine]")
        .skip(1)
        .filter_map(|l| l.split_once(" = ").map(|(k, v)| (k.trim().to_string(), v.trim().to_string())))
        .collect()
}
