//! Line-oriented parameter database.
//!
//! ```text
//! snake-db 1
//! config_digest <hex>
//! run_seed <u64>
//! grid <rows> <cols>
//! domain <k> <f_min> <f_max>
//! run <subgoals> <threads> <seeds> | run none
//! epochs <n>
//! <label> <epoch>
//! steps <n>
//! <index> <central> <params> <constraints> <value>
//! records <n>
//! <label> <kind> <freq_index> <step> <objective>
//! end
//! ```
//!
//! Records appear in calibration order. Floats use the shortest text that
//! parses back to the same value, so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::path::Path;

use crate::engine::{CalibrationState, RunSummary, StepRecord};
use crate::error::DatabaseError;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "snake-db";

#[derive(Clone, Debug, PartialEq)]
pub struct DbRecord {
    pub label: String,
    pub kind: String,
    pub freq_index: u32,
    pub step: usize,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DbStep {
    pub index: usize,
    pub central: String,
    pub parameter_count: usize,
    pub constraint_count: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParameterDatabaseFile {
    pub config_digest: String,
    pub run_seed: u64,
    pub rows: u32,
    pub cols: u32,
    pub k: u32,
    pub f_min: f64,
    pub f_max: f64,
    pub run: Option<RunSummary>,
    pub epochs: Vec<(String, u32)>,
    pub steps: Vec<DbStep>,
    pub records: Vec<DbRecord>,
}

impl ParameterDatabaseFile {
    pub fn from_state(state: &CalibrationState) -> Self {
        let cfg = state.config();
        let graph = state.graph();
        let steps = state.step_log();
        ParameterDatabaseFile {
            config_digest: cfg.digest(),
            run_seed: cfg.seed,
            rows: cfg.rows,
            cols: cfg.cols,
            k: cfg.k,
            f_min: cfg.f_min,
            f_max: cfg.f_max,
            run: state.last_run(),
            epochs: state.landscapes().drifted().into_iter().map(|(g, e)| (graph.label(g), e)).collect(),
            steps: steps
                .iter()
                .map(|s| DbStep {
                    index: s.index,
                    central: graph.label(s.central),
                    parameter_count: s.parameter_count,
                    constraint_count: s.constraint_count,
                    value: s.value,
                })
                .collect(),
            records: state
                .status()
                .iter()
                .map(|&(g, step)| DbRecord {
                    label: graph.label(g),
                    kind: graph.kind(g).as_str().to_string(),
                    freq_index: state.value(g).expect("status entries have values"),
                    step,
                    objective: steps[step].value,
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(out, "config_digest {}", self.config_digest);
        let _ = writeln!(out, "run_seed {}", self.run_seed);
        let _ = writeln!(out, "grid {} {}", self.rows, self.cols);
        let _ = writeln!(out, "domain {} {} {}", self.k, self.f_min, self.f_max);
        match self.run {
            Some(r) => {
                let _ = writeln!(out, "run {} {} {}", r.subgoals, r.threads, r.seeds);
            }
            None => out.push_str("run none\n"),
        }
        let _ = writeln!(out, "epochs {}", self.epochs.len());
        for (label, epoch) in &self.epochs {
            let _ = writeln!(out, "{label} {epoch}");
        }
        let _ = writeln!(out, "steps {}", self.steps.len());
        for s in &self.steps {
            let _ = writeln!(out, "{} {} {} {} {}", s.index, s.central, s.parameter_count, s.constraint_count, s.value);
        }
        let _ = writeln!(out, "records {}", self.records.len());
        for r in &self.records {
            let _ = writeln!(out, "{} {} {} {} {}", r.label, r.kind, r.freq_index, r.step, r.objective);
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self, DatabaseError> {
        let mut lines = Lines { iter: text.lines().enumerate() };

        let (n, header) = lines.next("header")?;
        let mut head = header.split_whitespace();
        if head.next() != Some(MAGIC) {
            return Err(malformed(n, format!("expected `{MAGIC} <version>`")));
        }
        let version = head.next().unwrap_or("");
        if version != FORMAT_VERSION.to_string() {
            return Err(DatabaseError::Version { found: version.to_string(), expected: FORMAT_VERSION });
        }

        let config_digest = lines.keyed("config_digest", 1)?.1.remove(0).to_string();
        let run_seed = lines.keyed("run_seed", 1).and_then(|(n, f)| num(n, f[0]))?;
        let (n, grid) = lines.keyed("grid", 2)?;
        let (rows, cols) = (num(n, grid[0])?, num(n, grid[1])?);
        let (n, domain) = lines.keyed("domain", 3)?;
        let (k, f_min, f_max) = (num(n, domain[0])?, num(n, domain[1])?, num(n, domain[2])?);

        let (n, line) = lines.next("run")?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let run = match fields.as_slice() {
            ["run", "none"] => None,
            ["run", a, b, c] => {
                Some(RunSummary { subgoals: num(n, a)?, threads: num(n, b)?, seeds: num(n, c)?, failed_subgoals: 0 })
            }
            _ => return Err(malformed(n, "expected `run <subgoals> <threads> <seeds>` or `run none`".into())),
        };

        let count = lines.keyed("epochs", 1).and_then(|(n, f)| num::<usize>(n, f[0]))?;
        let mut epochs = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, f) = lines.row("epoch", 2)?;
            epochs.push((f[0].to_string(), num(n, f[1])?));
        }

        let count = lines.keyed("steps", 1).and_then(|(n, f)| num::<usize>(n, f[0]))?;
        let mut steps = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, f) = lines.row("step", 5)?;
            steps.push(DbStep {
                index: num(n, f[0])?,
                central: f[1].to_string(),
                parameter_count: num(n, f[2])?,
                constraint_count: num(n, f[3])?,
                value: num(n, f[4])?,
            });
        }

        let count = lines.keyed("records", 1).and_then(|(n, f)| num::<usize>(n, f[0]))?;
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, f) = lines.row("record", 5)?;
            records.push(DbRecord {
                label: f[0].to_string(),
                kind: f[1].to_string(),
                freq_index: num(n, f[2])?,
                step: num(n, f[3])?,
                objective: num(n, f[4])?,
            });
        }

        let (n, end) = lines.next("end marker")?;
        if end.trim() != "end" {
            return Err(malformed(n, "expected `end`".into()));
        }

        Ok(ParameterDatabaseFile { config_digest, run_seed, rows, cols, k, f_min, f_max, run, epochs, steps, records })
    }

    /// Loads this database into a fresh state built from the matching config.
    pub fn restore_into(&self, state: &mut CalibrationState) -> Result<(), DatabaseError> {
        let expected = state.config().digest();
        if self.config_digest != expected {
            return Err(DatabaseError::Digest { found: self.config_digest.clone(), expected });
        }
        if !state.status().is_empty() || !state.step_log().is_empty() {
            return Err(malformed(0, "database can only be restored into a fresh state".into()));
        }
        let lookup = |label: &str| {
            state.graph().parse_label(label).ok_or_else(|| malformed(0, format!("unknown element `{label}`")))
        };
        let epochs = self.epochs.iter().map(|(l, e)| Ok((lookup(l)?, *e))).collect::<Result<Vec<_>, _>>()?;
        let mut steps = Vec::with_capacity(self.steps.len());
        for (i, s) in self.steps.iter().enumerate() {
            if s.index != i {
                return Err(malformed(0, format!("step {} listed at position {i}", s.index)));
            }
            steps.push(StepRecord {
                index: s.index,
                central: lookup(&s.central)?,
                parameter_count: s.parameter_count,
                constraint_count: s.constraint_count,
                value: s.value,
            });
        }
        let mut records = Vec::with_capacity(self.records.len());
        for r in &self.records {
            if r.step >= steps.len() {
                return Err(malformed(0, format!("record {} refers to missing step {}", r.label, r.step)));
            }
            records.push((lookup(&r.label)?, r.freq_index, r.step));
        }

        for (g, e) in epochs {
            state.landscapes_mut().set_epoch(g, e);
        }
        for s in steps {
            state.push_step(s);
        }
        for (g, v, step) in records {
            state.assign(g, v, step).map_err(|e| malformed(0, e.to_string()))?;
        }
        state.set_last_run(self.run);
        Ok(())
    }
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), DatabaseError> {
        self.iter.next().map(|(i, l)| (i + 1, l)).ok_or_else(|| DatabaseError::Truncated(format!("missing {what}")))
    }

    fn row(&mut self, what: &str, width: usize) -> Result<(usize, Vec<&'a str>), DatabaseError> {
        let (n, line) = self.next(what)?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != width {
            return Err(malformed(n, format!("{what} needs {width} fields, found {}", fields.len())));
        }
        Ok((n, fields))
    }

    fn keyed(&mut self, key: &str, width: usize) -> Result<(usize, Vec<&'a str>), DatabaseError> {
        let (n, mut fields) = self.row(key, width + 1)?;
        if fields[0] != key {
            return Err(malformed(n, format!("expected `{key}`, found `{}`", fields[0])));
        }
        fields.remove(0);
        Ok((n, fields))
    }
}

fn malformed(line: usize, message: String) -> DatabaseError {
    DatabaseError::Malformed { line, message }
}

fn num<T: std::str::FromStr>(line: usize, raw: &str) -> Result<T, DatabaseError> {
    raw.parse().map_err(|_| malformed(line, format!("cannot parse `{raw}`")))
}

pub fn write_database(state: &CalibrationState, path: &Path) -> Result<(), DatabaseError> {
    std::fs::write(path, ParameterDatabaseFile::from_state(state).to_text())
        .map_err(|source| DatabaseError::Io { path: path.to_path_buf(), source })
}

pub fn read_database(path: &Path) -> Result<ParameterDatabaseFile, DatabaseError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| DatabaseError::Io { path: path.to_path_buf(), source })?;
    ParameterDatabaseFile::parse(&text)
}
