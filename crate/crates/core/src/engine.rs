//! Graph calibration: per-step parameter and constraint construction, the
//! traversal driver, subgoal scheduling (serial or parallel), local
//! re-calibration and stitching.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rayon::prelude::*;

use crate::algorithm::ActivitySet;
use crate::error::{CalibrationError, ConfigError, SubgoalFailure};
use crate::graph::{build_grid_graph, ElementId, ElementKind, ProcessorGraph};
use crate::io::RunConfig;
use crate::model::{build_error_model, optimize_error_model, Landscapes, ModelContext};
use crate::rng::{mix, stream, TAG_OPTIMIZER, TAG_OPTIONS};
use crate::scheduler::{
    build_calibration_subgoals, build_traversal_seed, build_traversal_threads, sort_options, traversal_candidates,
    CalibrationSubgoal, TraversalOrder, TraversalThread,
};

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub index: usize,
    pub central: ElementId,
    pub parameter_count: usize,
    pub constraint_count: usize,
    pub value: f64,
}

/// Segmentation and seeding counts of the most recent graph calibration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub subgoals: usize,
    pub threads: usize,
    pub seeds: usize,
    pub failed_subgoals: usize,
}

#[derive(Clone, Debug)]
pub struct CalibrationState {
    graph: Arc<ProcessorGraph>,
    activity: Arc<ActivitySet>,
    config: Arc<RunConfig>,
    landscapes: Arc<Landscapes>,
    goal: Vec<ElementId>,
    in_goal: Vec<bool>,
    /// Calibration history: (element, step index) in calibration order.
    status: Vec<(ElementId, usize)>,
    /// Chosen option index per element.
    values: Vec<Option<u32>>,
    step_log: Vec<StepRecord>,
    last_run: Option<RunSummary>,
}

impl CalibrationState {
    /// Fresh state over the full grid goal (all nodes and engineered edges).
    pub fn new(config: RunConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let graph = build_grid_graph(config.rows, config.cols);
        let goal: Vec<ElementId> =
            graph.elements().iter().filter(|e| e.kind != ElementKind::Parasitic).map(|e| e.id).collect();
        let landscapes = Landscapes::new(&graph, config.domain(), config.errors(), config.seed);
        let activity = ActivitySet::build(&graph, &goal, config.algorithm);
        let mut in_goal = vec![false; graph.len()];
        for g in &goal {
            in_goal[g.index()] = true;
        }
        Ok(CalibrationState {
            values: vec![None; graph.len()],
            graph: Arc::new(graph),
            activity: Arc::new(activity),
            config: Arc::new(config),
            landscapes: Arc::new(landscapes),
            goal,
            in_goal,
            status: Vec::new(),
            step_log: Vec::new(),
            last_run: None,
        })
    }

    /// Replaces the goal of a fresh state; algorithm subgraphs are rebuilt.
    pub fn with_goal(mut self, goal: &[ElementId]) -> Result<Self, CalibrationError> {
        if !self.status.is_empty() {
            return Err(CalibrationError::Contract("goal can only be changed before calibration".into()));
        }
        let mut goal = goal.to_vec();
        goal.sort_unstable();
        goal.dedup();
        if let Some(p) = goal.iter().find(|&&g| self.graph.kind(g) == ElementKind::Parasitic) {
            return Err(CalibrationError::Contract(format!(
                "parasitic edge {} cannot be calibrated",
                self.graph.label(*p)
            )));
        }
        self.in_goal = vec![false; self.graph.len()];
        for g in &goal {
            self.in_goal[g.index()] = true;
        }
        self.activity = Arc::new(ActivitySet::build(&self.graph, &goal, self.config.algorithm));
        self.goal = goal;
        Ok(self)
    }

    pub fn graph(&self) -> &ProcessorGraph {
        &self.graph
    }

    pub fn activity(&self) -> &ActivitySet {
        &self.activity
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn landscapes(&self) -> &Landscapes {
        &self.landscapes
    }

    pub fn landscapes_mut(&mut self) -> &mut Landscapes {
        Arc::make_mut(&mut self.landscapes)
    }

    pub fn goal(&self) -> &[ElementId] {
        &self.goal
    }

    #[inline]
    pub fn in_goal(&self, g: ElementId) -> bool {
        self.in_goal[g.index()]
    }

    #[inline]
    pub fn is_calibrated(&self, g: ElementId) -> bool {
        self.values[g.index()].is_some()
    }

    pub fn value(&self, g: ElementId) -> Option<u32> {
        self.values[g.index()]
    }

    pub fn frequency(&self, g: ElementId) -> Option<f64> {
        self.value(g).map(|i| self.config.domain().value(i))
    }

    pub fn status(&self) -> &[(ElementId, usize)] {
        &self.status
    }

    pub fn step_log(&self) -> &[StepRecord] {
        &self.step_log
    }

    pub fn last_run(&self) -> Option<RunSummary> {
        self.last_run
    }

    pub fn set_last_run(&mut self, summary: Option<RunSummary>) {
        self.last_run = summary;
    }

    /// Calibrated element -> option index.
    pub fn database(&self) -> BTreeMap<ElementId, u32> {
        self.status.iter().map(|&(g, _)| (g, self.values[g.index()].expect("status entries have values"))).collect()
    }

    pub fn uncalibrated(&self) -> Vec<ElementId> {
        self.goal.iter().copied().filter(|&g| !self.is_calibrated(g)).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.status.len() == self.goal.len()
    }

    pub fn model_context(&self) -> ModelContext<'_> {
        ModelContext {
            graph: &self.graph,
            activity: &self.activity,
            landscapes: &self.landscapes,
            domain: self.config.domain(),
            errors: self.config.errors(),
            penalty: self.config.penalty(),
            d_r: self.config.d_r,
        }
    }

    /// Records `g` as calibrated at option `index` by step `step`.
    pub fn assign(&mut self, g: ElementId, index: u32, step: usize) -> Result<(), CalibrationError> {
        if !self.in_goal(g) {
            return Err(CalibrationError::Contract(format!("{} is not in the calibration goal", self.graph.label(g))));
        }
        if self.is_calibrated(g) {
            return Err(CalibrationError::Contract(format!("{} is already calibrated", self.graph.label(g))));
        }
        if index >= self.config.k {
            return Err(CalibrationError::Contract(format!(
                "option index {index} out of range for k = {}",
                self.config.k
            )));
        }
        self.values[g.index()] = Some(index);
        self.status.push((g, step));
        Ok(())
    }

    /// Drops elements from the status and database; history order of the
    /// remaining entries is preserved.
    pub fn discard(&mut self, elements: &[ElementId]) {
        for &g in elements {
            self.values[g.index()] = None;
        }
        let values = &self.values;
        self.status.retain(|(g, _)| values[g.index()].is_some());
    }

    pub fn push_step(&mut self, record: StepRecord) {
        self.step_log.push(record);
    }

    /// Appends the steps and calibrated elements of `other`, a state over the
    /// same configuration (typically with a smaller goal). Step indices are
    /// renumbered to follow this state's log.
    pub fn import(&mut self, other: &CalibrationState) -> Result<(), CalibrationError> {
        if self.config.digest() != other.config.digest() {
            return Err(CalibrationError::Contract("cannot import a state built from another config".into()));
        }
        if let Some(&(g, _)) = other.status.iter().find(|&&(g, _)| !self.in_goal(g) || self.is_calibrated(g)) {
            return Err(CalibrationError::Contract(format!(
                "{} is outside the goal or already calibrated",
                self.graph.label(g)
            )));
        }
        let offset = self.step_log.len();
        for rec in &other.step_log {
            self.step_log.push(StepRecord { index: rec.index + offset, ..rec.clone() });
        }
        for &(g, step) in &other.status {
            self.values[g.index()] = other.values[g.index()];
            self.status.push((g, step + offset));
        }
        Ok(())
    }
}

/// The uncalibrated goal elements within `d_p` of `g`; always contains `g`.
pub fn build_parameters(g: ElementId, state: &CalibrationState) -> Result<Vec<ElementId>, CalibrationError> {
    if !state.in_goal(g) || state.is_calibrated(g) {
        return Err(CalibrationError::Contract(format!(
            "{} is not an uncalibrated goal element",
            state.graph().label(g)
        )));
    }
    Ok(state
        .graph()
        .connectivity_subgraph(g, state.config().d_p)
        .into_iter()
        .filter(|&h| state.in_goal(h) && !state.is_calibrated(h))
        .collect())
}

/// Calibrated elements within `d_r` of some parameter and co-active with it.
pub fn build_constraints(params: &[ElementId], state: &CalibrationState) -> Vec<ElementId> {
    let mut out: Vec<ElementId> = params
        .iter()
        .flat_map(|&g| {
            state
                .graph()
                .connectivity_subgraph(g, state.config().d_r)
                .into_iter()
                .filter(move |&h| state.is_calibrated(h) && state.activity().co_active(g, h))
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Identifies the random streams of a calibration run: which subgoal, and the
/// step-log length when the run started.
#[derive(Clone, Copy, Debug)]
struct StreamKey {
    subgoal: u64,
    base: u64,
}

const STANDALONE: u64 = u64::MAX;

impl StreamKey {
    fn standalone(state: &CalibrationState) -> Self {
        StreamKey { subgoal: STANDALONE, base: state.step_log.len() as u64 }
    }
}

fn step(
    g: ElementId,
    state: &mut CalibrationState,
    key: StreamKey,
    counter: u64,
) -> Result<StepRecord, CalibrationError> {
    let params = build_parameters(g, state)?;
    let constraints = build_constraints(&params, state);
    let objective = build_error_model(&state.model_context(), &params, &constraints, |r| state.value(r))?;
    let cfg = state.config();
    let seed = mix(&[cfg.seed, TAG_OPTIMIZER, key.subgoal, key.base, counter]);
    let optimum = optimize_error_model(&objective, cfg.budget, cfg.n_restarts, seed)?;

    let index = state.step_log.len();
    for (&p, &v) in objective.params().iter().zip(&optimum.assignment) {
        state.assign(p, v, index)?;
    }
    let record = StepRecord {
        index,
        central: g,
        parameter_count: objective.dimension(),
        constraint_count: constraints.len(),
        value: optimum.value,
    };
    state.step_log.push(record.clone());
    Ok(record)
}

/// One optimization step centred on `g`. The state is unchanged on error.
pub fn calibrate_element(g: ElementId, state: &mut CalibrationState) -> Result<StepRecord, CalibrationError> {
    let key = StreamKey::standalone(state);
    step(g, state, key, 0)
}

/// Traverses from `seed`, calibrating each visited uncalibrated element and
/// expanding its traversal options recomputed after the step. Options are
/// limited to `scope` when given. Returns the number of steps taken.
fn run_thread(
    seed: ElementId,
    state: &mut CalibrationState,
    scope: Option<&[bool]>,
    key: StreamKey,
    counter: &mut u64,
) -> Result<usize, CalibrationError> {
    let order = state.config().traversal_order;
    let mut frontier = VecDeque::from([seed]);
    let mut steps = 0;
    let next = |f: &mut VecDeque<ElementId>| match order {
        TraversalOrder::DepthFirst => f.pop_back(),
        TraversalOrder::BreadthFirst => f.pop_front(),
    };
    while let Some(g) = next(&mut frontier) {
        if state.is_calibrated(g) {
            continue;
        }
        step(g, state, key, *counter)?;
        *counter += 1;
        steps += 1;

        let mut options = traversal_candidates(g, state);
        if let Some(scope) = scope {
            options.retain(|h| scope[h.index()]);
        }
        let mut rng = stream(&[state.config().seed, TAG_OPTIONS, key.subgoal, key.base, *counter]);
        sort_options(&mut options, state, &mut rng);
        match order {
            // Reverse push keeps the first option on top, matching recursion.
            TraversalOrder::DepthFirst => frontier.extend(options.into_iter().rev()),
            TraversalOrder::BreadthFirst => frontier.extend(options),
        }
    }
    Ok(steps)
}

/// Calibrates everything reachable from `seed` by traversal. A calibrated
/// seed is a no-op. Progress made before an error is kept.
pub fn calibrate_thread(seed: ElementId, state: &mut CalibrationState) -> Result<usize, CalibrationError> {
    let key = StreamKey::standalone(state);
    let mut counter = 0;
    run_thread(seed, state, None, key, &mut counter)
}

struct SubgoalRun {
    threads: usize,
    seeds: usize,
    failure: Option<SubgoalFailure>,
}

fn run_subgoal(state: &mut CalibrationState, subgoal: &CalibrationSubgoal, base: u64) -> SubgoalRun {
    let key = StreamKey { subgoal: subgoal.id as u64, base };
    let mut scope = vec![false; state.graph().len()];
    for g in &subgoal.members {
        scope[g.index()] = true;
    }
    let threads = build_traversal_threads(subgoal, state);
    let mut counter = 0u64;
    let mut seeds = 0;
    for thread in &threads {
        // By-product calibration can split a thread; reseed until it is done.
        loop {
            let remaining: Vec<ElementId> =
                thread.members.iter().copied().filter(|&g| !state.is_calibrated(g)).collect();
            if remaining.is_empty() {
                break;
            }
            let open = TraversalThread { members: remaining, ..thread.clone() };
            let seed = build_traversal_seed(&open, state);
            seeds += 1;
            if let Err(err) = run_thread(seed, state, Some(&scope), key, &mut counter) {
                let calibrated = subgoal.members.iter().filter(|&&g| state.is_calibrated(g)).count();
                let cause = match err {
                    CalibrationError::Infeasible(cause) => cause,
                    other => panic!("unexpected calibration failure inside a subgoal: {other}"),
                };
                return SubgoalRun {
                    threads: threads.len(),
                    seeds,
                    failure: Some(SubgoalFailure {
                        subgoal: subgoal.id,
                        calibrated_before_abort: calibrated,
                        remaining: subgoal.members.len() - calibrated,
                        cause,
                    }),
                };
            }
        }
    }
    SubgoalRun { threads: threads.len(), seeds, failure: None }
}

/// Segments the open goal into subgoals and calibrates each, in parallel when
/// `config.parallel` is set.
pub fn calibrate_graph(state: &mut CalibrationState) -> Result<RunSummary, CalibrationError> {
    let parallel = state.config().parallel;
    calibrate_graph_with(state, parallel)
}

/// As [`calibrate_graph`] with an explicit schedule. Serial execution runs the
/// subgoals in order on the live state; parallel execution runs each on its
/// own snapshot and merges the results in subgoal order. Both produce the same
/// database and step log.
pub fn calibrate_graph_with(state: &mut CalibrationState, parallel: bool) -> Result<RunSummary, CalibrationError> {
    let subgoals = build_calibration_subgoals(state);
    let base = state.step_log.len() as u64;
    let mut summary = RunSummary { subgoals: subgoals.len(), ..RunSummary::default() };
    let mut failures = Vec::new();

    let mut record = |run: SubgoalRun, summary: &mut RunSummary| {
        summary.threads += run.threads;
        summary.seeds += run.seeds;
        if let Some(f) = run.failure {
            failures.push(f);
        }
    };

    if parallel {
        let status_start = state.status.len();
        let log_start = state.step_log.len();
        let snapshot: &CalibrationState = state;
        let outcomes: Vec<(SubgoalRun, CalibrationState)> = subgoals
            .par_iter()
            .map(|sg| {
                let mut local = snapshot.clone();
                let run = run_subgoal(&mut local, sg, base);
                (run, local)
            })
            .collect();
        for (run, local) in outcomes {
            let offset = state.step_log.len();
            for rec in &local.step_log[log_start..] {
                state.step_log.push(StepRecord { index: rec.index - log_start + offset, ..rec.clone() });
            }
            for &(g, step) in &local.status[status_start..] {
                let v = local.values[g.index()].expect("calibrated");
                state.values[g.index()] = Some(v);
                state.status.push((g, step - log_start + offset));
            }
            record(run, &mut summary);
        }
    } else {
        for sg in &subgoals {
            let run = run_subgoal(state, sg, base);
            record(run, &mut summary);
        }
    }

    summary.failed_subgoals = failures.len();
    state.last_run = Some(summary);
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(CalibrationError::SubgoalsFailed(failures))
    }
}

/// Discards the calibrated goal elements within `d_disc` of the expired
/// element, resamples its landscape, and re-runs graph calibration. Returns
/// the discarded elements.
pub fn recalibrate(
    state: &mut CalibrationState,
    expired: ElementId,
    d_disc: u32,
) -> Result<Vec<ElementId>, CalibrationError> {
    if !state.is_calibrated(expired) {
        return Err(CalibrationError::Contract(format!(
            "{} is not calibrated and cannot expire",
            state.graph().label(expired)
        )));
    }
    let discarded: Vec<ElementId> = state
        .graph()
        .connectivity_subgraph(expired, d_disc)
        .into_iter()
        .filter(|&h| state.in_goal(h) && state.is_calibrated(h))
        .collect();
    state.discard(&discarded);
    state.landscapes_mut().bump_epoch(expired);
    calibrate_graph(state)?;
    Ok(discarded)
}

/// Calibrates the open seams of a partially calibrated state. Calibrated
/// regions only act as constraints.
pub fn stitch(state: &mut CalibrationState) -> Result<RunSummary, CalibrationError> {
    calibrate_graph(state)
}
