//! Global reference: total system error of a full assignment, exact global
//! minimization for small instances, and hard-bound validation.
//!
//! Pair terms are enumerated here from scratch (every unordered goal pair within
//! `d_r`), independent of how the engine assembles its step objectives.

use std::collections::BTreeMap;

use crate::engine::CalibrationState;
use crate::error::OracleError;
use crate::graph::ElementId;
use crate::model::{element_error, is_incident, search_space, HARD_TOLERANCE};

pub type GlobalAssignment = BTreeMap<ElementId, u32>;

/// A co-active pair within `d_hard` detuned by less than `delta_hard`.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub a: ElementId,
    pub b: ElementId,
    pub distance: u32,
    pub detuning: f64,
    pub required: f64,
}

#[derive(Clone, Copy, Debug)]
struct Pair {
    a: usize,
    b: usize,
    distance: u32,
    coupled: bool,
    hard: bool,
}

/// Goal-indexed view of the global objective.
struct Problem {
    goal: Vec<ElementId>,
    freqs: Vec<f64>,
    /// [element][option]
    intrinsic: Vec<Vec<f64>>,
    pairs: Vec<Pair>,
    a_xt: f64,
    gamma_xt: f64,
    beta: f64,
    c_traj: f64,
    delta_hard: f64,
}

impl Problem {
    fn new(state: &CalibrationState) -> Self {
        let cfg = state.config();
        let graph = state.graph();
        let domain = cfg.domain();
        let freqs = domain.options();
        let goal = state.goal().to_vec();
        let errors = cfg.errors();
        let intrinsic = goal
            .iter()
            .map(|&g| freqs.iter().map(|&f| element_error(graph, state.landscapes(), &errors, g, f)).collect())
            .collect();
        let mut pairs = Vec::new();
        for (i, &g) in goal.iter().enumerate() {
            for h in graph.connectivity_subgraph(g, cfg.d_r) {
                if h <= g || !state.in_goal(h) || !state.activity().co_active(g, h) {
                    continue;
                }
                let j = goal.binary_search(&h).expect("goal is sorted");
                let distance = graph.distance(g, h);
                pairs.push(Pair {
                    a: i,
                    b: j,
                    distance,
                    coupled: cfg.couple_node_edge && is_incident(graph, g, h),
                    hard: distance <= cfg.d_hard,
                });
            }
        }
        Problem {
            goal,
            freqs,
            intrinsic,
            pairs,
            a_xt: cfg.a_xt,
            gamma_xt: cfg.gamma_xt(),
            beta: cfg.beta,
            c_traj: cfg.c_traj,
            delta_hard: cfg.delta_hard(),
        }
    }

    fn pair_value(&self, p: &Pair, x: f64, y: f64) -> f64 {
        let dx = x - y;
        let g2 = self.gamma_xt * self.gamma_xt;
        let mut v = self.a_xt * self.beta.powi(p.distance as i32) * g2 / (dx * dx + g2);
        if p.coupled {
            v += self.c_traj * dx * dx;
        }
        v
    }

    fn violates(&self, p: &Pair, x: f64, y: f64) -> bool {
        p.hard && (x - y).abs() + HARD_TOLERANCE < self.delta_hard
    }

    fn indices(
        &self,
        assignment: &GlobalAssignment,
        labels: impl Fn(ElementId) -> String,
    ) -> Result<Vec<u32>, OracleError> {
        self.goal
            .iter()
            .map(|g| assignment.get(g).copied().ok_or_else(|| OracleError::Incomplete(labels(*g))))
            .collect()
    }

    fn total(&self, x: &[u32]) -> f64 {
        let f = |i: usize| self.freqs[x[i] as usize];
        let mut sum: f64 = (0..self.goal.len()).map(|i| self.intrinsic[i][x[i] as usize]).sum();
        for p in &self.pairs {
            if self.violates(p, f(p.a), f(p.b)) {
                return f64::INFINITY;
            }
            sum += self.pair_value(p, f(p.a), f(p.b));
        }
        sum
    }
}

/// Total system error of a complete assignment over the goal: intrinsic errors
/// plus crosstalk over every co-active goal pair within `d_r`. Infinite when
/// any hard bound is violated.
pub fn total_system_error(state: &CalibrationState, assignment: &GlobalAssignment) -> Result<f64, OracleError> {
    let problem = Problem::new(state);
    let x = problem.indices(assignment, |g| state.graph().label(g))?;
    Ok(problem.total(&x))
}

/// Hard-bound violations among the calibrated goal elements.
pub fn validate(state: &CalibrationState) -> Vec<Violation> {
    let problem = Problem::new(state);
    let mut out = Vec::new();
    for p in &problem.pairs {
        let (a, b) = (problem.goal[p.a], problem.goal[p.b]);
        let (Some(x), Some(y)) = (state.frequency(a), state.frequency(b)) else {
            continue;
        };
        if problem.violates(p, x, y) {
            out.push(Violation { a, b, distance: p.distance, detuning: (x - y).abs(), required: problem.delta_hard });
        }
    }
    out
}

/// Exact global minimum of the total system error over the goal, by
/// branch-and-bound in goal order. Ties resolve to the lexicographically
/// smallest assignment. Refuses instances with more than `budget` complete
/// assignments.
pub fn global_brute_force(
    state: &CalibrationState,
    budget: u64,
) -> Result<Option<(GlobalAssignment, f64)>, OracleError> {
    let problem = Problem::new(state);
    let n = problem.goal.len();
    let k = problem.freqs.len();
    let required = search_space(k as u32, n);
    if required > u128::from(budget) {
        return Err(OracleError::BudgetExceeded { required, budget });
    }

    // Pairs keyed by their later element, so each is scored once its partner
    // is already fixed.
    let mut closing: Vec<Vec<&Pair>> = vec![Vec::new(); n];
    for p in &problem.pairs {
        closing[p.a.max(p.b)].push(p);
    }
    // Lower bound on the intrinsic error still to come from position i on.
    let mut tail = vec![0.0; n + 1];
    for i in (0..n).rev() {
        let min = problem.intrinsic[i].iter().copied().fold(f64::INFINITY, f64::min);
        tail[i] = tail[i + 1] + min;
    }

    struct Search<'a> {
        p: &'a Problem,
        closing: Vec<Vec<&'a Pair>>,
        tail: Vec<f64>,
        x: Vec<u32>,
        best: Option<(Vec<u32>, f64)>,
    }

    impl Search<'_> {
        fn bound(&self) -> f64 {
            self.best.as_ref().map_or(f64::INFINITY, |b| b.1)
        }

        fn go(&mut self, i: usize, partial: f64) {
            let n = self.x.len();
            if i == n {
                // Leaves are compared on the canonical sum so that exact ties
                // keep the lexicographically first assignment.
                let total = self.p.total(&self.x);
                if total < self.bound() {
                    self.best = Some((self.x.clone(), total));
                }
                return;
            }
            'options: for v in 0..self.p.freqs.len() as u32 {
                let fx = self.p.freqs[v as usize];
                let mut value = partial + self.p.intrinsic[i][v as usize];
                for pair in &self.closing[i] {
                    let other = if pair.a == i { pair.b } else { pair.a };
                    let fy = self.p.freqs[self.x[other] as usize];
                    if self.p.violates(pair, fx, fy) {
                        continue 'options;
                    }
                    value += self.p.pair_value(pair, fx, fy);
                }
                // Slack absorbs summation-order rounding against the canonical bound.
                if value + self.tail[i + 1] > self.bound() * (1.0 + 1e-12) {
                    continue;
                }
                self.x[i] = v;
                self.go(i + 1, value);
            }
        }
    }

    let mut search = Search { p: &problem, closing, tail, x: vec![0; n], best: None };
    search.go(0, 0.0);
    Ok(search.best.map(|(x, value)| (problem.goal.iter().copied().zip(x).collect(), value)))
}
