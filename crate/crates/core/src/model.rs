//! Synthetic gate-frequency error model and the per-step optimizer.
//!
//! This is a stand-in for a physically calibrated model. Each node carries a
//! frequency-dependent error curve made of Lorentzian defect peaks over a flat
//! floor; an engineered edge inherits the mean of its endpoint curves plus its
//! own floor. Nearby co-active elements pay a Lorentzian crosstalk penalty that
//! decays with meta-distance, and a hard minimum detuning applies within
//! `d_hard`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::algorithm::ActivitySet;
use crate::error::{InfeasibleStep, ModelError};
use crate::graph::{ElementId, ElementKind, ProcessorGraph};
use crate::rng::{stream, TAG_DEFECTS};

/// Absolute slack (frequency units) on the closed hard-detuning bound, so an
/// option pair exactly `delta_hard` apart is never rejected by rounding.
pub const HARD_TOLERANCE: f64 = 1e-9;

pub const MAX_DEFECTS: u64 = 8;
const DEFECT_AMPLITUDE: (f64, f64) = (0.5, 5.0);
const DEFECT_WIDTH: (f64, f64) = (0.005, 0.025);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyDomain {
    k: u32,
    f_min: f64,
    f_max: f64,
}

impl FrequencyDomain {
    pub fn new(k: u32, f_min: f64, f_max: f64) -> Result<Self, String> {
        if k == 0 {
            return Err("k must be at least 1".into());
        }
        if !(f_min.is_finite() && f_max.is_finite()) || f_max <= f_min {
            return Err(format!("band [{f_min}, {f_max}] must be finite with f_max > f_min"));
        }
        Ok(FrequencyDomain { k, f_min, f_max })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn band(&self) -> f64 {
        self.f_max - self.f_min
    }

    /// Spacing between adjacent options; the whole band when `k == 1`.
    pub fn step(&self) -> f64 {
        if self.k == 1 {
            self.band()
        } else {
            self.band() / f64::from(self.k - 1)
        }
    }

    #[inline]
    pub fn value(&self, index: u32) -> f64 {
        debug_assert!(index < self.k);
        if self.k == 1 {
            self.f_min
        } else {
            self.f_min + self.band() * f64::from(index) / f64::from(self.k - 1)
        }
    }

    pub fn options(&self) -> Vec<f64> {
        (0..self.k).map(|i| self.value(i)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Defect {
    pub center: f64,
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DefectLandscape {
    pub defects: Vec<Defect>,
}

impl DefectLandscape {
    #[inline]
    pub fn eval(&self, f: f64) -> f64 {
        self.defects.iter().map(|d| d.amplitude * lorentzian(f - d.center, d.width)).sum()
    }
}

#[inline]
fn lorentzian(detuning: f64, width: f64) -> f64 {
    let w2 = width * width;
    w2 / (detuning * detuning + w2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorModelConfig {
    /// Node error floor.
    pub eps0: f64,
    /// Additional edge error floor.
    pub eps1: f64,
    /// Mean defect count per sampled landscape.
    pub defect_lambda: f64,
}

impl Default for ErrorModelConfig {
    fn default() -> Self {
        ErrorModelConfig { eps0: 0.001, eps1: 0.004, defect_lambda: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyConfig {
    pub a_xt: f64,
    pub gamma_xt: f64,
    /// Attenuation per meta-step, in (0, 1].
    pub beta: f64,
    pub delta_hard: f64,
    pub d_hard: u32,
    pub couple_node_edge: bool,
    pub c_traj: f64,
}

/// Per-element defect landscapes, derived from (run seed, element, epoch).
///
/// Nodes are sampled at every epoch. Engineered edges have no defects of their
/// own until their first expiry, after which they are sampled like nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Landscapes {
    seed: u64,
    domain: FrequencyDomain,
    config: ErrorModelConfig,
    kinds: Vec<ElementKind>,
    epochs: Vec<u32>,
    curves: Vec<DefectLandscape>,
}

impl Landscapes {
    pub fn new(graph: &ProcessorGraph, domain: FrequencyDomain, config: ErrorModelConfig, seed: u64) -> Self {
        let kinds: Vec<ElementKind> = graph.elements().iter().map(|e| e.kind).collect();
        let curves = graph.ids().map(|id| sample_landscape(seed, id, kinds[id.index()], 0, &domain, &config)).collect();
        Landscapes { seed, domain, config, epochs: vec![0; kinds.len()], kinds, curves }
    }

    pub fn landscape(&self, id: ElementId) -> &DefectLandscape {
        &self.curves[id.index()]
    }

    pub fn epoch(&self, id: ElementId) -> u32 {
        self.epochs[id.index()]
    }

    pub fn set_epoch(&mut self, id: ElementId, epoch: u32) {
        let i = id.index();
        if self.epochs[i] != epoch {
            self.epochs[i] = epoch;
            self.curves[i] = sample_landscape(self.seed, id, self.kinds[i], epoch, &self.domain, &self.config);
        }
    }

    /// Advances the element's epoch and resamples its landscape (drift).
    pub fn bump_epoch(&mut self, id: ElementId) {
        let next = self.epochs[id.index()] + 1;
        self.set_epoch(id, next);
    }

    /// Elements with a non-zero epoch, in id order.
    pub fn drifted(&self) -> Vec<(ElementId, u32)> {
        self.epochs.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, &e)| (ElementId(i as u32), e)).collect()
    }
}

pub fn sample_landscape(
    seed: u64,
    id: ElementId,
    kind: ElementKind,
    epoch: u32,
    domain: &FrequencyDomain,
    config: &ErrorModelConfig,
) -> DefectLandscape {
    let sampled = match kind {
        ElementKind::Node => true,
        ElementKind::Engineered => epoch > 0,
        ElementKind::Parasitic => false,
    };
    if !sampled || config.defect_lambda <= 0.0 {
        return DefectLandscape::default();
    }
    let mut rng = stream(&[seed, TAG_DEFECTS, u64::from(id.0), u64::from(epoch)]);
    let poisson = Poisson::new(config.defect_lambda).expect("positive lambda");
    let count = (poisson.sample(&mut rng) as u64).min(MAX_DEFECTS);
    let band = domain.band();
    let defects = (0..count)
        .map(|_| Defect {
            center: rng.random_range(domain.f_min()..=domain.f_max()),
            amplitude: config.eps0 * rng.random_range(DEFECT_AMPLITUDE.0..=DEFECT_AMPLITUDE.1),
            width: band * rng.random_range(DEFECT_WIDTH.0..=DEFECT_WIDTH.1),
        })
        .collect();
    DefectLandscape { defects }
}

/// Intrinsic error of running `element` at frequency `f`.
///
/// Panics on parasitic edges, which carry no parameters.
pub fn element_error(
    graph: &ProcessorGraph,
    landscapes: &Landscapes,
    config: &ErrorModelConfig,
    element: ElementId,
    f: f64,
) -> f64 {
    let node_error = |n: ElementId| config.eps0 + landscapes.landscape(n).eval(f);
    let e = graph.element(element);
    match e.kind {
        ElementKind::Node => node_error(element),
        ElementKind::Engineered => {
            let (a, b) = e.endpoints.expect("edge has endpoints");
            config.eps1 + 0.5 * (node_error(a) + node_error(b)) + landscapes.landscape(element).eval(f)
        }
        ElementKind::Parasitic => panic!("element_error queried on parasitic edge {e}"),
    }
}

/// True when one element is an engineered edge and the other is one of its
/// endpoints.
pub fn is_incident(graph: &ProcessorGraph, g: ElementId, h: ElementId) -> bool {
    let touches = |edge: ElementId, node: ElementId| {
        let e = graph.element(edge);
        e.kind == ElementKind::Engineered && e.endpoints.is_some_and(|(a, b)| a == node || b == node)
    };
    touches(g, h) || touches(h, g)
}

#[inline]
fn soft_penalty(cfg: &PenaltyConfig, d: u32, coupled: bool, x: f64, y: f64) -> f64 {
    let dx = x - y;
    let mut value = cfg.a_xt * cfg.beta.powi(d as i32) * lorentzian(dx, cfg.gamma_xt);
    if coupled {
        value += cfg.c_traj * dx * dx;
    }
    value
}

/// Soft crosstalk penalty between `g` at `x` and `h` at `y`, `d` meta-steps
/// apart. Symmetric under swapping `(g, x)` with `(h, y)`.
pub fn pair_penalty(
    graph: &ProcessorGraph,
    g: ElementId,
    h: ElementId,
    x: f64,
    y: f64,
    d: u32,
    cfg: &PenaltyConfig,
) -> f64 {
    let coupled = cfg.couple_node_edge && is_incident(graph, g, h);
    soft_penalty(cfg, d, coupled, x, y)
}

/// Closed minimum-detuning bound: infeasible only when the pair is co-active,
/// within `d_hard`, and detuned by strictly less than `delta_hard`.
pub fn hard_feasible(
    activity: &ActivitySet,
    g: ElementId,
    h: ElementId,
    x: f64,
    y: f64,
    d: u32,
    cfg: &PenaltyConfig,
) -> bool {
    !(d <= cfg.d_hard && activity.co_active(g, h) && detuning_violates(cfg, x, y))
}

#[inline]
fn detuning_violates(cfg: &PenaltyConfig, x: f64, y: f64) -> bool {
    (x - y).abs() + HARD_TOLERANCE < cfg.delta_hard
}

/// Everything a step objective reads from the calibration state.
#[derive(Clone, Copy)]
pub struct ModelContext<'a> {
    pub graph: &'a ProcessorGraph,
    pub activity: &'a ActivitySet,
    pub landscapes: &'a Landscapes,
    pub domain: FrequencyDomain,
    pub errors: ErrorModelConfig,
    pub penalty: PenaltyConfig,
    pub d_r: u32,
}

#[derive(Clone, Copy, Debug)]
struct PairTerm {
    lo: usize,
    hi: usize,
    distance: u32,
    coupled: bool,
    hard: bool,
}

/// Step objective over the grid indices of the parameter elements.
#[derive(Clone, Debug)]
pub struct LocalObjective {
    params: Vec<ElementId>,
    labels: Vec<String>,
    domain: FrequencyDomain,
    penalty: PenaltyConfig,
    /// [param][option]: intrinsic error plus penalties against fixed constraints.
    unary: Vec<Vec<f64>>,
    unary_ok: Vec<Vec<bool>>,
    /// Constraint elements within hard range of each parameter.
    blockers: Vec<Vec<(ElementId, String)>>,
    pairs: Vec<PairTerm>,
    /// pairs whose `hi` is this parameter, in `lo` order.
    incoming: Vec<Vec<usize>>,
    /// all pairs touching this parameter.
    touching: Vec<Vec<usize>>,
    constraint_count: usize,
}

/// Builds the step objective for parameters `params` under the calibrated
/// `constraints`, whose values `fixed` must provide.
pub fn build_error_model(
    ctx: &ModelContext<'_>,
    params: &[ElementId],
    constraints: &[ElementId],
    fixed: impl Fn(ElementId) -> Option<u32>,
) -> Result<LocalObjective, ModelError> {
    let mut params = params.to_vec();
    params.sort_unstable();
    params.dedup();
    if params.is_empty() {
        return Err(ModelError::NoParameters);
    }
    let graph = ctx.graph;
    let fixed_values: Vec<(ElementId, f64)> = constraints
        .iter()
        .map(|&r| {
            fixed(r).map(|i| (r, ctx.domain.value(i))).ok_or_else(|| ModelError::MissingAssignment(graph.label(r)))
        })
        .collect::<Result<_, _>>()?;

    let k = ctx.domain.k();
    let options = ctx.domain.options();
    let mut unary = Vec::with_capacity(params.len());
    let mut unary_ok = Vec::with_capacity(params.len());
    let mut blockers = Vec::with_capacity(params.len());
    for &g in &params {
        let relevant: Vec<(ElementId, f64, u32)> = fixed_values
            .iter()
            .filter_map(|&(r, y)| {
                let d = graph.distance(g, r);
                (d <= ctx.d_r && ctx.activity.co_active(g, r)).then_some((r, y, d))
            })
            .collect();
        let mut row = Vec::with_capacity(k as usize);
        let mut ok_row = Vec::with_capacity(k as usize);
        for &x in &options {
            let mut value = element_error(graph, ctx.landscapes, &ctx.errors, g, x);
            let mut ok = true;
            for &(r, y, d) in &relevant {
                value += pair_penalty(graph, g, r, x, y, d, &ctx.penalty);
                ok &= hard_feasible(ctx.activity, g, r, x, y, d, &ctx.penalty);
            }
            row.push(value);
            ok_row.push(ok);
        }
        unary.push(row);
        unary_ok.push(ok_row);
        blockers.push(
            relevant
                .iter()
                .filter(|(_, _, d)| *d <= ctx.penalty.d_hard)
                .map(|&(r, _, _)| (r, graph.label(r)))
                .collect(),
        );
    }

    let n = params.len();
    let mut pairs = Vec::new();
    let mut incoming = vec![Vec::new(); n];
    let mut touching = vec![Vec::new(); n];
    for hi in 0..n {
        for lo in 0..hi {
            let (g, h) = (params[lo], params[hi]);
            let d = graph.distance(g, h);
            if d <= ctx.d_r && ctx.activity.co_active(g, h) {
                let idx = pairs.len();
                pairs.push(PairTerm {
                    lo,
                    hi,
                    distance: d,
                    coupled: ctx.penalty.couple_node_edge && is_incident(graph, g, h),
                    hard: d <= ctx.penalty.d_hard,
                });
                incoming[hi].push(idx);
                touching[hi].push(idx);
                touching[lo].push(idx);
            }
        }
    }

    Ok(LocalObjective {
        labels: params.iter().map(|&p| graph.label(p)).collect(),
        params,
        domain: ctx.domain,
        penalty: ctx.penalty,
        unary,
        unary_ok,
        blockers,
        pairs,
        incoming,
        touching,
        constraint_count: constraints.len(),
    })
}

impl LocalObjective {
    /// Parameter elements in canonical (id) order; assignment vectors follow it.
    pub fn params(&self) -> &[ElementId] {
        &self.params
    }

    pub fn dimension(&self) -> usize {
        self.params.len()
    }

    pub fn domain(&self) -> &FrequencyDomain {
        &self.domain
    }

    pub fn constraint_count(&self) -> usize {
        self.constraint_count
    }

    /// Number of unordered parameter pairs carrying a penalty term.
    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    #[inline]
    fn pair_value(&self, t: &PairTerm, x_lo: u32, x_hi: u32) -> f64 {
        soft_penalty(&self.penalty, t.distance, t.coupled, self.domain.value(x_lo), self.domain.value(x_hi))
    }

    #[inline]
    fn pair_ok(&self, t: &PairTerm, x_lo: u32, x_hi: u32) -> bool {
        !(t.hard && detuning_violates(&self.penalty, self.domain.value(x_lo), self.domain.value(x_hi)))
    }

    /// Total step error of an assignment (grid indices, canonical order).
    pub fn evaluate(&self, x: &[u32]) -> f64 {
        assert_eq!(x.len(), self.params.len());
        let mut acc = 0.0;
        for hi in 0..x.len() {
            acc += self.unary[hi][x[hi] as usize];
            for &t in &self.incoming[hi] {
                let term = &self.pairs[t];
                acc += self.pair_value(term, x[term.lo], x[hi]);
            }
        }
        acc
    }

    /// Hard feasibility against the fixed constraints and between parameters.
    pub fn is_feasible(&self, x: &[u32]) -> bool {
        assert_eq!(x.len(), self.params.len());
        x.iter().enumerate().all(|(i, &v)| self.unary_ok[i][v as usize])
            && self.pairs.iter().all(|t| self.pair_ok(t, x[t.lo], x[t.hi]))
    }

    fn compatible_with_prefix(&self, x: &[u32], hi: usize, v: u32) -> bool {
        self.unary_ok[hi][v as usize]
            && self.incoming[hi].iter().all(|&t| {
                let term = &self.pairs[t];
                self.pair_ok(term, x[term.lo], v)
            })
    }

    fn infeasible(&self, at: usize) -> InfeasibleStep {
        let mut blocking: Vec<(ElementId, String)> = self.blockers[at].clone();
        for &t in &self.touching[at] {
            let term = &self.pairs[t];
            if term.hard {
                let other = if term.lo == at { term.hi } else { term.lo };
                blocking.push((self.params[other], self.labels[other].clone()));
            }
        }
        blocking.sort();
        blocking.dedup();
        InfeasibleStep {
            element: self.params[at],
            element_label: self.labels[at].clone(),
            blocking: blocking.iter().map(|b| b.0).collect(),
            blocking_labels: blocking.into_iter().map(|b| b.1).collect(),
        }
    }

    /// First parameter without any option compatible with the fixed
    /// constraints, otherwise the deepest failure point of a search.
    fn diagnose(&self, deepest: usize) -> InfeasibleStep {
        let blocked = (0..self.params.len()).find(|&i| !self.unary_ok[i].iter().any(|&ok| ok));
        self.infeasible(blocked.unwrap_or(deepest))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    Exhaustive,
    CoordinateDescent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimum {
    pub assignment: Vec<u32>,
    pub value: f64,
    pub mode: SearchMode,
}

/// `k^n`, saturating.
pub fn search_space(k: u32, n: usize) -> u128 {
    let mut total: u128 = 1;
    for _ in 0..n {
        total = total.saturating_mul(u128::from(k));
    }
    total
}

/// Exhaustive search when `k^|P| <= budget`, seeded coordinate descent with
/// random feasible restarts otherwise.
pub fn optimize_error_model(
    objective: &LocalObjective,
    budget: u64,
    n_restarts: u32,
    seed: u64,
) -> Result<Optimum, InfeasibleStep> {
    if search_space(objective.domain.k(), objective.dimension()) <= u128::from(budget) {
        exhaustive_search(objective)
    } else {
        coordinate_descent(objective, n_restarts, seed)
    }
}

/// Global minimum over all feasible assignments; ties resolve to the
/// lexicographically smallest assignment.
pub fn exhaustive_search(objective: &LocalObjective) -> Result<Optimum, InfeasibleStep> {
    struct Search<'a> {
        obj: &'a LocalObjective,
        current: Vec<u32>,
        best: Option<(Vec<u32>, f64)>,
        deepest_fail: usize,
    }

    impl Search<'_> {
        fn descend(&mut self, hi: usize, partial: f64) {
            let n = self.obj.params.len();
            if hi == n {
                if self.best.as_ref().is_none_or(|(_, b)| partial < *b) {
                    self.best = Some((self.current.clone(), partial));
                }
                return;
            }
            let mut any = false;
            for v in 0..self.obj.domain.k() {
                if !self.obj.compatible_with_prefix(&self.current, hi, v) {
                    continue;
                }
                any = true;
                let mut value = partial + self.obj.unary[hi][v as usize];
                for &t in &self.obj.incoming[hi] {
                    let term = &self.obj.pairs[t];
                    value += self.obj.pair_value(term, self.current[term.lo], v);
                }
                // Every term is non-negative, so a prefix already worse than the
                // incumbent cannot complete to a better (or tying-earlier) optimum.
                if self.best.as_ref().is_some_and(|(_, b)| value > *b) {
                    continue;
                }
                self.current[hi] = v;
                self.descend(hi + 1, value);
            }
            if !any {
                self.deepest_fail = self.deepest_fail.max(hi);
            }
        }
    }

    let mut search = Search { obj: objective, current: vec![0; objective.dimension()], best: None, deepest_fail: 0 };
    search.descend(0, 0.0);
    match search.best {
        Some((assignment, value)) => Ok(Optimum { assignment, value, mode: SearchMode::Exhaustive }),
        None => Err(objective.diagnose(search.deepest_fail)),
    }
}

/// Randomized depth-first search for any feasible assignment.
fn random_feasible_start(objective: &LocalObjective, rng: &mut impl Rng) -> Result<Vec<u32>, usize> {
    fn descend(
        obj: &LocalObjective,
        orders: &[Vec<u32>],
        current: &mut Vec<u32>,
        hi: usize,
        deepest: &mut usize,
    ) -> bool {
        if hi == obj.params.len() {
            return true;
        }
        let mut any = false;
        for &v in &orders[hi] {
            if obj.compatible_with_prefix(current, hi, v) {
                any = true;
                current[hi] = v;
                if descend(obj, orders, current, hi + 1, deepest) {
                    return true;
                }
            }
        }
        if !any {
            *deepest = (*deepest).max(hi);
        }
        false
    }

    let orders: Vec<Vec<u32>> = (0..objective.dimension())
        .map(|i| {
            let mut opts: Vec<u32> = (0..objective.domain.k()).filter(|&v| objective.unary_ok[i][v as usize]).collect();
            opts.shuffle(rng);
            opts
        })
        .collect();
    let mut current = vec![0; objective.dimension()];
    let mut deepest = 0;
    if descend(objective, &orders, &mut current, 0, &mut deepest) {
        Ok(current)
    } else {
        Err(deepest)
    }
}

/// Coordinate descent from `n_restarts` random feasible starts. Each sweep
/// moves a coordinate only on strict improvement, so it terminates at a
/// coordinate-wise local minimum.
pub fn coordinate_descent(objective: &LocalObjective, n_restarts: u32, seed: u64) -> Result<Optimum, InfeasibleStep> {
    let mut rng = stream(&[seed]);
    let n = objective.dimension();
    let local = |x: &[u32], i: usize, v: u32| -> f64 {
        let mut value = objective.unary[i][v as usize];
        for &t in &objective.touching[i] {
            let term = &objective.pairs[t];
            value += if term.lo == i {
                objective.pair_value(term, v, x[term.hi])
            } else {
                objective.pair_value(term, x[term.lo], v)
            };
        }
        value
    };
    let feasible_at = |x: &[u32], i: usize, v: u32| -> bool {
        objective.unary_ok[i][v as usize]
            && objective.touching[i].iter().all(|&t| {
                let term = &objective.pairs[t];
                if term.lo == i {
                    objective.pair_ok(term, v, x[term.hi])
                } else {
                    objective.pair_ok(term, x[term.lo], v)
                }
            })
    };

    let mut best: Option<(Vec<u32>, f64)> = None;
    for _ in 0..n_restarts.max(1) {
        let mut x = random_feasible_start(objective, &mut rng).map_err(|deepest| objective.diagnose(deepest))?;
        loop {
            let mut moved = false;
            for i in 0..n {
                let mut best_v = x[i];
                let mut best_local = local(&x, i, x[i]);
                for v in 0..objective.domain.k() {
                    if v == x[i] || !feasible_at(&x, i, v) {
                        continue;
                    }
                    let candidate = local(&x, i, v);
                    if candidate < best_local {
                        best_local = candidate;
                        best_v = v;
                    }
                }
                if best_v != x[i] {
                    x[i] = best_v;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        let value = objective.evaluate(&x);
        let better = match &best {
            None => true,
            Some((bx, bv)) => value < *bv || (value == *bv && x < *bx),
        };
        if better {
            best = Some((x, value));
        }
    }
    let (assignment, value) = best.expect("at least one restart");
    Ok(Optimum { assignment, value, mode: SearchMode::CoordinateDescent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithm::AlgorithmMode;
    use crate::graph::build_grid_graph;

    fn penalty() -> PenaltyConfig {
        PenaltyConfig {
            a_xt: 0.01,
            gamma_xt: 0.02,
            beta: 0.5,
            delta_hard: 0.1,
            d_hard: 2,
            couple_node_edge: false,
            c_traj: 0.01,
        }
    }

    struct Fixture {
        graph: ProcessorGraph,
        activity: ActivitySet,
        landscapes: Landscapes,
        domain: FrequencyDomain,
        errors: ErrorModelConfig,
    }

    impl Fixture {
        fn new(rows: u32, cols: u32, k: u32, mode: AlgorithmMode, lambda: f64) -> Self {
            let graph = build_grid_graph(rows, cols);
            let goal: Vec<_> =
                graph.elements().iter().filter(|e| e.kind != ElementKind::Parasitic).map(|e| e.id).collect();
            let activity = ActivitySet::build(&graph, &goal, mode);
            let domain = FrequencyDomain::new(k, 5.0, 7.0).unwrap();
            let errors = ErrorModelConfig { defect_lambda: lambda, ..Default::default() };
            let landscapes = Landscapes::new(&graph, domain, errors, 7);
            Fixture { graph, activity, landscapes, domain, errors }
        }

        fn ctx(&self, penalty: PenaltyConfig) -> ModelContext<'_> {
            ModelContext {
                graph: &self.graph,
                activity: &self.activity,
                landscapes: &self.landscapes,
                domain: self.domain,
                errors: self.errors,
                penalty,
                d_r: 4,
            }
        }
    }

    #[test]
    fn domain_options() {
        let d = FrequencyDomain::new(5, 5.0, 7.0).unwrap();
        assert_eq!(d.options(), vec![5.0, 5.5, 6.0, 6.5, 7.0]);
        let single = FrequencyDomain::new(1, 5.0, 7.0).unwrap();
        assert_eq!(single.options(), vec![5.0]);
        assert!(FrequencyDomain::new(0, 5.0, 7.0).is_err());
        assert!(FrequencyDomain::new(3, 7.0, 5.0).is_err());
    }

    #[test]
    fn element_error_examples() {
        let fx = Fixture::new(2, 2, 5, AlgorithmMode::Xeb, 0.0);
        let n = fx.graph.node_at(0, 0).unwrap();
        let e = fx.graph.edge_at(0, 0, crate::graph::Orientation::Horizontal).unwrap();
        for f in fx.domain.options() {
            assert_eq!(element_error(&fx.graph, &fx.landscapes, &fx.errors, n, f), 0.001);
            assert_eq!(element_error(&fx.graph, &fx.landscapes, &fx.errors, e, f), 0.004 + 0.001);
        }

        let mut fx = Fixture::new(1, 1, 5, AlgorithmMode::Xeb, 0.0);
        let n = fx.graph.node_at(0, 0).unwrap();
        fx.landscapes.curves[n.index()] =
            DefectLandscape { defects: vec![Defect { center: 6.0, amplitude: 0.003, width: 0.02 }] };
        let at_peak = element_error(&fx.graph, &fx.landscapes, &fx.errors, n, 6.0);
        assert!((at_peak - (0.001 + 0.003)).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "parasitic")]
    fn parasitic_error_is_a_programming_error() {
        let fx = Fixture::new(2, 2, 3, AlgorithmMode::Xeb, 0.0);
        let p = fx.graph.edge_at(0, 0, crate::graph::Orientation::Diagonal).unwrap();
        element_error(&fx.graph, &fx.landscapes, &fx.errors, p, 5.0);
    }

    #[test]
    fn pair_penalty_examples() {
        let g = build_grid_graph(2, 2);
        let a = g.node_at(0, 0).unwrap();
        let b = g.node_at(0, 1).unwrap();
        let cfg = penalty();
        let at_zero = pair_penalty(&g, a, b, 6.0, 6.0, 2, &cfg);
        assert!((at_zero - 0.01 * 0.25).abs() < 1e-15);
        let mut last = at_zero;
        for step in 1..20 {
            let v = pair_penalty(&g, a, b, 6.0, 6.0 + 0.05 * f64::from(step), 2, &cfg);
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-4 * at_zero * 100.0);
        assert_eq!(pair_penalty(&g, a, b, 5.3, 6.1, 2, &cfg), pair_penalty(&g, b, a, 6.1, 5.3, 2, &cfg));

        let e = g.edge_at(0, 0, crate::graph::Orientation::Horizontal).unwrap();
        let coupled = PenaltyConfig { couple_node_edge: true, ..cfg };
        let with = pair_penalty(&g, a, e, 5.0, 6.0, 1, &coupled);
        let without = pair_penalty(&g, a, e, 5.0, 6.0, 1, &cfg);
        assert!((with - without - 0.01).abs() < 1e-15);
    }

    #[test]
    fn hard_bound_examples() {
        let fx = Fixture::new(2, 2, 3, AlgorithmMode::Xeb, 0.0);
        let a = fx.graph.node_at(0, 0).unwrap();
        let b = fx.graph.node_at(0, 1).unwrap();
        let cfg = penalty();
        assert!(hard_feasible(&fx.activity, a, b, 6.0, 6.0, 3, &cfg));
        assert!(hard_feasible(&fx.activity, a, b, 6.0, 6.1, 1, &cfg));
        assert!(!hard_feasible(&fx.activity, a, b, 6.0, 6.0, 1, &cfg));
        assert!(!hard_feasible(&fx.activity, a, b, 6.0, 6.05, 2, &cfg));
        assert_eq!(
            hard_feasible(&fx.activity, a, b, 6.0, 6.05, 2, &cfg),
            hard_feasible(&fx.activity, b, a, 6.05, 6.0, 2, &cfg)
        );
        // Node and edge are never co-active under XEB.
        let e = fx.graph.edge_at(0, 0, crate::graph::Orientation::Horizontal).unwrap();
        assert!(hard_feasible(&fx.activity, a, e, 6.0, 6.0, 1, &cfg));
    }

    #[test]
    fn objective_examples() {
        let fx = Fixture::new(2, 2, 4, AlgorithmMode::Xeb, 0.0);
        let ctx = fx.ctx(penalty());
        let a = fx.graph.node_at(0, 0).unwrap();
        let single = build_error_model(&ctx, &[a], &[], |_| None).unwrap();
        for v in 0..4 {
            assert_eq!(single.evaluate(&[v]), 0.001);
        }
        let b = fx.graph.node_at(0, 1).unwrap();
        let pair = build_error_model(&ctx, &[a, b], &[], |_| None).unwrap();
        assert_eq!(pair.pair_count(), 1);
        assert_eq!(pair.evaluate(&[1, 3]), pair.evaluate(&[1, 3]));

        let missing = build_error_model(&ctx, &[a], &[b], |_| None);
        assert!(matches!(missing, Err(ModelError::MissingAssignment(_))));
        assert!(matches!(build_error_model(&ctx, &[], &[], |_| None), Err(ModelError::NoParameters)));
    }

    #[test]
    fn exhaustive_avoids_a_defect_peak() {
        let mut fx = Fixture::new(1, 1, 4, AlgorithmMode::Xeb, 0.0);
        let n = fx.graph.node_at(0, 0).unwrap();
        let f2 = fx.domain.value(2);
        fx.landscapes.curves[n.index()] =
            DefectLandscape { defects: vec![Defect { center: f2, amplitude: 0.004, width: 0.3 }] };
        // Hand values: option distances from the peak are 2,1,0,1 steps of 2/3.
        let expected: Vec<f64> = (0..4)
            .map(|i| {
                let dx = (f64::from(i) - 2.0) * 2.0 / 3.0;
                0.001 + 0.004 * 0.09 / (dx * dx + 0.09)
            })
            .collect();
        let ctx = fx.ctx(penalty());
        let obj = build_error_model(&ctx, &[n], &[], |_| None).unwrap();
        for (i, e) in expected.iter().enumerate() {
            assert!((obj.evaluate(&[i as u32]) - e).abs() < 1e-15);
        }
        let best = exhaustive_search(&obj).unwrap();
        assert_eq!(best.assignment, vec![0]);
        assert_ne!(best.assignment, vec![2]);
    }

    #[test]
    fn single_option_with_hard_neighbors_is_infeasible() {
        let fx = Fixture::new(1, 2, 1, AlgorithmMode::Xeb, 0.0);
        let ctx = fx.ctx(penalty());
        let a = fx.graph.node_at(0, 0).unwrap();
        let b = fx.graph.node_at(0, 1).unwrap();
        let obj = build_error_model(&ctx, &[a, b], &[], |_| None).unwrap();
        let err = optimize_error_model(&obj, 1 << 20, 4, 1).unwrap_err();
        assert!(err.blocking.contains(&a) || err.blocking.contains(&b));
        let err = coordinate_descent(&obj, 4, 1).unwrap_err();
        assert!(err.to_string().contains("increase k"));

        // Blocked by a fixed constraint.
        let obj = build_error_model(&ctx, &[b], &[a], |_| Some(0)).unwrap();
        let err = exhaustive_search(&obj).unwrap_err();
        assert_eq!(err.element, b);
        assert_eq!(err.blocking, vec![a]);
    }

    #[test]
    fn coordinate_descent_never_beats_exhaustive() {
        let fx = Fixture::new(2, 3, 6, AlgorithmMode::Unstructured, 2.0);
        let ctx = fx.ctx(PenaltyConfig { d_hard: 1, delta_hard: 0.3, ..penalty() });
        let params: Vec<_> = fx.graph.nodes().map(|e| e.id).take(4).collect();
        let obj = build_error_model(&ctx, &params, &[], |_| None).unwrap();
        let exact = exhaustive_search(&obj).unwrap();
        assert_eq!(exact.value, obj.evaluate(&exact.assignment));
        for seed in 0..10 {
            let cd = coordinate_descent(&obj, 3, seed).unwrap();
            assert!(obj.is_feasible(&cd.assignment));
            assert!(cd.value >= exact.value);
            assert_eq!(cd, coordinate_descent(&obj, 3, seed).unwrap());
        }
    }

    #[test]
    fn exhaustive_matches_plain_enumeration() {
        let fx = Fixture::new(2, 2, 4, AlgorithmMode::Unstructured, 2.0);
        let ctx = fx.ctx(PenaltyConfig { d_hard: 1, delta_hard: 0.5, ..penalty() });
        let params: Vec<_> =
            fx.graph.elements().iter().filter(|e| e.kind != ElementKind::Parasitic).map(|e| e.id).take(5).collect();
        let obj = build_error_model(&ctx, &params, &[], |_| None).unwrap();
        let mut best: Option<(Vec<u32>, f64)> = None;
        let n = params.len();
        for code in 0..4u32.pow(n as u32) {
            let x: Vec<u32> = (0..n).rev().map(|i| (code / 4u32.pow(i as u32)) % 4).collect();
            if !obj.is_feasible(&x) {
                continue;
            }
            let v = obj.evaluate(&x);
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((x, v));
            }
        }
        let (x, v) = best.unwrap();
        let exact = exhaustive_search(&obj).unwrap();
        assert_eq!(exact.assignment, x);
        assert_eq!(exact.value, v);
    }

    #[test]
    fn landscapes_depend_only_on_seed_element_epoch() {
        let fx = Fixture::new(3, 3, 10, AlgorithmMode::Xeb, 2.0);
        let again = Landscapes::new(&fx.graph, fx.domain, fx.errors, 7);
        assert_eq!(fx.landscapes, again);
        let other = Landscapes::new(&fx.graph, fx.domain, fx.errors, 8);
        assert_ne!(fx.landscapes, other);
        for id in fx.graph.ids() {
            let l = fx.landscapes.landscape(id);
            assert!(l.defects.len() as u64 <= MAX_DEFECTS);
            assert!(l.defects.iter().all(|d| d.width > 0.0));
            if fx.graph.element(id).is_edge() {
                assert!(l.defects.is_empty());
            }
        }
        let mut drifted = fx.landscapes.clone();
        let n = fx.graph.node_at(1, 1).unwrap();
        drifted.bump_epoch(n);
        assert_eq!(drifted.epoch(n), 1);
        assert_eq!(drifted.drifted(), vec![(n, 1)]);
        drifted.set_epoch(n, 0);
        assert_eq!(drifted, fx.landscapes);
    }
}
