//! Graph traversal and pre-calibration segmentation.
//!
//! Traversal options for a central element are the uncalibrated, co-active,
//! same-kind goal elements within `d_t`. The relation is symmetric, so its
//! connected components (threads) are traversal-disjoint. Subgoals are the
//! connected components of the interference relation: two uncalibrated
//! elements interfere when they are co-active within `d_r` (they would
//! constrain each other) or within `d_p` (a single step could calibrate both).

use std::cmp::Reverse;
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::engine::CalibrationState;
use crate::graph::{ElementId, ElementKind};
use crate::rng::{stream, TAG_OPTIONS, TAG_SEED};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Heuristic {
    /// Ascending element id.
    InsertionOrder,
    /// Seeded shuffle.
    Random,
    /// Most calibrated elements within `d_r` first: the most constrained
    /// candidate is visited while its neighbourhood is still informative.
    MostCalibratedNeighbors,
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Heuristic::InsertionOrder => "insertion-order",
            Heuristic::Random => "random",
            Heuristic::MostCalibratedNeighbors => "most-calibrated-neighbors",
        })
    }
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "insertion-order" => Ok(Heuristic::InsertionOrder),
            "random" => Ok(Heuristic::Random),
            "most-calibrated-neighbors" => Ok(Heuristic::MostCalibratedNeighbors),
            other => Err(format!(
                "unknown heuristic `{other}` (expected insertion-order | random | most-calibrated-neighbors)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraversalOrder {
    DepthFirst,
    BreadthFirst,
}

impl fmt::Display for TraversalOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraversalOrder::DepthFirst => "depth-first",
            TraversalOrder::BreadthFirst => "breadth-first",
        })
    }
}

impl FromStr for TraversalOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "depth-first" => Ok(TraversalOrder::DepthFirst),
            "breadth-first" => Ok(TraversalOrder::BreadthFirst),
            other => Err(format!("unknown traversal order `{other}` (expected depth-first | breadth-first)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraversalConfig {
    pub d_t: u32,
    pub heuristic: Heuristic,
    pub order: TraversalOrder,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CalibrationSubgoal {
    pub id: usize,
    /// Sorted uncalibrated members.
    pub members: Vec<ElementId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraversalThread {
    pub subgoal: usize,
    pub id: usize,
    pub kind: ElementKind,
    /// Sorted members, all of `kind`.
    pub members: Vec<ElementId>,
}

/// Static traversal relation between two distinct goal elements, ignoring
/// calibration status.
fn traversable(state: &CalibrationState, g: ElementId, h: ElementId) -> bool {
    let graph = state.graph();
    g != h
        && graph.kind(g) == graph.kind(h)
        && graph.distance(g, h) <= state.config().d_t
        && state.activity().co_active(g, h)
}

fn interferes(state: &CalibrationState, g: ElementId, h: ElementId) -> bool {
    let d = state.graph().distance(g, h);
    let cfg = state.config();
    (d <= cfg.d_r && state.activity().co_active(g, h)) || d <= cfg.d_p
}

/// Unsorted traversal candidates of `g`, in id order.
pub fn traversal_candidates(g: ElementId, state: &CalibrationState) -> Vec<ElementId> {
    state
        .graph()
        .connectivity_subgraph(g, state.config().d_t)
        .into_iter()
        .filter(|&h| state.in_goal(h) && !state.is_calibrated(h) && traversable(state, g, h))
        .collect()
}

/// Orders candidates with the configured heuristic; ties break by id.
pub(crate) fn sort_options(candidates: &mut [ElementId], state: &CalibrationState, rng: &mut impl Rng) {
    match state.config().heuristic {
        Heuristic::InsertionOrder => candidates.sort_unstable(),
        Heuristic::Random => {
            candidates.sort_unstable();
            candidates.shuffle(rng);
        }
        // Counts only co-active elements, i.e. the ones that could constrain
        // `c`. Other subgoals never contribute, so parallel runs agree with
        // serial ones.
        Heuristic::MostCalibratedNeighbors => {
            let d_r = state.config().d_r;
            candidates.sort_by_cached_key(|&c| {
                let calibrated = state
                    .graph()
                    .connectivity_subgraph(c, d_r)
                    .into_iter()
                    .filter(|&h| state.is_calibrated(h) && state.activity().co_active(c, h))
                    .count();
                (Reverse(calibrated), c)
            });
        }
    }
}

/// Traversal options of `g` against the current status, sorted by the
/// configured heuristic. The random heuristic draws from a stream keyed by
/// the run seed, `g`, and the current status length.
pub fn build_traversal_options(g: ElementId, state: &CalibrationState) -> Vec<ElementId> {
    let mut options = traversal_candidates(g, state);
    let mut rng = stream(&[state.config().seed, TAG_OPTIONS, u64::from(g.0), state.status().len() as u64]);
    sort_options(&mut options, state, &mut rng);
    options
}

/// Connected components of `related` over `members` (sorted), each sorted,
/// ordered by smallest member.
fn components(members: &[ElementId], related: impl Fn(ElementId, ElementId) -> bool) -> Vec<Vec<ElementId>> {
    let mut seen = vec![false; members.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..members.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut component = Vec::new();
        while let Some(i) = queue.pop_front() {
            component.push(members[i]);
            for j in 0..members.len() {
                if !seen[j] && related(members[i], members[j]) {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        component.sort_unstable();
        out.push(component);
    }
    out
}

/// Partitions the uncalibrated goal into interference-free subgoals.
pub fn build_calibration_subgoals(state: &CalibrationState) -> Vec<CalibrationSubgoal> {
    let open = state.uncalibrated();
    components(&open, |g, h| interferes(state, g, h))
        .into_iter()
        .enumerate()
        .map(|(id, members)| CalibrationSubgoal { id, members })
        .collect()
}

/// Partitions a subgoal into traversal-disjoint, single-kind threads.
pub fn build_traversal_threads(subgoal: &CalibrationSubgoal, state: &CalibrationState) -> Vec<TraversalThread> {
    let open: Vec<ElementId> = subgoal.members.iter().copied().filter(|&g| !state.is_calibrated(g)).collect();
    components(&open, |g, h| traversable(state, g, h))
        .into_iter()
        .enumerate()
        .map(|(id, members)| TraversalThread { subgoal: subgoal.id, id, kind: state.graph().kind(members[0]), members })
        .collect()
}

/// Smallest member, or a seeded-random member under the random heuristic.
pub fn build_traversal_seed(thread: &TraversalThread, state: &CalibrationState) -> ElementId {
    assert!(!thread.members.is_empty(), "cannot seed an empty thread");
    match state.config().heuristic {
        Heuristic::Random => {
            let mut rng = stream(&[
                state.config().seed,
                TAG_SEED,
                thread.subgoal as u64,
                thread.id as u64,
                u64::from(thread.members[0].0),
                thread.members.len() as u64,
            ]);
            thread.members[rng.random_range(0..thread.members.len())]
        }
        _ => thread.members[0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Orientation;
    use crate::io::RunConfig;

    fn state(rows: u32, cols: u32, f: impl FnOnce(&mut RunConfig)) -> CalibrationState {
        let mut cfg = RunConfig { rows, cols, heuristic: Heuristic::InsertionOrder, ..RunConfig::default() };
        f(&mut cfg);
        CalibrationState::new(cfg).unwrap()
    }

    #[test]
    fn options_for_central_node_and_edge() {
        let s = state(3, 3, |_| {});
        let center = s.graph().node_at(1, 1).unwrap();
        let opts = build_traversal_options(center, &s);
        assert_eq!(opts.len(), 8);
        assert!(opts.iter().all(|&o| s.graph().element(o).is_node()));

        let s = state(4, 4, |_| {});
        let e = s.graph().edge_at(1, 1, Orientation::Horizontal).unwrap();
        let opts = build_traversal_options(e, &s);
        assert!(!opts.is_empty());
        let (a, b) = s.graph().element(e).endpoints.unwrap();
        for o in opts {
            assert!(s.activity().co_active(e, o));
            let (c, d) = s.graph().element(o).endpoints.unwrap();
            assert!(![a, b].contains(&c) && ![a, b].contains(&d), "shares an endpoint");
        }
    }

    #[test]
    fn calibrated_neighbourhood_has_no_options() {
        let mut s = state(3, 3, |_| {});
        let center = s.graph().node_at(1, 1).unwrap();
        for n in s.graph().nodes().map(|e| e.id).collect::<Vec<_>>() {
            if n != center {
                s.assign(n, 0, 0).unwrap();
            }
        }
        assert!(build_traversal_options(center, &s).is_empty());
    }

    #[test]
    fn most_calibrated_first() {
        let mut s = state(5, 5, |c| c.heuristic = Heuristic::MostCalibratedNeighbors);
        let corner = s.graph().node_at(4, 4).unwrap();
        s.assign(corner, 0, 0).unwrap();
        let opts = build_traversal_options(s.graph().node_at(2, 2).unwrap(), &s);
        // Seven candidates sit within d_r of the calibrated corner and come
        // first in id order; the rest follow in id order.
        assert_eq!(opts.len(), 23);
        assert_eq!(opts[0], s.graph().node_at(2, 3).unwrap());
        assert_eq!(opts[7], s.graph().node_at(0, 0).unwrap());
        assert!(opts[7..].windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fresh_grid_segments_into_one_subgoal_five_threads() {
        let s = state(4, 4, |_| {});
        let subgoals = build_calibration_subgoals(&s);
        assert_eq!(subgoals.len(), 1);
        assert_eq!(subgoals[0].members.len(), 40);
        let threads = build_traversal_threads(&subgoals[0], &s);
        assert_eq!(threads.iter().filter(|t| t.kind == ElementKind::Node).count(), 1);
        assert_eq!(threads.iter().filter(|t| t.kind == ElementKind::Engineered).count(), 4);
    }

    #[test]
    fn zero_traversal_distance_gives_singletons() {
        let s = state(3, 3, |c| c.d_t = 0);
        let sg = &build_calibration_subgoals(&s)[0];
        let threads = build_traversal_threads(sg, &s);
        assert_eq!(threads.len(), sg.members.len());
    }

    #[test]
    fn everything_calibrated_means_no_subgoals() {
        let mut s = state(2, 2, |_| {});
        for g in s.goal().to_vec() {
            s.assign(g, 0, 0).unwrap();
        }
        assert!(build_calibration_subgoals(&s).is_empty());
    }

    #[test]
    fn seeds() {
        let s = state(2, 2, |_| {});
        let a = s.graph().node_at(0, 0).unwrap();
        let b = s.graph().node_at(0, 1).unwrap();
        let t = TraversalThread { subgoal: 0, id: 0, kind: ElementKind::Node, members: vec![a, b] };
        assert_eq!(build_traversal_seed(&t, &s), a);
        let single = TraversalThread { members: vec![b], ..t.clone() };
        assert_eq!(build_traversal_seed(&single, &s), b);
        let r = state(2, 2, |c| c.heuristic = Heuristic::Random);
        let first = build_traversal_seed(&t, &r);
        for _ in 0..5 {
            assert_eq!(build_traversal_seed(&t, &r), first);
        }
    }

    #[test]
    fn parse_names() {
        for h in [Heuristic::InsertionOrder, Heuristic::Random, Heuristic::MostCalibratedNeighbors] {
            assert_eq!(h.to_string().parse::<Heuristic>().unwrap(), h);
        }
        for o in [TraversalOrder::DepthFirst, TraversalOrder::BreadthFirst] {
            assert_eq!(o.to_string().parse::<TraversalOrder>().unwrap(), o);
        }
        assert!("sideways".parse::<TraversalOrder>().is_err());
    }
}
