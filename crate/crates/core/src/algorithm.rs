//! Algorithm subgraphs: which goal elements are simultaneously active at each
//! distinct moment of the target circuit, and the co-activity relation they
//! induce.

use std::fmt;
use std::str::FromStr;

use crate::graph::{ElementId, ElementKind, Orientation, ProcessorGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AlgorithmMode {
    /// Alternating single-qubit layers and four two-qubit coupler patterns.
    Xeb,
    /// Everything may run at once: a single subgraph equal to the goal.
    Unstructured,
}

impl fmt::Display for AlgorithmMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlgorithmMode::Xeb => "xeb",
            AlgorithmMode::Unstructured => "unstructured",
        })
    }
}

impl FromStr for AlgorithmMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "xeb" => Ok(AlgorithmMode::Xeb),
            "unstructured" => Ok(AlgorithmMode::Unstructured),
            other => Err(format!("unknown algorithm `{other}` (expected xeb | unstructured)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgorithmSubgraph {
    pub id: usize,
    /// Sorted member ids.
    pub members: Vec<ElementId>,
}

/// Builds the five XEB activity layers: all goal nodes, then the vertical and
/// horizontal couplers split by the coordinate parity of their anchor node.
/// Each coupler layer is a matching.
pub fn build_xeb_subgraphs(graph: &ProcessorGraph, goal: &[ElementId]) -> Vec<AlgorithmSubgraph> {
    let mut layers: Vec<Vec<ElementId>> = vec![Vec::new(); 5];
    for &id in goal {
        let e = graph.element(id);
        let parity = ((e.coord.0 + e.coord.1) % 2) as usize;
        let layer = match (e.kind, e.orientation) {
            (ElementKind::Node, _) => 0,
            (ElementKind::Engineered, Some(Orientation::Vertical)) => 1 + parity,
            (ElementKind::Engineered, Some(Orientation::Horizontal)) => 3 + parity,
            _ => panic!("parasitic element {e} cannot be part of a calibration goal"),
        };
        layers[layer].push(id);
    }
    layers
        .into_iter()
        .enumerate()
        .map(|(id, mut members)| {
            members.sort_unstable();
            members.dedup();
            AlgorithmSubgraph { id, members }
        })
        .collect()
}

pub fn build_unstructured_subgraph(goal: &[ElementId]) -> Vec<AlgorithmSubgraph> {
    let mut members = goal.to_vec();
    members.sort_unstable();
    members.dedup();
    vec![AlgorithmSubgraph { id: 0, members }]
}

/// Element -> bitmask of the subgraphs containing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivitySet {
    masks: Vec<u64>,
    subgraphs: Vec<AlgorithmSubgraph>,
}

impl ActivitySet {
    pub fn new(graph: &ProcessorGraph, subgraphs: Vec<AlgorithmSubgraph>) -> Self {
        assert!(subgraphs.len() <= 64, "at most 64 algorithm subgraphs are supported");
        let mut masks = vec![0u64; graph.len()];
        for (bit, sg) in subgraphs.iter().enumerate() {
            for &m in &sg.members {
                masks[m.index()] |= 1 << bit;
            }
        }
        ActivitySet { masks, subgraphs }
    }

    pub fn build(graph: &ProcessorGraph, goal: &[ElementId], mode: AlgorithmMode) -> Self {
        let subgraphs = match mode {
            AlgorithmMode::Xeb => build_xeb_subgraphs(graph, goal),
            AlgorithmMode::Unstructured => build_unstructured_subgraph(goal),
        };
        Self::new(graph, subgraphs)
    }

    pub fn subgraphs(&self) -> &[AlgorithmSubgraph] {
        &self.subgraphs
    }

    /// Ids of the subgraphs that contain `g`.
    pub fn layers_of(&self, g: ElementId) -> Vec<usize> {
        let mask = self.masks[g.index()];
        (0..64).filter(|b| mask & (1 << b) != 0).collect()
    }

    pub fn is_active(&self, g: ElementId) -> bool {
        self.masks[g.index()] != 0
    }

    #[inline]
    pub fn co_active(&self, g: ElementId, h: ElementId) -> bool {
        self.masks[g.index()] & self.masks[h.index()] != 0
    }
}

pub fn co_active(activity: &ActivitySet, g: ElementId, h: ElementId) -> bool {
    activity.co_active(g, h)
}
