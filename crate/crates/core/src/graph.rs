//! Processor graph: qubits as nodes, couplers as engineered edges, and
//! diagonal crosstalk channels as parasitic edges.
//!
//! Distances are measured on the incidence meta-graph whose vertices are all
//! graph elements (nodes and edges of every kind). An edge element is adjacent
//! to exactly its two endpoint nodes, so a node and an incident edge are one
//! meta-step apart and two lattice-adjacent nodes are two meta-steps apart.

use std::collections::VecDeque;
use std::fmt;

/// Sentinel distance for elements in different connected components.
pub const UNREACHABLE: u32 = u32::MAX;

/// Index of an element inside its [`ProcessorGraph`]. Ids follow the
/// deterministic construction order, so sorting by id is the canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementId(pub u32);

impl ElementId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementKind {
    Node,
    Engineered,
    Parasitic,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Node => "node",
            ElementKind::Engineered => "engineered",
            ElementKind::Parasitic => "parasitic",
        }
    }
}

/// Direction of an edge relative to its anchor node (the lexicographically
/// smaller endpoint).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Orientation {
    /// (r, c) -> (r, c + 1)
    Horizontal,
    /// (r, c) -> (r + 1, c)
    Vertical,
    /// (r, c) -> (r + 1, c + 1)
    Diagonal,
    /// (r, c) -> (r + 1, c - 1)
    AntiDiagonal,
}

impl Orientation {
    fn tag(self) -> char {
        match self {
            Orientation::Horizontal => 'h',
            Orientation::Vertical => 'v',
            Orientation::Diagonal => 'd',
            Orientation::AntiDiagonal => 'a',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphElement {
    pub id: ElementId,
    pub kind: ElementKind,
    /// Lattice position of the node, or of the anchor endpoint for edges.
    pub coord: (u32, u32),
    pub orientation: Option<Orientation>,
    /// Endpoint node ids, present for edges only.
    pub endpoints: Option<(ElementId, ElementId)>,
}

impl GraphElement {
    pub fn is_node(&self) -> bool {
        self.kind == ElementKind::Node
    }

    pub fn is_edge(&self) -> bool {
        self.kind != ElementKind::Node
    }
}

impl fmt::Display for GraphElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = self.orientation.map_or('n', Orientation::tag);
        write!(f, "{}({},{})", tag, self.coord.0, self.coord.1)
    }
}

#[derive(Clone, Debug)]
pub struct ProcessorGraph {
    rows: u32,
    cols: u32,
    elements: Vec<GraphElement>,
    /// node -> incident edges of both kinds, sorted by id. Empty for edges.
    incidence: Vec<Vec<ElementId>>,
    /// Row-major all-pairs meta-distance table.
    distances: Vec<u32>,
}

/// Builds the full `rows x cols` grid with engineered couplers between
/// lattice neighbours and parasitic edges across every unit cell diagonal.
pub fn build_grid_graph(rows: u32, cols: u32) -> ProcessorGraph {
    assert!(rows >= 1 && cols >= 1, "grid dimensions must be positive");
    let node_slot = |r: u32, c: u32| (r * cols + c) as usize;

    // First pass assigns ids in (coordinate, orientation) order; node ids are
    // needed before edges can name their endpoints, so they are resolved after.
    let mut layout: Vec<((u32, u32), Option<Orientation>)> = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            layout.push(((r, c), None));
            if c + 1 < cols {
                layout.push(((r, c), Some(Orientation::Horizontal)));
            }
            if r + 1 < rows {
                layout.push(((r, c), Some(Orientation::Vertical)));
            }
            if r + 1 < rows && c + 1 < cols {
                layout.push(((r, c), Some(Orientation::Diagonal)));
            }
            if r + 1 < rows && c >= 1 {
                layout.push(((r, c), Some(Orientation::AntiDiagonal)));
            }
        }
    }

    let mut node_ids = vec![ElementId(0); (rows * cols) as usize];
    for (i, (coord, orientation)) in layout.iter().enumerate() {
        if orientation.is_none() {
            node_ids[node_slot(coord.0, coord.1)] = ElementId(i as u32);
        }
    }

    let elements: Vec<GraphElement> = layout
        .into_iter()
        .enumerate()
        .map(|(i, ((r, c), orientation))| {
            let (kind, endpoints) = match orientation {
                None => (ElementKind::Node, None),
                Some(o) => {
                    let (r2, c2) = match o {
                        Orientation::Horizontal => (r, c + 1),
                        Orientation::Vertical => (r + 1, c),
                        Orientation::Diagonal => (r + 1, c + 1),
                        Orientation::AntiDiagonal => (r + 1, c - 1),
                    };
                    let kind = match o {
                        Orientation::Horizontal | Orientation::Vertical => ElementKind::Engineered,
                        _ => ElementKind::Parasitic,
                    };
                    (kind, Some((node_ids[node_slot(r, c)], node_ids[node_slot(r2, c2)])))
                }
            };
            GraphElement { id: ElementId(i as u32), kind, coord: (r, c), orientation, endpoints }
        })
        .collect();

    ProcessorGraph::from_elements(rows, cols, elements)
}

impl ProcessorGraph {
    fn from_elements(rows: u32, cols: u32, elements: Vec<GraphElement>) -> Self {
        let n = elements.len();
        let mut incidence = vec![Vec::new(); n];
        for e in &elements {
            if let Some((a, b)) = e.endpoints {
                incidence[a.index()].push(e.id);
                incidence[b.index()].push(e.id);
            }
        }
        for list in &mut incidence {
            list.sort_unstable();
        }
        let mut graph = ProcessorGraph { rows, cols, elements, incidence, distances: Vec::new() };
        graph.distances = graph.all_pairs_bfs();
        graph
    }

    fn meta_neighbors(&self, id: ElementId) -> impl Iterator<Item = ElementId> + '_ {
        let e = &self.elements[id.index()];
        let ends = e.endpoints.into_iter().flat_map(|(a, b)| [a, b]);
        ends.chain(self.incidence[id.index()].iter().copied())
    }

    fn all_pairs_bfs(&self) -> Vec<u32> {
        let n = self.elements.len();
        let mut table = vec![UNREACHABLE; n * n];
        let mut queue = VecDeque::new();
        for src in 0..n {
            let row = &mut table[src * n..(src + 1) * n];
            row[src] = 0;
            queue.clear();
            queue.push_back(ElementId(src as u32));
            while let Some(u) = queue.pop_front() {
                let du = row[u.index()];
                for v in self.meta_neighbors(u) {
                    if row[v.index()] == UNREACHABLE {
                        row[v.index()] = du + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        table
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[GraphElement] {
        &self.elements
    }

    pub fn element(&self, id: ElementId) -> &GraphElement {
        &self.elements[id.index()]
    }

    pub fn kind(&self, id: ElementId) -> ElementKind {
        self.elements[id.index()].kind
    }

    pub fn ids(&self) -> impl Iterator<Item = ElementId> + '_ {
        (0..self.elements.len() as u32).map(ElementId)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GraphElement> + '_ {
        self.elements.iter().filter(|e| e.is_node())
    }

    pub fn count_kind(&self, kind: ElementKind) -> usize {
        self.elements.iter().filter(|e| e.kind == kind).count()
    }

    /// Edges of both kinds incident on `node`, sorted by id.
    pub fn incident_edges(&self, node: ElementId) -> &[ElementId] {
        &self.incidence[node.index()]
    }

    pub fn node_at(&self, row: u32, col: u32) -> Option<ElementId> {
        self.find(row, col, None)
    }

    pub fn edge_at(&self, row: u32, col: u32, orientation: Orientation) -> Option<ElementId> {
        self.find(row, col, Some(orientation))
    }

    fn find(&self, row: u32, col: u32, orientation: Option<Orientation>) -> Option<ElementId> {
        // Elements are sorted by (coord, orientation).
        let key = ((row, col), orientation);
        self.elements.binary_search_by(|e| (e.coord, e.orientation).cmp(&key)).ok().map(|i| ElementId(i as u32))
    }

    /// Meta-graph distance between two elements, [`UNREACHABLE`] across
    /// components.
    #[inline]
    pub fn distance(&self, g: ElementId, h: ElementId) -> u32 {
        self.distances[g.index() * self.elements.len() + h.index()]
    }

    /// All elements within `d` meta-steps of `g` (including `g`), in id order.
    pub fn connectivity_subgraph(&self, g: ElementId, d: u32) -> Vec<ElementId> {
        let n = self.elements.len();
        let row = &self.distances[g.index() * n..(g.index() + 1) * n];
        row.iter().enumerate().filter(|(_, &dist)| dist <= d).map(|(i, _)| ElementId(i as u32)).collect()
    }

    pub fn label(&self, id: ElementId) -> String {
        self.elements[id.index()].to_string()
    }

    /// Parses a label such as `n(1,2)` or `h(0,3)` back into an id.
    pub fn parse_label(&self, label: &str) -> Option<ElementId> {
        let label = label.trim();
        let (tag, rest) = label.split_at(label.find('(')?);
        let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
        let (r, c) = inner.split_once(',')?;
        let row: u32 = r.trim().parse().ok()?;
        let col: u32 = c.trim().parse().ok()?;
        let orientation = match tag {
            "n" => None,
            "h" => Some(Orientation::Horizontal),
            "v" => Some(Orientation::Vertical),
            "d" => Some(Orientation::Diagonal),
            "a" => Some(Orientation::AntiDiagonal),
            _ => return None,
        };
        self.find(row, col, orientation)
    }
}
