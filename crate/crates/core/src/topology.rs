//! Network graph model, path asymmetry accounting and edge-disjoint path
//! discovery.
//!
//! Every edge is bidirectional with an independent one-way delay per
//! direction. `fwd` always means "first endpoint to second endpoint"; a
//! [`Path`] records the traversal direction of each hop explicitly, so the
//! asymmetry of a path is the signed sum of its edge asymmetries.
//!
//! Parallel edges between the same pair of nodes are allowed; an edge is
//! identified by its [`EdgeId`], never by its endpoints.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::nanos_from_micros_f64;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId::new(s)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(String);

impl EdgeId {
    pub fn new(id: impl Into<String>) -> Self {
        EdgeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for EdgeId {
    fn from(s: &str) -> Self {
        EdgeId::new(s)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Traversal direction of an edge relative to its stored endpoint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn flip(self) -> Direction {
        match self {
            Direction::Forward => Direction::Reverse,
            Direction::Reverse => Direction::Forward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub id: EdgeId,
    pub a: NodeId,
    pub b: NodeId,
    /// One-way delay a → b, nanoseconds.
    pub delay_fwd: i64,
    /// One-way delay b → a, nanoseconds.
    pub delay_bwd: i64,
}

impl Edge {
    pub fn new(
        id: impl Into<EdgeId>,
        a: impl Into<NodeId>,
        b: impl Into<NodeId>,
        delay_fwd: i64,
        delay_bwd: i64,
    ) -> Self {
        Edge {
            id: id.into(),
            a: a.into(),
            b: b.into(),
            delay_fwd,
            delay_bwd,
        }
    }

    /// Ground-truth link asymmetry `delay_fwd - delay_bwd`.
    pub fn asymmetry(&self) -> i64 {
        self.delay_fwd - self.delay_bwd
    }

    pub fn delay(&self, direction: Direction) -> i64 {
        match direction {
            Direction::Forward => self.delay_fwd,
            Direction::Reverse => self.delay_bwd,
        }
    }

    /// Node a packet leaves from when crossing in `direction`.
    pub fn tail(&self, direction: Direction) -> &NodeId {
        match direction {
            Direction::Forward => &self.a,
            Direction::Reverse => &self.b,
        }
    }

    /// Node a packet arrives at when crossing in `direction`.
    pub fn head(&self, direction: Direction) -> &NodeId {
        self.tail(direction.flip())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("node ids must not be empty")]
    EmptyNodeId,
    #[error("duplicate node `{0}`")]
    DuplicateNode(NodeId),
    #[error("duplicate edge `{0}`")]
    DuplicateEdge(EdgeId),
    #[error("edge `{edge}` references unknown endpoint `{node}`")]
    UnknownEndpoint { edge: EdgeId, node: NodeId },
    #[error("edge `{0}` connects a node to itself")]
    SelfLoop(EdgeId),
    #[error("edge `{0}` has a negative delay")]
    NegativeDelay(EdgeId),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("unknown edge `{0}`")]
    UnknownEdge(EdgeId),
    #[error("graph is not connected: `{0}` is unreachable from the master")]
    Disconnected(NodeId),
    #[error("no master-slave path: {0}")]
    NoMasterSlavePath(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("source and sink must be distinct nodes")]
    SameEndpoints,
}

/// Serialized topology section of a scenario file. Delays are in decimal
/// microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub nodes: Vec<String>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master: Option<String>,
    #[serde(default)]
    pub slaves: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: String,
    pub a: String,
    pub b: String,
    pub delay_fwd_us: f64,
    pub delay_bwd_us: f64,
}

#[derive(Debug, Clone, Copy)]
struct Adjacent {
    edge: usize,
    neighbor: usize,
    direction: Direction,
}

/// Validated, immutable network graph with a designated master and one or
/// more slaves.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    nodes: Vec<NodeId>,
    node_index: HashMap<NodeId, usize>,
    edges: Vec<Edge>,
    edge_index: HashMap<EdgeId, usize>,
    // Per node, sorted by (neighbor label, edge id).
    adjacency: Vec<Vec<Adjacent>>,
    master: NodeId,
    slaves: Vec<NodeId>,
}

/// Builds a graph from its serialized description.
pub fn build_graph(spec: &TopologySpec) -> Result<NetworkGraph, TopologyError> {
    let master = spec
        .master
        .as_deref()
        .ok_or_else(|| TopologyError::NoMasterSlavePath("no master given".into()))?;
    let edges = spec
        .edges
        .iter()
        .map(|e| {
            Edge::new(
                e.id.as_str(),
                e.a.as_str(),
                e.b.as_str(),
                nanos_from_micros_f64(e.delay_fwd_us),
                nanos_from_micros_f64(e.delay_bwd_us),
            )
        })
        .collect();
    NetworkGraph::new(
        spec.nodes.iter().map(|n| NodeId::new(n.as_str())).collect(),
        edges,
        NodeId::new(master),
        spec.slaves.iter().map(|s| NodeId::new(s.as_str())).collect(),
    )
}

impl NetworkGraph {
    pub fn new(
        nodes: Vec<NodeId>,
        edges: Vec<Edge>,
        master: NodeId,
        slaves: Vec<NodeId>,
    ) -> Result<Self, TopologyError> {
        let mut sorted = BTreeSet::new();
        for node in nodes {
            if node.as_str().is_empty() {
                return Err(TopologyError::EmptyNodeId);
            }
            if !sorted.insert(node.clone()) {
                return Err(TopologyError::DuplicateNode(node));
            }
        }
        let nodes: Vec<NodeId> = sorted.into_iter().collect();
        let node_index: HashMap<NodeId, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();

        let mut edge_index = HashMap::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, edge) in edges.iter().enumerate() {
            if edge_index.insert(edge.id.clone(), i).is_some() {
                return Err(TopologyError::DuplicateEdge(edge.id.clone()));
            }
            let lookup = |node: &NodeId| {
                node_index
                    .get(node)
                    .copied()
                    .ok_or_else(|| TopologyError::UnknownEndpoint {
                        edge: edge.id.clone(),
                        node: node.clone(),
                    })
            };
            let a = lookup(&edge.a)?;
            let b = lookup(&edge.b)?;
            if a == b {
                return Err(TopologyError::SelfLoop(edge.id.clone()));
            }
            if edge.delay_fwd < 0 || edge.delay_bwd < 0 {
                return Err(TopologyError::NegativeDelay(edge.id.clone()));
            }
            adjacency[a].push(Adjacent {
                edge: i,
                neighbor: b,
                direction: Direction::Forward,
            });
            adjacency[b].push(Adjacent {
                edge: i,
                neighbor: a,
                direction: Direction::Reverse,
            });
        }
        for list in &mut adjacency {
            list.sort_by(|x, y| {
                x.neighbor
                    .cmp(&y.neighbor)
                    .then_with(|| edges[x.edge].id.cmp(&edges[y.edge].id))
            });
        }

        let master_idx = *node_index
            .get(&master)
            .ok_or_else(|| TopologyError::UnknownNode(master.clone()))?;
        if slaves.is_empty() {
            return Err(TopologyError::NoMasterSlavePath("no slave given".into()));
        }
        let mut seen = BTreeSet::new();
        for slave in &slaves {
            if !node_index.contains_key(slave) {
                return Err(TopologyError::UnknownNode(slave.clone()));
            }
            if *slave == master {
                return Err(TopologyError::NoMasterSlavePath(format!(
                    "`{slave}` cannot be both master and slave"
                )));
            }
            if !seen.insert(slave.clone()) {
                return Err(TopologyError::DuplicateNode(slave.clone()));
            }
        }

        let graph = NetworkGraph {
            nodes,
            node_index,
            edges,
            edge_index,
            adjacency,
            master,
            slaves,
        };
        let reached = graph.reachable_from(master_idx);
        if let Some(i) = reached.iter().position(|r| !r) {
            return Err(TopologyError::Disconnected(graph.nodes[i].clone()));
        }
        Ok(graph)
    }

    fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            for adj in &self.adjacency[u] {
                if !seen[adj.neighbor] {
                    seen[adj.neighbor] = true;
                    queue.push_back(adj.neighbor);
                }
            }
        }
        seen
    }

    /// Nodes in lexicographic order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn master(&self) -> &NodeId {
        &self.master
    }

    pub fn slaves(&self) -> &[NodeId] {
        &self.slaves
    }

    pub fn contains_node(&self, node: &NodeId) -> bool {
        self.node_index.contains_key(node)
    }

    pub fn edge(&self, id: &EdgeId) -> Option<&Edge> {
        self.edge_index.get(id).map(|&i| &self.edges[i])
    }

    fn index_of(&self, node: &NodeId) -> Result<usize, TopologyError> {
        self.node_index
            .get(node)
            .copied()
            .ok_or_else(|| TopologyError::UnknownNode(node.clone()))
    }

    fn path_from_parents(
        &self,
        parents: &[Option<(usize, Direction)>],
        source: usize,
        sink: usize,
    ) -> Path {
        let mut hops = Vec::new();
        let mut at = sink;
        while at != source {
            let (edge, direction) = parents[at].expect("parent chain reaches the source");
            let e = &self.edges[edge];
            hops.push(Hop {
                edge: e.id.clone(),
                direction,
            });
            at = self.node_index[e.tail(direction)];
        }
        hops.reverse();
        Path {
            origin: self.nodes[source].clone(),
            terminus: self.nodes[sink].clone(),
            hops,
        }
    }
}

/// One edge crossing within a [`Path`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hop {
    pub edge: EdgeId,
    pub direction: Direction,
}

impl Hop {
    pub fn new(edge: impl Into<EdgeId>, direction: Direction) -> Self {
        Hop {
            edge: edge.into(),
            direction,
        }
    }
}

/// An ordered, edge-simple walk from `origin` to `terminus`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    origin: NodeId,
    terminus: NodeId,
    hops: Vec<Hop>,
}

impl Path {
    /// Validates `hops` against `graph`: consecutive hops share a node and no
    /// edge repeats.
    pub fn new(graph: &NetworkGraph, origin: NodeId, hops: Vec<Hop>) -> Result<Self, TopologyError> {
        graph.index_of(&origin)?;
        let mut at = origin.clone();
        let mut used = BTreeSet::new();
        for hop in &hops {
            let edge = graph
                .edge(&hop.edge)
                .ok_or_else(|| TopologyError::UnknownEdge(hop.edge.clone()))?;
            if !used.insert(hop.edge.clone()) {
                return Err(TopologyError::InvalidPath(format!(
                    "edge `{}` repeats",
                    hop.edge
                )));
            }
            if *edge.tail(hop.direction) != at {
                return Err(TopologyError::InvalidPath(format!(
                    "edge `{}` does not leave `{at}` in the {:?} direction",
                    hop.edge, hop.direction
                )));
            }
            at = edge.head(hop.direction).clone();
        }
        Ok(Path {
            origin,
            terminus: at,
            hops,
        })
    }

    pub fn origin(&self) -> &NodeId {
        &self.origin
    }

    pub fn terminus(&self) -> &NodeId {
        &self.terminus
    }

    pub fn hops(&self) -> &[Hop] {
        &self.hops
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    /// The same edges walked from terminus back to origin.
    pub fn reversed(&self) -> Path {
        Path {
            origin: self.terminus.clone(),
            terminus: self.origin.clone(),
            hops: self
                .hops
                .iter()
                .rev()
                .map(|h| Hop::new(h.edge.clone(), h.direction.flip()))
                .collect(),
        }
    }

    /// Appends `next`, which must start where `self` ends.
    pub fn concat(&self, graph: &NetworkGraph, next: &Path) -> Result<Path, TopologyError> {
        if self.terminus != next.origin {
            return Err(TopologyError::InvalidPath(format!(
                "`{}` does not continue from `{}`",
                next.origin, self.terminus
            )));
        }
        let hops = self.hops.iter().chain(&next.hops).cloned().collect();
        Path::new(graph, self.origin.clone(), hops)
    }

    /// Node labels visited, origin first.
    pub fn node_sequence(&self, graph: &NetworkGraph) -> Vec<NodeId> {
        let mut seq = vec![self.origin.clone()];
        for hop in &self.hops {
            if let Some(edge) = graph.edge(&hop.edge) {
                seq.push(edge.head(hop.direction).clone());
            }
        }
        seq
    }

    pub fn shares_edge_with(&self, other: &Path) -> bool {
        let mine: BTreeSet<&EdgeId> = self.hops.iter().map(|h| &h.edge).collect();
        other.hops.iter().any(|h| mine.contains(&h.edge))
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.origin)?;
        for hop in &self.hops {
            let arrow = match hop.direction {
                Direction::Forward => "->",
                Direction::Reverse => "<-",
            };
            write!(f, " {arrow}[{}]", hop.edge)?;
        }
        write!(f, " {}", self.terminus)
    }
}

/// Signed asymmetry of `path`: the sum of its edge asymmetries, negated for
/// edges crossed against their stored orientation.
pub fn true_path_asymmetry(graph: &NetworkGraph, path: &Path) -> Result<i64, TopologyError> {
    path.hops.iter().try_fold(0i64, |acc, hop| {
        let edge = graph
            .edge(&hop.edge)
            .ok_or_else(|| TopologyError::UnknownEdge(hop.edge.clone()))?;
        Ok(match hop.direction {
            Direction::Forward => acc + edge.asymmetry(),
            Direction::Reverse => acc - edge.asymmetry(),
        })
    })
}

/// Sum of base one-way delays along `path` (`Forward`) or back along it
/// (`Reverse`).
pub fn path_delay(
    graph: &NetworkGraph,
    path: &Path,
    direction: Direction,
) -> Result<i64, TopologyError> {
    path.hops.iter().try_fold(0i64, |acc, hop| {
        let edge = graph
            .edge(&hop.edge)
            .ok_or_else(|| TopologyError::UnknownEdge(hop.edge.clone()))?;
        let d = match direction {
            Direction::Forward => hop.direction,
            Direction::Reverse => hop.direction.flip(),
        };
        Ok(acc + edge.delay(d))
    })
}

/// Ordered set of pairwise edge-disjoint paths between one source and sink.
/// Index 0 is the synchronization path, the rest are redundant paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DisjointPathSet {
    source: NodeId,
    sink: NodeId,
    paths: Vec<Path>,
}

impl DisjointPathSet {
    pub fn new(source: NodeId, sink: NodeId, paths: Vec<Path>) -> Result<Self, TopologyError> {
        let set = DisjointPathSet {
            source,
            sink,
            paths,
        };
        for p in &set.paths {
            if p.origin != set.source || p.terminus != set.sink {
                return Err(TopologyError::InvalidPath(format!(
                    "path {p} does not connect `{}` to `{}`",
                    set.source, set.sink
                )));
            }
        }
        if !set.is_pairwise_disjoint() {
            return Err(TopologyError::InvalidPath("paths share an edge".into()));
        }
        Ok(set)
    }

    pub fn source(&self) -> &NodeId {
        &self.source
    }

    pub fn sink(&self) -> &NodeId {
        &self.sink
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn get(&self, index: usize) -> Option<&Path> {
        self.paths.get(index)
    }

    pub fn sync_path(&self) -> Option<&Path> {
        self.paths.first()
    }

    pub fn redundant_paths(&self) -> &[Path] {
        self.paths.get(1..).unwrap_or(&[])
    }

    /// Number of redundant paths `n` (total paths minus the sync path).
    pub fn redundant_count(&self) -> usize {
        self.paths.len().saturating_sub(1)
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn is_pairwise_disjoint(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.paths
            .iter()
            .flat_map(|p| p.hops.iter())
            .all(|h| seen.insert(&h.edge))
    }

    /// Keeps only the first `count` paths.
    pub fn truncate(&mut self, count: usize) {
        self.paths.truncate(count);
    }
}

/// Breadth-first search for a source-sink path over edges whose flow is 0.
///
/// `flow` maps edge ids to 0 or 1; edges missing from the map count as 0.
/// Returns the shortest such path by hop count, ties broken by
/// lexicographic node label and then edge id. `None` when the sink is not
/// reachable or either endpoint is unknown.
pub fn zero_flow_path_search(
    graph: &NetworkGraph,
    flow: &BTreeMap<EdgeId, u8>,
    source: &NodeId,
    sink: &NodeId,
) -> Option<Path> {
    let s = graph.index_of(source).ok()?;
    let t = graph.index_of(sink).ok()?;
    let free: Vec<bool> = graph
        .edges
        .iter()
        .map(|e| flow.get(&e.id).copied().unwrap_or(0) == 0)
        .collect();
    let parents = bfs(graph, s, t, |adj| free[adj.edge])?;
    Some(graph.path_from_parents(&parents, s, t))
}

fn bfs(
    graph: &NetworkGraph,
    source: usize,
    sink: usize,
    mut usable: impl FnMut(&Adjacent) -> bool,
) -> Option<Vec<Option<(usize, Direction)>>> {
    let mut parents = vec![None; graph.nodes.len()];
    let mut seen = vec![false; graph.nodes.len()];
    seen[source] = true;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        if u == sink {
            return Some(parents);
        }
        for adj in &graph.adjacency[u] {
            if !seen[adj.neighbor] && usable(adj) {
                seen[adj.neighbor] = true;
                parents[adj.neighbor] = Some((adj.edge, adj.direction));
                queue.push_back(adj.neighbor);
            }
        }
    }
    None
}

/// Maximum set of pairwise edge-disjoint paths from `source` to `sink`.
///
/// Unit capacity per edge, augmenting-path max flow (Ford-Fulkerson with
/// breadth-first search). An augmenting step that only uses idle edges is
/// exactly a zero-flow path search; a step may also cancel flow on an edge
/// already used in the opposite direction, which is what makes the result
/// maximum rather than greedy. The flow is then decomposed into paths, which
/// are returned ordered by hop count, node labels, and edge ids. Index 0 is
/// thus a shortest path and serves as the synchronization path.
pub fn find_edge_disjoint_paths(
    graph: &NetworkGraph,
    source: &NodeId,
    sink: &NodeId,
) -> Result<DisjointPathSet, TopologyError> {
    let s = graph.index_of(source)?;
    let t = graph.index_of(sink)?;
    if s == t {
        return Err(TopologyError::SameEndpoints);
    }

    // Flow per edge: None when idle, Some(dir) when one unit crosses in dir.
    let mut flow: Vec<Option<Direction>> = vec![None; graph.edges.len()];
    while let Some(parents) = bfs(graph, s, t, |adj| match flow[adj.edge] {
        None => true,
        Some(d) => d != adj.direction,
    }) {
        let mut at = t;
        while at != s {
            let (edge, direction) = parents[at].expect("augmenting path is connected");
            flow[edge] = match flow[edge] {
                None => Some(direction),
                Some(_) => None,
            };
            at = graph.node_index[graph.edges[edge].tail(direction)];
        }
    }

    // Decompose: repeatedly take a shortest path over flow-carrying edges in
    // their flow direction, then retire its edges.
    let mut paths = Vec::new();
    while let Some(parents) = bfs(graph, s, t, |adj| flow[adj.edge] == Some(adj.direction)) {
        let path = graph.path_from_parents(&parents, s, t);
        for hop in &path.hops {
            flow[graph.edge_index[&hop.edge]] = None;
        }
        paths.push(path);
    }

    paths.sort_by(|x, y| {
        x.len()
            .cmp(&y.len())
            .then_with(|| x.node_sequence(graph).cmp(&y.node_sequence(graph)))
            .then_with(|| {
                let ex = x.hops.iter().map(|h| &h.edge);
                let ey = y.hops.iter().map(|h| &h.edge);
                ex.cmp(ey)
            })
    });
    DisjointPathSet::new(source.clone(), sink.clone(), paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::micros;

    fn two_parallel() -> NetworkGraph {
        NetworkGraph::new(
            vec!["M".into(), "S".into()],
            vec![
                Edge::new("e0", "M", "S", micros(100), micros(100)),
                Edge::new("e1", "M", "S", micros(100), micros(100)),
            ],
            "M".into(),
            vec!["S".into()],
        )
        .unwrap()
    }

    fn diamond() -> NetworkGraph {
        NetworkGraph::new(
            vec!["M".into(), "a".into(), "b".into(), "S".into()],
            vec![
                Edge::new("ma", "M", "a", micros(50), micros(50)),
                Edge::new("as", "a", "S", micros(50), micros(50)),
                Edge::new("mb", "M", "b", micros(50), micros(50)),
                Edge::new("bs", "b", "S", micros(50), micros(50)),
            ],
            "M".into(),
            vec!["S".into()],
        )
        .unwrap()
    }

    #[test]
    fn builds_two_node_parallel_graph() {
        let g = two_parallel();
        assert_eq!(g.nodes().len(), 2);
        assert_eq!(g.edges().len(), 2);
    }

    #[test]
    fn single_node_has_no_master_slave_path() {
        let err = NetworkGraph::new(vec!["M".into()], vec![], "M".into(), vec!["M".into()])
            .unwrap_err();
        assert!(matches!(err, TopologyError::NoMasterSlavePath(_)));
        let spec = TopologySpec {
            nodes: vec!["M".into()],
            edges: vec![],
            master: Some("M".into()),
            slaves: vec![],
        };
        assert!(matches!(
            build_graph(&spec),
            Err(TopologyError::NoMasterSlavePath(_))
        ));
    }

    #[test]
    fn diamond_is_valid() {
        let g = diamond();
        assert_eq!(g.nodes().len(), 4);
        assert!(g.reachable_from(0).iter().all(|&r| r));
    }

    #[test]
    fn rejects_bad_graphs() {
        let dup = NetworkGraph::new(
            vec!["M".into(), "M".into()],
            vec![],
            "M".into(),
            vec!["S".into()],
        );
        assert_eq!(dup.unwrap_err(), TopologyError::DuplicateNode("M".into()));

        let dangling = NetworkGraph::new(
            vec!["M".into(), "S".into()],
            vec![Edge::new("e0", "M", "X", 1, 1)],
            "M".into(),
            vec!["S".into()],
        );
        assert!(matches!(
            dangling.unwrap_err(),
            TopologyError::UnknownEndpoint { .. }
        ));

        let disconnected = NetworkGraph::new(
            vec!["M".into(), "S".into(), "X".into()],
            vec![Edge::new("e0", "M", "S", 1, 1)],
            "M".into(),
            vec!["S".into()],
        );
        assert_eq!(
            disconnected.unwrap_err(),
            TopologyError::Disconnected("X".into())
        );

        let negative = NetworkGraph::new(
            vec!["M".into(), "S".into()],
            vec![Edge::new("e0", "M", "S", -1, 1)],
            "M".into(),
            vec!["S".into()],
        );
        assert_eq!(negative.unwrap_err(), TopologyError::NegativeDelay("e0".into()));

        let self_loop = NetworkGraph::new(
            vec!["M".into(), "S".into()],
            vec![Edge::new("e0", "M", "M", 1, 1), Edge::new("e1", "M", "S", 1, 1)],
            "M".into(),
            vec!["S".into()],
        );
        assert_eq!(self_loop.unwrap_err(), TopologyError::SelfLoop("e0".into()));
    }

    #[test]
    fn symmetric_path_has_zero_asymmetry() {
        let g = diamond();
        let set = find_edge_disjoint_paths(&g, &"M".into(), &"S".into()).unwrap();
        for p in set.paths() {
            assert_eq!(true_path_asymmetry(&g, p).unwrap(), 0);
        }
    }

    #[test]
    fn attacked_edge_asymmetry() {
        let g = NetworkGraph::new(
            vec!["M".into(), "S".into()],
            vec![Edge::new("e0", "M", "S", micros(600), micros(100))],
            "M".into(),
            vec!["S".into()],
        )
        .unwrap();
        let p = Path::new(&g, "M".into(), vec![Hop::new("e0", Direction::Forward)]).unwrap();
        assert_eq!(true_path_asymmetry(&g, &p).unwrap(), micros(500));
        assert_eq!(true_path_asymmetry(&g, &p.reversed()).unwrap(), -micros(500));
    }

    #[test]
    fn two_edge_path_sums_asymmetries() {
        let g = NetworkGraph::new(
            vec!["M".into(), "x".into(), "S".into()],
            vec![
                Edge::new("e0", "M", "x", micros(400), micros(100)),
                Edge::new("e1", "S", "x", micros(200), micros(100)),
            ],
            "M".into(),
            vec!["S".into()],
        )
        .unwrap();
        // e1 is stored S->x, so walking x->S crosses it in reverse: alpha = -100.
        let p = Path::new(
            &g,
            "M".into(),
            vec![
                Hop::new("e0", Direction::Forward),
                Hop::new("e1", Direction::Reverse),
            ],
        )
        .unwrap();
        assert_eq!(true_path_asymmetry(&g, &p).unwrap(), micros(200));
        assert_eq!(path_delay(&g, &p, Direction::Forward).unwrap(), micros(500));
        assert_eq!(path_delay(&g, &p, Direction::Reverse).unwrap(), micros(300));
    }

    #[test]
    fn path_validation() {
        let g = diamond();
        let bad = Path::new(
            &g,
            "M".into(),
            vec![Hop::new("as", Direction::Forward)],
        );
        assert!(matches!(bad, Err(TopologyError::InvalidPath(_))));
        let unknown = Path::new(&g, "M".into(), vec![Hop::new("zz", Direction::Forward)]);
        assert_eq!(unknown.unwrap_err(), TopologyError::UnknownEdge("zz".into()));
        let repeat = Path::new(
            &g,
            "M".into(),
            vec![
                Hop::new("ma", Direction::Forward),
                Hop::new("ma", Direction::Reverse),
            ],
        );
        assert!(matches!(repeat, Err(TopologyError::InvalidPath(_))));
    }

    #[test]
    fn parallel_edges_give_two_paths() {
        let g = two_parallel();
        let set = find_edge_disjoint_paths(&g, &"M".into(), &"S".into()).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.redundant_count(), 1);
        assert_eq!(set.paths()[0].hops()[0].edge, EdgeId::from("e0"));
        assert_eq!(set.paths()[1].hops()[0].edge, EdgeId::from("e1"));
        assert!(set.is_pairwise_disjoint());
    }

    #[test]
    fn chain_gives_one_path() {
        let g = NetworkGraph::new(
            vec!["M".into(), "x".into(), "S".into()],
            vec![
                Edge::new("e0", "M", "x", 1, 1),
                Edge::new("e1", "x", "S", 1, 1),
            ],
            "M".into(),
            vec!["S".into()],
        )
        .unwrap();
        let set = find_edge_disjoint_paths(&g, &"M".into(), &"S".into()).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.paths()[0].len(), 2);
    }

    #[test]
    fn same_endpoints_rejected() {
        let g = two_parallel();
        assert_eq!(
            find_edge_disjoint_paths(&g, &"M".into(), &"M".into()).unwrap_err(),
            TopologyError::SameEndpoints
        );
    }

    #[test]
    fn zero_flow_search_fresh_and_saturated() {
        let g = two_parallel();
        let mut flow = BTreeMap::new();
        let first = zero_flow_path_search(&g, &flow, &"M".into(), &"S".into()).unwrap();
        assert_eq!(first.hops()[0].edge, EdgeId::from("e0"));

        flow.insert(EdgeId::from("e0"), 1);
        flow.insert(EdgeId::from("e1"), 0);
        let second = zero_flow_path_search(&g, &flow, &"M".into(), &"S".into()).unwrap();
        assert_eq!(second.hops()[0].edge, EdgeId::from("e1"));

        flow.insert(EdgeId::from("e1"), 1);
        assert!(zero_flow_path_search(&g, &flow, &"M".into(), &"S".into()).is_none());
    }

    #[test]
    fn disjoint_set_rejects_overlap() {
        let g = two_parallel();
        let p = Path::new(&g, "M".into(), vec![Hop::new("e0", Direction::Forward)]).unwrap();
        let err = DisjointPathSet::new("M".into(), "S".into(), vec![p.clone(), p]);
        assert!(err.is_err());
    }

    #[test]
    fn path_display() {
        let g = two_parallel();
        let p = Path::new(&g, "M".into(), vec![Hop::new("e0", Direction::Forward)]).unwrap();
        assert_eq!(p.to_string(), "M ->[e0] S");
        assert_eq!(p.reversed().to_string(), "S <-[e0] M");
    }
}
