//! Network model of the Edge-Cloud-Space continuum.
//!
//! A [`Topology`] holds typed nodes with availability schedules and
//! bidirectional links. Pruning it at an epoch yields an immutable
//! [`PrunedGraph`] snapshot on which shortest-path and hop queries run.
//! Time is a discrete epoch counter; link latencies are seconds and
//! bandwidths bytes per second.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Discrete simulation time.
pub type Epoch = u64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("duplicate node `{0}`")]
    DuplicateNode(NodeId),
    #[error("node id must not be empty")]
    EmptyNodeId,
    #[error("invalid node `{id}`: {reason}")]
    InvalidNode { id: NodeId, reason: String },
    #[error("invalid link {src}-{dst}: {reason}")]
    InvalidLink { src: NodeId, dst: NodeId, reason: String },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Result<Self, TopologyError> {
        let id = id.into();
        if id.is_empty() {
            return Err(TopologyError::EmptyNodeId);
        }
        Ok(NodeId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Node types. `Cloud`, `Edge` and `Satellite` host compute and storage;
/// the remaining kinds only serve as reachability targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Cloud,
    Edge,
    Satellite,
    Drone,
    EoSatellite,
    GroundStation,
}

impl NodeKind {
    /// Kinds whose availability may vary over time.
    pub fn is_orbital(self) -> bool {
        matches!(self, NodeKind::Satellite | NodeKind::EoSatellite | NodeKind::Drone)
    }
}

/// Half-open epoch interval `[start, end)`; `end = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: Epoch,
    pub end: Option<Epoch>,
}

impl Interval {
    pub fn new(start: Epoch, end: Option<Epoch>) -> Self {
        Interval { start, end }
    }

    pub fn contains(&self, t: Epoch) -> bool {
        t >= self.start && self.end.is_none_or(|end| t < end)
    }
}

/// Ordered, non-overlapping intervals during which a node is up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvailabilitySchedule {
    intervals: Vec<Interval>,
}

impl AvailabilitySchedule {
    pub fn always() -> Self {
        AvailabilitySchedule { intervals: vec![Interval::new(0, None)] }
    }

    pub fn never() -> Self {
        AvailabilitySchedule { intervals: Vec::new() }
    }

    pub fn new(intervals: Vec<Interval>) -> Result<Self, TopologyError> {
        let mut prev_end: Option<Epoch> = None;
        for (i, iv) in intervals.iter().enumerate() {
            if let Some(end) = iv.end {
                if end <= iv.start {
                    return Err(TopologyError::InvalidSchedule(format!(
                        "interval {i} is empty: [{}, {end})",
                        iv.start
                    )));
                }
            }
            if i > 0 {
                match prev_end {
                    None => {
                        return Err(TopologyError::InvalidSchedule(format!(
                            "interval {i} follows an unbounded interval"
                        )))
                    }
                    Some(end) if iv.start < end => {
                        return Err(TopologyError::InvalidSchedule(format!("interval {i} overlaps or is out of order")))
                    }
                    _ => {}
                }
            }
            prev_end = iv.end;
        }
        Ok(AvailabilitySchedule { intervals })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_always(&self) -> bool {
        self.intervals == [Interval::new(0, None)]
    }

    /// `a_n(t)`.
    pub fn is_up(&self, t: Epoch) -> bool {
        // intervals are sorted: find the last one starting at or before t
        let idx = self.intervals.partition_point(|iv| iv.start <= t);
        idx > 0 && self.intervals[idx - 1].contains(t)
    }

    /// Copy of this schedule with the interval at `index` removed.
    pub fn without(&self, index: usize) -> Self {
        let mut intervals = self.intervals.clone();
        if index < intervals.len() {
            intervals.remove(index);
        }
        AvailabilitySchedule { intervals }
    }
}

impl Default for AvailabilitySchedule {
    fn default() -> Self {
        Self::always()
    }
}

/// Orbital temperature override for an epoch interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempWindow {
    pub interval: Interval,
    pub temp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Storage address used in state keys. Defaults to the node id.
    pub address: String,
    /// Resource capacity `R_n`.
    pub capacity: f64,
    /// Available power in watts.
    pub power_available: f64,
    /// Baseline orbital temperature in °C.
    pub temp_orbital: f64,
    /// Maximum allowed temperature in °C.
    pub temp_max: f64,
    pub temp_windows: Vec<TempWindow>,
    pub schedule: AvailabilitySchedule,
}

impl Node {
    /// A node with unbounded capacity, power and thermal headroom that is
    /// always available.
    pub fn new(id: impl Into<NodeId>, kind: NodeKind) -> Self {
        let id = id.into();
        Node {
            address: id.as_str().to_owned(),
            id,
            kind,
            capacity: f64::INFINITY,
            power_available: f64::INFINITY,
            temp_orbital: 0.0,
            temp_max: f64::INFINITY,
            temp_windows: Vec::new(),
            schedule: AvailabilitySchedule::always(),
        }
    }

    pub fn with_address(mut self, address: impl Into<String>) -> Self {
        self.address = address.into();
        self
    }

    pub fn with_capacity(mut self, capacity: f64) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn with_power(mut self, watts: f64) -> Self {
        self.power_available = watts;
        self
    }

    pub fn with_temperature(mut self, orbital: f64, max: f64) -> Self {
        self.temp_orbital = orbital;
        self.temp_max = max;
        self
    }

    pub fn with_schedule(mut self, schedule: AvailabilitySchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_temp_window(mut self, window: TempWindow) -> Self {
        self.temp_windows.push(window);
        self
    }

    /// `T_orb^n(t)`: the first matching window, else the baseline.
    pub fn temp_orbital_at(&self, t: Epoch) -> f64 {
        self.temp_windows.iter().find(|w| w.interval.contains(t)).map_or(self.temp_orbital, |w| w.temp)
    }

    fn validate(&self) -> Result<(), TopologyError> {
        let bad = |reason: &str| Err(TopologyError::InvalidNode { id: self.id.clone(), reason: reason.to_owned() });
        if self.id.as_str().is_empty() {
            return Err(TopologyError::EmptyNodeId);
        }
        if self.address.is_empty() {
            return bad("address must not be empty");
        }
        // addresses become a field of state keys
        if self.address.contains('|') {
            return bad("address must not contain `|`");
        }
        if self.capacity.is_nan() || self.capacity < 0.0 {
            return bad("capacity must be >= 0");
        }
        if self.power_available.is_nan() || self.power_available < 0.0 {
            return bad("available power must be >= 0");
        }
        if self.temp_max.is_nan() || self.temp_orbital.is_nan() || self.temp_orbital > self.temp_max {
            return bad("orbital temperature exceeds the maximum");
        }
        if self.temp_windows.iter().any(|w| w.temp.is_nan() || w.temp > self.temp_max) {
            return bad("orbital temperature window exceeds the maximum");
        }
        if !self.kind.is_orbital() && !self.schedule.is_always() {
            return bad("only orbital nodes may carry an availability schedule");
        }
        Ok(())
    }
}

/// Bidirectional link; one record covers both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub src: NodeId,
    pub dst: NodeId,
    /// One-way latency in seconds.
    pub latency: f64,
    /// Bytes per second.
    pub bandwidth: f64,
}

impl Link {
    pub fn new(src: impl Into<NodeId>, dst: impl Into<NodeId>, latency: f64, bandwidth: f64) -> Self {
        Link { src: src.into(), dst: dst.into(), latency, bandwidth }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: BTreeMap<NodeId, Node>,
    links: Vec<Link>,
    required_types: BTreeSet<NodeKind>,
}

impl Topology {
    pub fn new(nodes: Vec<Node>, links: Vec<Link>, required_types: BTreeSet<NodeKind>) -> Result<Self, TopologyError> {
        let mut map = BTreeMap::new();
        for node in nodes {
            node.validate()?;
            let id = node.id.clone();
            if map.insert(id.clone(), node).is_some() {
                return Err(TopologyError::DuplicateNode(id));
            }
        }
        let mut seen = BTreeSet::new();
        for link in &links {
            let invalid = |reason: &str| TopologyError::InvalidLink {
                src: link.src.clone(),
                dst: link.dst.clone(),
                reason: reason.to_owned(),
            };
            for end in [&link.src, &link.dst] {
                if !map.contains_key(end) {
                    return Err(invalid(&format!("endpoint `{end}` does not exist")));
                }
            }
            if link.src == link.dst {
                return Err(invalid("self-link"));
            }
            if !(link.latency > 0.0 && link.latency.is_finite()) {
                return Err(invalid("latency must be positive"));
            }
            if !(link.bandwidth > 0.0) {
                return Err(invalid("bandwidth must be positive"));
            }
            let pair = if link.src < link.dst {
                (link.src.clone(), link.dst.clone())
            } else {
                (link.dst.clone(), link.src.clone())
            };
            if !seen.insert(pair) {
                return Err(invalid("duplicate link"));
            }
        }
        Ok(Topology { nodes: map, links, required_types })
    }

    pub fn node(&self, id: &NodeId) -> Result<&Node, TopologyError> {
        self.nodes.get(id).ok_or_else(|| TopologyError::UnknownNode(id.clone()))
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn required_types(&self) -> &BTreeSet<NodeKind> {
        &self.required_types
    }

    /// Copy with one node's schedule replaced.
    pub fn with_schedule(&self, id: &NodeId, schedule: AvailabilitySchedule) -> Result<Self, TopologyError> {
        let mut next = self.clone();
        let node = next.nodes.get_mut(id).ok_or_else(|| TopologyError::UnknownNode(id.clone()))?;
        node.schedule = schedule;
        node.validate()?;
        Ok(next)
    }

    pub fn availability(&self, id: &NodeId, t: Epoch) -> Result<bool, TopologyError> {
        Ok(self.node(id)?.schedule.is_up(t))
    }

    fn up_adjacency(&self, t: Epoch) -> BTreeMap<&NodeId, Vec<&NodeId>> {
        let mut adj: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
        for (id, node) in &self.nodes {
            if node.schedule.is_up(t) {
                adj.insert(id, Vec::new());
            }
        }
        for link in &self.links {
            if adj.contains_key(&link.src) && adj.contains_key(&link.dst) {
                adj.get_mut(&link.src).unwrap().push(&link.dst);
                adj.get_mut(&link.dst).unwrap().push(&link.src);
            }
        }
        adj
    }

    /// `⋀_τ r_τ(n, t)`: breadth-first search over nodes and links that are up
    /// at `t`. A down node reaches nothing; an empty requirement set is
    /// vacuously satisfied.
    pub fn reachable_all_types(&self, id: &NodeId, t: Epoch) -> Result<bool, TopologyError> {
        let node = self.node(id)?;
        if self.required_types.is_empty() {
            return Ok(true);
        }
        if !node.schedule.is_up(t) {
            return Ok(false);
        }
        let adj = self.up_adjacency(t);
        let mut missing: BTreeSet<NodeKind> = self.required_types.clone();
        let mut visited = BTreeSet::from([id]);
        let mut queue = VecDeque::from([id]);
        while let Some(current) = queue.pop_front() {
            missing.remove(&self.nodes[current].kind);
            if missing.is_empty() {
                return Ok(true);
            }
            for &next in &adj[current] {
                if visited.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        Ok(false)
    }

    /// `A(t)`: nodes that are scheduled up and reach every required type.
    pub fn available_set(&self, t: Epoch) -> BTreeSet<NodeId> {
        let adj = self.up_adjacency(t);
        if self.required_types.is_empty() {
            return adj.keys().map(|&id| id.clone()).collect();
        }
        // reachability is a component property, so label components once
        let mut result = BTreeSet::new();
        let mut visited: BTreeSet<&NodeId> = BTreeSet::new();
        for &start in adj.keys() {
            if !visited.insert(start) {
                continue;
            }
            let mut component = vec![start];
            let mut kinds = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            while let Some(current) = queue.pop_front() {
                kinds.insert(self.nodes[current].kind);
                for &next in &adj[current] {
                    if visited.insert(next) {
                        component.push(next);
                        queue.push_back(next);
                    }
                }
            }
            if self.required_types.is_subset(&kinds) {
                result.extend(component.into_iter().cloned());
            }
        }
        result
    }

    /// Identify phase: keep available nodes and the links between them.
    pub fn prune(&self, t: Epoch) -> PrunedGraph {
        let available = self.available_set(t);
        PrunedGraph::build(t, available, &self.links)
    }

    /// Prune keeping only nodes available at every epoch in
    /// `[t, t + horizon]`. `anchor` is kept whenever it is available at `t`,
    /// so that the node currently holding a state can always act as a
    /// path source.
    pub fn prune_lookahead(&self, t: Epoch, horizon: Epoch, anchor: Option<&NodeId>) -> PrunedGraph {
        let mut stable = self.available_set(t);
        let anchor_up = anchor.filter(|a| stable.contains(*a)).cloned();
        for step in 1..=horizon {
            let later = self.available_set(t + step);
            stable.retain(|id| later.contains(id));
        }
        if let Some(anchor) = anchor_up {
            stable.insert(anchor);
        }
        PrunedGraph::build(t, stable, &self.links)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Adjacent {
    to: usize,
    latency: f64,
    bandwidth: f64,
}

/// Edge of a pruned graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub latency: f64,
    pub bandwidth: f64,
}

/// Immutable snapshot of the up-graph at one epoch. Node indices follow
/// lexicographic id order, which makes index comparison the tie-break rule.
#[derive(Debug, Clone)]
pub struct PrunedGraph {
    epoch: Epoch,
    ids: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    adjacency: Vec<Vec<Adjacent>>,
    edges: Vec<PrunedEdge>,
}

impl PrunedGraph {
    fn build(epoch: Epoch, nodes: BTreeSet<NodeId>, links: &[Link]) -> Self {
        let ids: Vec<NodeId> = nodes.into_iter().collect();
        let index: HashMap<NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let mut adjacency = vec![Vec::new(); ids.len()];
        let mut edges = Vec::new();
        for link in links {
            if let (Some(&a), Some(&b)) = (index.get(&link.src), index.get(&link.dst)) {
                adjacency[a].push(Adjacent { to: b, latency: link.latency, bandwidth: link.bandwidth });
                adjacency[b].push(Adjacent { to: a, latency: link.latency, bandwidth: link.bandwidth });
                edges.push(PrunedEdge {
                    src: link.src.clone(),
                    dst: link.dst.clone(),
                    latency: link.latency,
                    bandwidth: link.bandwidth,
                });
            }
        }
        for list in &mut adjacency {
            list.sort_by_key(|a| a.to);
        }
        PrunedGraph { epoch, ids, index, adjacency, edges }
    }

    pub fn epoch(&self) -> Epoch {
        self.epoch
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.index.contains_key(id)
    }

    /// Node ids in lexicographic order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn edges(&self) -> &[PrunedEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn idx(&self, id: &NodeId) -> Result<usize, TopologyError> {
        self.index.get(id).copied().ok_or_else(|| TopologyError::UnknownNode(id.clone()))
    }

    /// Single-source Dijkstra. Returns distances and predecessors; among
    /// equal-cost predecessors the lexicographically smallest wins.
    fn dijkstra(&self, src: usize, stop_at: Option<usize>) -> (Vec<f64>, Vec<Option<usize>>) {
        let n = self.ids.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Frontier { cost: 0.0, node: src });
        while let Some(Frontier { cost, node }) = heap.pop() {
            if done[node] {
                continue;
            }
            done[node] = true;
            if Some(node) == stop_at {
                break;
            }
            for adj in &self.adjacency[node] {
                if done[adj.to] {
                    continue;
                }
                let candidate = cost + adj.latency;
                match candidate.total_cmp(&dist[adj.to]) {
                    Ordering::Less => {
                        dist[adj.to] = candidate;
                        pred[adj.to] = Some(node);
                        heap.push(Frontier { cost: candidate, node: adj.to });
                    }
                    Ordering::Equal if pred[adj.to].is_some_and(|p| node < p) => {
                        pred[adj.to] = Some(node);
                    }
                    _ => {}
                }
            }
        }
        (dist, pred)
    }

    /// Minimum-latency path, or `None` when `dst` is unreachable.
    pub fn shortest_path(&self, src: &NodeId, dst: &NodeId) -> Result<Option<Path>, TopologyError> {
        let s = self.idx(src)?;
        let d = self.idx(dst)?;
        if s == d {
            return Ok(Some(Path::single(src.clone())));
        }
        let (dist, pred) = self.dijkstra(s, Some(d));
        if dist[d].is_infinite() {
            return Ok(None);
        }
        let mut sequence = vec![d];
        let mut current = d;
        while let Some(p) = pred[current] {
            sequence.push(p);
            current = p;
        }
        sequence.reverse();
        Ok(Some(self.annotate(&sequence)))
    }

    /// Shortest-path latency from `src` to every node (`None` = unreachable),
    /// in [`nodes`](Self::nodes) order.
    pub fn latencies_from(&self, src: &NodeId) -> Result<Vec<Option<f64>>, TopologyError> {
        let s = self.idx(src)?;
        let (dist, _) = self.dijkstra(s, None);
        Ok(dist.into_iter().map(|d| d.is_finite().then_some(d)).collect())
    }

    /// Shortest-path latency between two nodes.
    pub fn latency(&self, src: &NodeId, dst: &NodeId) -> Result<Option<f64>, TopologyError> {
        Ok(self.shortest_path(src, dst)?.map(|p| p.total_latency()))
    }

    fn annotate(&self, sequence: &[usize]) -> Path {
        let mut path = Path::single(self.ids[sequence[0]].clone());
        for pair in sequence.windows(2) {
            let link = self.adjacency[pair[0]]
                .iter()
                .filter(|a| a.to == pair[1])
                .min_by(|a, b| a.latency.total_cmp(&b.latency))
                .expect("consecutive path nodes share an edge");
            path.push(self.ids[pair[1]].clone(), link.latency, link.bandwidth);
        }
        path
    }

    /// Minimum hop count (unit edge weights).
    pub fn hops(&self, a: &NodeId, b: &NodeId) -> Result<Option<usize>, TopologyError> {
        let s = self.idx(a)?;
        let d = self.idx(b)?;
        if s == d {
            return Ok(Some(0));
        }
        let mut depth = vec![usize::MAX; self.ids.len()];
        depth[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(node) = queue.pop_front() {
            for adj in &self.adjacency[node] {
                if depth[adj.to] == usize::MAX {
                    depth[adj.to] = depth[node] + 1;
                    if adj.to == d {
                        return Ok(Some(depth[adj.to]));
                    }
                    queue.push_back(adj.to);
                }
            }
        }
        Ok(None)
    }

    /// Neighbours of a node with the connecting link's latency and bandwidth.
    pub fn neighbors(&self, id: &NodeId) -> Result<Vec<(&NodeId, f64, f64)>, TopologyError> {
        let i = self.idx(id)?;
        Ok(self.adjacency[i].iter().map(|a| (&self.ids[a.to], a.latency, a.bandwidth)).collect())
    }
}

#[derive(Debug, Clone, Copy)]
struct Frontier {
    cost: f64,
    node: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl Ord for Frontier {
    // min-heap on (cost, node)
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A path annotated with per-prefix cumulative latency and bottleneck
/// bandwidth. Index 0 is the source: cumulative latency 0 and infinite
/// bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    nodes: Vec<NodeId>,
    hop_latencies: Vec<f64>,
    cumulative: Vec<f64>,
    bottleneck: Vec<f64>,
}

impl Path {
    fn single(node: NodeId) -> Self {
        Path { nodes: vec![node], hop_latencies: Vec::new(), cumulative: vec![0.0], bottleneck: vec![f64::INFINITY] }
    }

    fn push(&mut self, node: NodeId, latency: f64, bandwidth: f64) {
        let last = self.cumulative.len() - 1;
        self.cumulative.push(self.cumulative[last] + latency);
        self.bottleneck.push(self.bottleneck[last].min(bandwidth));
        self.hop_latencies.push(latency);
        self.nodes.push(node);
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn hop_latencies(&self) -> &[f64] {
        &self.hop_latencies
    }

    /// Latency from the source to each node on the path.
    pub fn cumulative_latency(&self) -> &[f64] {
        &self.cumulative
    }

    /// Minimum link bandwidth from the source to each node on the path.
    pub fn bottleneck_bandwidth(&self) -> &[f64] {
        &self.bottleneck
    }

    pub fn total_latency(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn min_bandwidth(&self) -> f64 {
        *self.bottleneck.last().unwrap()
    }

    pub fn hop_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn source(&self) -> &NodeId {
        &self.nodes[0]
    }

    pub fn destination(&self) -> &NodeId {
        self.nodes.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(intervals: &[(Epoch, Option<Epoch>)]) -> AvailabilitySchedule {
        AvailabilitySchedule::new(intervals.iter().map(|&(s, e)| Interval::new(s, e)).collect()).unwrap()
    }

    fn always_up(ids: &[&str], links: &[(&str, &str, f64)]) -> Topology {
        Topology::new(
            ids.iter().map(|&id| Node::new(id, NodeKind::Satellite)).collect(),
            links.iter().map(|&(a, b, l)| Link::new(a, b, l, 1.0e9)).collect(),
            BTreeSet::new(),
        )
        .unwrap()
    }

    #[test]
    fn schedule_membership() {
        let s = sched(&[(0, Some(10))]);
        assert!(s.is_up(5));
        assert!(s.is_up(0));
        assert!(!s.is_up(10));
        assert!(AvailabilitySchedule::always().is_up(1_000_000));
        let gaps = sched(&[(0, Some(2)), (5, Some(7)), (9, None)]);
        let up: Vec<Epoch> = (0..12).filter(|&t| gaps.is_up(t)).collect();
        assert_eq!(up, vec![0, 1, 5, 6, 9, 10, 11]);
    }

    #[test]
    fn schedule_rejects_overlap_and_empty() {
        assert!(AvailabilitySchedule::new(vec![Interval::new(0, Some(5)), Interval::new(4, Some(8))]).is_err());
        assert!(AvailabilitySchedule::new(vec![Interval::new(3, Some(3))]).is_err());
        assert!(AvailabilitySchedule::new(vec![Interval::new(0, None), Interval::new(4, Some(8))]).is_err());
    }

    #[test]
    fn cloud_is_always_available() {
        let topo = Topology::new(vec![Node::new("cloud", NodeKind::Cloud)], vec![], BTreeSet::new()).unwrap();
        for t in [0, 1, 99, 12345] {
            assert!(topo.availability(&"cloud".into(), t).unwrap());
        }
    }

    #[test]
    fn ground_nodes_reject_schedules() {
        let node = Node::new("edge", NodeKind::Edge).with_schedule(sched(&[(0, Some(3))]));
        assert!(Topology::new(vec![node], vec![], BTreeSet::new()).is_err());
    }

    #[test]
    fn link_validation() {
        let nodes = || vec![Node::new("a", NodeKind::Satellite), Node::new("b", NodeKind::Satellite)];
        let bad = [
            Link::new("a", "a", 0.01, 1.0),
            Link::new("a", "b", 0.0, 1.0),
            Link::new("a", "b", 0.01, 0.0),
            Link::new("a", "c", 0.01, 1.0),
        ];
        for link in bad {
            assert!(Topology::new(nodes(), vec![link], BTreeSet::new()).is_err());
        }
        let dup = vec![Link::new("a", "b", 0.01, 1.0), Link::new("b", "a", 0.02, 1.0)];
        assert!(Topology::new(nodes(), dup, BTreeSet::new()).is_err());
    }

    fn reachability_topology(isolated: bool) -> Topology {
        // sat-1 - sat-2 - sat-3 - gs ; sat-2 goes down at t >= 5 when isolated
        let sat2 = if isolated { sched(&[(0, Some(5))]) } else { AvailabilitySchedule::always() };
        Topology::new(
            vec![
                Node::new("sat-1", NodeKind::Satellite),
                Node::new("sat-2", NodeKind::Satellite).with_schedule(sat2),
                Node::new("sat-3", NodeKind::Satellite),
                Node::new("gs", NodeKind::GroundStation),
            ],
            vec![
                Link::new("sat-1", "sat-2", 0.005, 1e9),
                Link::new("sat-2", "sat-3", 0.005, 1e9),
                Link::new("sat-3", "gs", 0.030, 1e8),
            ],
            BTreeSet::from([NodeKind::GroundStation]),
        )
        .unwrap()
    }

    #[test]
    fn reachability_via_isl_chain() {
        let topo = reachability_topology(true);
        assert!(topo.reachable_all_types(&"sat-1".into(), 0).unwrap());
        // sat-1's only peer is down
        assert!(!topo.reachable_all_types(&"sat-1".into(), 5).unwrap());
        assert!(topo.reachable_all_types(&"sat-3".into(), 5).unwrap());
        assert!(topo.reachable_all_types(&"nope".into(), 0).is_err());
    }

    #[test]
    fn empty_requirements_are_vacuous() {
        let topo = always_up(&["a", "b"], &[]);
        assert!(topo.reachable_all_types(&"a".into(), 0).unwrap());
        assert_eq!(topo.available_set(0).len(), 2);
    }

    #[test]
    fn available_set_excludes_down_and_partitioned() {
        let topo = reachability_topology(true);
        assert_eq!(topo.available_set(0).len(), 4);
        let at5: Vec<_> = topo.available_set(5).into_iter().map(|n| n.to_string()).collect();
        assert_eq!(at5, vec!["gs", "sat-3"]);
    }

    #[test]
    fn prune_drops_incident_edges() {
        let topo = reachability_topology(false).with_schedule(&"sat-3".into(), sched(&[(1, None)])).unwrap();
        let g0 = topo.prune(0);
        // sat-3 down: only the ground station still reaches a ground station
        assert_eq!(g0.nodes(), &[NodeId::from("gs")]);
        assert_eq!(g0.edge_count(), 0);
        let g1 = topo.prune(1);
        assert_eq!(g1.node_count(), 4);
        assert_eq!(g1.edge_count(), 3);
    }

    #[test]
    fn shortest_path_prefers_two_hops() {
        let topo = always_up(&["A", "B", "C"], &[("A", "B", 0.005), ("B", "C", 0.005), ("A", "C", 0.020)]);
        let g = topo.prune(0);
        let path = g.shortest_path(&"A".into(), &"C".into()).unwrap().unwrap();
        assert_eq!(path.nodes(), &["A".into(), "B".into(), "C".into()] as &[NodeId]);
        assert!((path.total_latency() - 0.010).abs() < 1e-12);
        assert_eq!(path.hop_count(), 2);
        assert_eq!(path.cumulative_latency()[0], 0.0);
    }

    #[test]
    fn shortest_path_degenerate_and_unreachable() {
        let topo = always_up(&["A", "B", "C"], &[("A", "B", 0.005)]);
        let g = topo.prune(0);
        let p = g.shortest_path(&"A".into(), &"A".into()).unwrap().unwrap();
        assert_eq!(p.hop_count(), 0);
        assert_eq!(p.total_latency(), 0.0);
        assert!(g.shortest_path(&"A".into(), &"C".into()).unwrap().is_none());
        assert!(g.shortest_path(&"A".into(), &"Z".into()).is_err());
    }

    #[test]
    fn equal_cost_tie_breaks_lexicographically() {
        // S-{M,N}-T with identical costs: M < N
        let topo =
            always_up(&["S", "N", "M", "T"], &[("S", "N", 0.25), ("N", "T", 0.25), ("S", "M", 0.25), ("M", "T", 0.25)]);
        let g = topo.prune(0);
        let path = g.shortest_path(&"S".into(), &"T".into()).unwrap().unwrap();
        assert_eq!(path.nodes()[1], NodeId::from("M"));
    }

    #[test]
    fn bottleneck_bandwidth_per_prefix() {
        let topo = Topology::new(
            vec![
                Node::new("a", NodeKind::Satellite),
                Node::new("b", NodeKind::Satellite),
                Node::new("c", NodeKind::Satellite),
            ],
            vec![Link::new("a", "b", 0.01, 5.0), Link::new("b", "c", 0.01, 9.0)],
            BTreeSet::new(),
        )
        .unwrap();
        let g = topo.prune(0);
        let path = g.shortest_path(&"a".into(), &"c".into()).unwrap().unwrap();
        assert_eq!(path.bottleneck_bandwidth(), &[f64::INFINITY, 5.0, 5.0]);
    }

    #[test]
    fn hop_counts() {
        let topo = always_up(&["a", "b", "c", "d"], &[("a", "b", 0.1), ("b", "c", 0.1), ("c", "d", 0.1)]);
        let g = topo.prune(0);
        assert_eq!(g.hops(&"a".into(), &"a".into()).unwrap(), Some(0));
        assert_eq!(g.hops(&"a".into(), &"b".into()).unwrap(), Some(1));
        assert_eq!(g.hops(&"a".into(), &"d".into()).unwrap(), Some(3));
        assert_eq!(g.hops(&"d".into(), &"a".into()).unwrap(), Some(3));
        assert!(g.hops(&"a".into(), &"x".into()).is_err());
    }

    #[test]
    fn lookahead_keeps_anchor() {
        let topo = Topology::new(
            vec![
                Node::new("a", NodeKind::Satellite).with_schedule(sched(&[(0, Some(1))])),
                Node::new("b", NodeKind::Satellite).with_schedule(sched(&[(0, Some(1))])),
                Node::new("c", NodeKind::Satellite),
            ],
            vec![Link::new("a", "b", 0.01, 1.0), Link::new("a", "c", 0.01, 1.0)],
            BTreeSet::new(),
        )
        .unwrap();
        let g = topo.prune_lookahead(0, 1, Some(&"a".into()));
        assert!(g.contains(&"a".into()));
        assert!(!g.contains(&"b".into()));
        assert!(g.contains(&"c".into()));
        assert_eq!(topo.prune_lookahead(0, 0, None).node_count(), 3);
    }
}
