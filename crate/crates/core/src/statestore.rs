//! Two-tier (local/global) state store with a latency/bandwidth cost model.
//!
//! Every operation pays a fixed per-op overhead plus, when the serving and
//! requesting nodes differ, a network cost of
//! `2 * path_latency + bytes / bottleneck_bandwidth` along the
//! minimum-latency path of the supplied graph.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagation::{migration_time, PropagationError};
use crate::topology::{NodeId, PrunedGraph, Topology, TopologyError};

/// Delimiter between the three key components.
pub const KEY_DELIMITER: char = '|';

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("invalid state key: {0}")]
    InvalidKey(String),
    #[error("node `{0}` hosts no storage tier")]
    NoTier(NodeId),
    #[error("node `{0}` is down")]
    NodeDown(NodeId),
    #[error("no path between `{0}` and `{1}`")]
    Unreachable(NodeId, NodeId),
    #[error("state lost: {0}")]
    StateLost(StateKey),
    #[error("merge of an empty state list")]
    EmptyMerge,
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

/// `WorkflowID | StorageAddress | FunctionID`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateKey {
    workflow_id: String,
    storage_address: String,
    function_id: String,
}

/// Location-independent part of a key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateIdent {
    pub workflow_id: String,
    pub function_id: String,
}

impl StateKey {
    pub fn new(
        workflow_id: impl Into<String>,
        storage_address: impl Into<String>,
        function_id: impl Into<String>,
    ) -> Result<Self, StoreError> {
        let key = StateKey {
            workflow_id: workflow_id.into(),
            storage_address: storage_address.into(),
            function_id: function_id.into(),
        };
        for (name, field) in key.fields() {
            if field.is_empty() {
                return Err(StoreError::InvalidKey(format!("{name} is empty")));
            }
            if field.contains(KEY_DELIMITER) {
                return Err(StoreError::InvalidKey(format!("{name} contains `{KEY_DELIMITER}`")));
            }
        }
        Ok(key)
    }

    fn fields(&self) -> [(&'static str, &str); 3] {
        [
            ("workflow id", &self.workflow_id),
            ("storage address", &self.storage_address),
            ("function id", &self.function_id),
        ]
    }

    pub fn workflow_id(&self) -> &str {
        &self.workflow_id
    }

    pub fn storage_address(&self) -> &str {
        &self.storage_address
    }

    pub fn function_id(&self) -> &str {
        &self.function_id
    }

    pub fn ident(&self) -> StateIdent {
        StateIdent { workflow_id: self.workflow_id.clone(), function_id: self.function_id.clone() }
    }

    /// Same identity at a different storage address.
    pub fn at(&self, address: &str) -> Result<Self, StoreError> {
        StateKey::new(self.workflow_id.clone(), address, self.function_id.clone())
    }

    pub fn encode(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let parts: Vec<&str> = text.split(KEY_DELIMITER).collect();
        match parts.as_slice() {
            [w, a, f] => StateKey::new(*w, *a, *f),
            _ => Err(StoreError::InvalidKey(format!("expected 3 fields, found {}", parts.len()))),
        }
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{KEY_DELIMITER}{}{KEY_DELIMITER}{}", self.workflow_id, self.storage_address, self.function_id)
    }
}

impl FromStr for StateKey {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StateKey::parse(s)
    }
}

/// An immutable state object. Simulations may omit the payload and carry
/// only its size.
#[derive(Debug, Clone, PartialEq)]
pub struct StateObject {
    pub key: StateKey,
    pub size: u64,
    pub payload: Option<Arc<[u8]>>,
}

impl StateObject {
    pub fn synthetic(key: StateKey, size: u64) -> Self {
        StateObject { key, size, payload: None }
    }

    pub fn with_payload(key: StateKey, payload: Vec<u8>) -> Self {
        StateObject { key, size: payload.len() as u64, payload: Some(payload.into()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Local,
    Global,
}

#[derive(Debug, Clone)]
pub struct StoreNode {
    pub node: NodeId,
    pub tier: Tier,
    contents: BTreeMap<StateIdent, StateObject>,
}

impl StoreNode {
    pub fn holds(&self, ident: &StateIdent) -> bool {
        self.contents.contains_key(ident)
    }

    pub fn len(&self) -> usize {
        self.contents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Read,
    Write,
    BundleRead,
    MergedWrite,
}

impl OpKind {
    pub fn is_read(self) -> bool {
        matches!(self, OpKind::Read | OpKind::BundleRead)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpKind::Read => "read",
            OpKind::Write => "write",
            OpKind::BundleRead => "bundle_read",
            OpKind::MergedWrite => "merged_write",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageOp {
    pub kind: OpKind,
    /// Node that served or stored the data.
    pub node: NodeId,
    pub keys: Vec<String>,
    pub payload_bytes: u64,
    /// Bytes that crossed the network (0 for local operations).
    pub network_bytes: u64,
    /// Overhead plus network cost, in seconds.
    pub latency: f64,
}

/// Append-only record of storage operations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StorageOpLog {
    ops: Vec<StorageOp>,
}

impl StorageOpLog {
    pub fn ops(&self) -> &[StorageOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn total_latency(&self) -> f64 {
        self.ops.iter().map(|op| op.latency).sum()
    }

    pub fn bytes_moved(&self) -> u64 {
        self.ops.iter().map(|op| op.network_bytes).sum()
    }

    pub fn count(&self, kind: OpKind) -> usize {
        self.ops.iter().filter(|op| op.kind == kind).count()
    }

    /// CSV with header `op,node,key_count,bytes,latency_s`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["op", "node", "key_count", "bytes", "latency_s"])?;
        for op in &self.ops {
            writer.serialize((op.kind.to_string(), op.node.as_str(), op.keys.len(), op.network_bytes, op.latency))?;
        }
        writer.flush()?;
        Ok(())
    }

    fn push(&mut self, op: StorageOp) {
        self.ops.push(op);
    }
}

/// Cost of one storage operation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OpCost {
    pub overhead: f64,
    pub network: f64,
}

impl OpCost {
    pub fn total(&self) -> f64 {
        self.overhead + self.network
    }
}

impl std::ops::AddAssign for OpCost {
    fn add_assign(&mut self, rhs: Self) {
        self.overhead += rhs.overhead;
        self.network += rhs.network;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoreConfig {
    /// Fixed cost of every storage operation, in seconds.
    pub op_overhead: f64,
    /// Copy every local write to the global tier in the background.
    pub replicate_to_global: bool,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig { op_overhead: 0.005, replicate_to_global: true }
    }
}

#[derive(Debug, Clone)]
pub struct WriteOutcome {
    pub key: StateKey,
    pub node: NodeId,
    pub cost: OpCost,
}

#[derive(Debug, Clone)]
pub struct ReadOutcome {
    pub state: StateObject,
    pub served_by: NodeId,
    pub cost: OpCost,
    pub hops: usize,
}

#[derive(Debug, Clone)]
pub struct BundleOutcome {
    /// States in request order.
    pub states: Vec<StateObject>,
    /// Serving node and hop distance per requested key.
    pub served_by: Vec<(NodeId, usize)>,
    pub cost: OpCost,
    /// Network cost of the group each key was served in.
    pub group_network: Vec<f64>,
    pub ops: usize,
}

/// The simulated store: a local tier on every node and the global tier on
/// one designated node.
#[derive(Debug, Clone)]
pub struct StateStore {
    tiers: BTreeMap<NodeId, StoreNode>,
    addresses: BTreeMap<NodeId, String>,
    by_address: HashMap<String, NodeId>,
    global: NodeId,
    config: StoreConfig,
    log: StorageOpLog,
}

impl StateStore {
    pub fn new(topology: &Topology, global: NodeId, config: StoreConfig) -> Result<Self, StoreError> {
        topology.node(&global)?;
        let mut tiers = BTreeMap::new();
        let mut addresses = BTreeMap::new();
        let mut by_address = HashMap::new();
        for node in topology.nodes() {
            let tier = if node.id == global { Tier::Global } else { Tier::Local };
            tiers.insert(node.id.clone(), StoreNode { node: node.id.clone(), tier, contents: BTreeMap::new() });
            addresses.insert(node.id.clone(), node.address.clone());
            by_address.insert(node.address.clone(), node.id.clone());
        }
        Ok(StateStore { tiers, addresses, by_address, global, config, log: StorageOpLog::default() })
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn global_node(&self) -> &NodeId {
        &self.global
    }

    pub fn log(&self) -> &StorageOpLog {
        &self.log
    }

    pub fn tier(&self, node: &NodeId) -> Option<&StoreNode> {
        self.tiers.get(node)
    }

    pub fn address_of(&self, node: &NodeId) -> Result<&str, StoreError> {
        self.addresses.get(node).map(String::as_str).ok_or_else(|| StoreError::NoTier(node.clone()))
    }

    pub fn node_at(&self, address: &str) -> Option<&NodeId> {
        self.by_address.get(address)
    }

    /// Places a state without charging or logging anything; used to stage
    /// workflow inputs before a run.
    pub fn seed(&mut self, state: StateObject, node: &NodeId) -> Result<StateKey, StoreError> {
        let key = state.key.at(self.address_of(node)?)?;
        self.insert(node, StateObject { key: key.clone(), ..state })?;
        Ok(key)
    }

    fn insert(&mut self, node: &NodeId, state: StateObject) -> Result<(), StoreError> {
        let ident = state.key.ident();
        if self.config.replicate_to_global && node != &self.global {
            let global_copy = StateObject { key: state.key.at(&self.addresses[&self.global])?, ..state.clone() };
            self.tiers.get_mut(&self.global).unwrap().contents.insert(ident.clone(), global_copy);
        }
        let tier = self.tiers.get_mut(node).ok_or_else(|| StoreError::NoTier(node.clone()))?;
        tier.contents.insert(ident, state);
        Ok(())
    }

    /// Network cost and hop count of moving `bytes` between two nodes.
    pub fn transfer_cost(
        graph: &PrunedGraph,
        from: &NodeId,
        to: &NodeId,
        bytes: u64,
    ) -> Result<(f64, usize), StoreError> {
        if from == to {
            return Ok((0.0, 0));
        }
        let path = graph.shortest_path(from, to)?.ok_or_else(|| StoreError::Unreachable(from.clone(), to.clone()))?;
        let hops = graph.hops(from, to)?.unwrap_or(path.hop_count());
        let network = migration_time(path.total_latency(), bytes as f64, path.min_bandwidth())?;
        Ok((network, hops))
    }

    fn write(
        &mut self,
        state: StateObject,
        node: &NodeId,
        network: f64,
        network_bytes: u64,
        kind: OpKind,
    ) -> Result<WriteOutcome, StoreError> {
        let key = state.key.at(self.address_of(node)?)?;
        let cost = OpCost { overhead: self.config.op_overhead, network };
        self.log.push(StorageOp {
            kind,
            node: node.clone(),
            keys: vec![key.encode()],
            payload_bytes: state.size,
            network_bytes,
            latency: cost.total(),
        });
        self.insert(node, StateObject { key: key.clone(), ..state })?;
        Ok(WriteOutcome { key, node: node.clone(), cost })
    }

    /// Stores `state` on `node`, shipping it from `origin` over `graph`.
    pub fn put(
        &mut self,
        state: StateObject,
        node: &NodeId,
        origin: &NodeId,
        graph: &PrunedGraph,
    ) -> Result<WriteOutcome, StoreError> {
        self.put_as(state, node, origin, graph, OpKind::Write)
    }

    pub(crate) fn put_as(
        &mut self,
        state: StateObject,
        node: &NodeId,
        origin: &NodeId,
        graph: &PrunedGraph,
        kind: OpKind,
    ) -> Result<WriteOutcome, StoreError> {
        if !self.tiers.contains_key(node) {
            return Err(StoreError::NoTier(node.clone()));
        }
        if !graph.contains(node) {
            return Err(StoreError::NodeDown(node.clone()));
        }
        let (network, _) = Self::transfer_cost(graph, origin, node, state.size)?;
        let bytes = if origin == node { 0 } else { state.size };
        self.write(state, node, network, bytes, kind)
    }

    /// Stores `state` on `node` with a network cost already computed along a
    /// precomputed route.
    pub(crate) fn put_routed(
        &mut self,
        state: StateObject,
        node: &NodeId,
        network: f64,
        remote: bool,
        kind: OpKind,
    ) -> Result<WriteOutcome, StoreError> {
        let bytes = if remote { state.size } else { 0 };
        self.write(state, node, network, bytes, kind)
    }

    /// Node that would serve `key` on `graph`: its storage node when that
    /// node is up and holds it, else the global tier.
    pub fn serving_node(&self, key: &StateKey, graph: &PrunedGraph) -> Result<NodeId, StoreError> {
        let ident = key.ident();
        if let Some(node) = self.by_address.get(key.storage_address()) {
            if graph.contains(node) && self.tiers[node].holds(&ident) {
                return Ok(node.clone());
            }
        }
        if self.tiers[&self.global].holds(&ident) {
            if graph.contains(&self.global) {
                return Ok(self.global.clone());
            }
            return Err(StoreError::NodeDown(self.global.clone()));
        }
        Err(StoreError::StateLost(key.clone()))
    }

    fn lookup(&self, node: &NodeId, key: &StateKey) -> StateObject {
        self.tiers[node].contents[&key.ident()].clone()
    }

    pub fn get(&mut self, key: &StateKey, reader: &NodeId, graph: &PrunedGraph) -> Result<ReadOutcome, StoreError> {
        let serving = self.serving_node(key, graph)?;
        let state = self.lookup(&serving, key);
        let (network, hops) = Self::transfer_cost(graph, &serving, reader, state.size)?;
        let cost = OpCost { overhead: self.config.op_overhead, network };
        self.log.push(StorageOp {
            kind: OpKind::Read,
            node: serving.clone(),
            keys: vec![state.key.encode()],
            payload_bytes: state.size,
            network_bytes: if hops == 0 { 0 } else { state.size },
            latency: cost.total(),
        });
        Ok(ReadOutcome { state, served_by: serving, cost, hops })
    }

    /// Reads several keys with one operation per serving node.
    pub fn bundle_get(
        &mut self,
        keys: &[StateKey],
        reader: &NodeId,
        graph: &PrunedGraph,
    ) -> Result<BundleOutcome, StoreError> {
        let mut groups: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (i, key) in keys.iter().enumerate() {
            groups.entry(self.serving_node(key, graph)?).or_default().push(i);
        }
        let mut states = vec![None; keys.len()];
        let mut served_by = vec![None; keys.len()];
        let mut group_network = vec![0.0; keys.len()];
        let mut cost = OpCost::default();
        let ops = groups.len();
        for (serving, members) in groups {
            let objects: Vec<StateObject> = members.iter().map(|&i| self.lookup(&serving, &keys[i])).collect();
            let bytes: u64 = objects.iter().map(|s| s.size).sum();
            let (network, hops) = Self::transfer_cost(graph, &serving, reader, bytes)?;
            let op = OpCost { overhead: self.config.op_overhead, network };
            cost += op;
            self.log.push(StorageOp {
                kind: OpKind::BundleRead,
                node: serving.clone(),
                keys: objects.iter().map(|s| s.key.encode()).collect(),
                payload_bytes: bytes,
                network_bytes: if hops == 0 { 0 } else { bytes },
                latency: op.total(),
            });
            for (&i, object) in members.iter().zip(objects) {
                states[i] = Some(object);
                served_by[i] = Some((serving.clone(), hops));
                group_network[i] = network;
            }
        }
        Ok(BundleOutcome {
            states: states.into_iter().map(Option::unwrap).collect(),
            served_by: served_by.into_iter().map(Option::unwrap).collect(),
            cost,
            group_network,
            ops,
        })
    }

    /// Builds the merged object of several states without storing it.
    /// Payloads are concatenated in function-id order; the new key names
    /// every member function joined by `+`.
    pub fn merge_states(states: &[StateObject]) -> Result<StateObject, StoreError> {
        let first = states.first().ok_or(StoreError::EmptyMerge)?;
        let mut sorted: Vec<&StateObject> = states.iter().collect();
        sorted.sort_by(|a, b| a.key.function_id().cmp(b.key.function_id()));
        let function_id = sorted.iter().map(|s| s.key.function_id()).collect::<Vec<_>>().join("+");
        let key = StateKey::new(first.key.workflow_id(), first.key.storage_address(), function_id)?;
        let size = sorted.iter().map(|s| s.size).sum();
        let payload = if sorted.iter().all(|s| s.payload.is_some()) {
            let mut bytes = Vec::with_capacity(size as usize);
            for s in &sorted {
                bytes.extend_from_slice(s.payload.as_ref().unwrap());
            }
            Some(Arc::from(bytes))
        } else {
            None
        };
        Ok(StateObject { key, size, payload })
    }

    /// Merges `states` and stores the result with a single write.
    pub fn merged_put(
        &mut self,
        states: &[StateObject],
        node: &NodeId,
        origin: &NodeId,
        graph: &PrunedGraph,
    ) -> Result<WriteOutcome, StoreError> {
        let merged = Self::merge_states(states)?;
        self.put_as(merged, node, origin, graph, OpKind::MergedWrite)
    }
}
