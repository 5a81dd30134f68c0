//! Compute and Offload phases of state propagation.
//!
//! `compute_placement` walks the minimum-latency path from the executor to
//! the destination backwards and keeps the first node whose migration time
//! fits the budget. `offload` then stores the state there, or on the
//! executor when the chosen node is gone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::statestore::{OpKind, StateObject, StateStore, StoreError, WriteOutcome};
use crate::topology::{NodeId, PrunedGraph, TopologyError};
use crate::workflow::FunctionId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("invalid migration input: {0}")]
    InvalidInput(String),
    #[error("executor `{0}` is not available")]
    ExecutorUnavailable(NodeId),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// `l + size/bandwidth + l`. Infinite bandwidth yields a zero transfer term.
pub fn migration_time(cumulative_latency: f64, size: f64, bandwidth: f64) -> Result<f64, PropagationError> {
    if bandwidth.is_nan() || bandwidth <= 0.0 {
        return Err(PropagationError::InvalidBandwidth(bandwidth));
    }
    if !(cumulative_latency >= 0.0) || !(size >= 0.0) {
        return Err(PropagationError::InvalidInput(format!("latency {cumulative_latency}, size {size}")));
    }
    Ok(cumulative_latency + transfer_time(size, bandwidth) + cumulative_latency)
}

fn transfer_time(size: f64, bandwidth: f64) -> f64 {
    if size == 0.0 || bandwidth.is_infinite() {
        0.0
    } else {
        size / bandwidth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationEstimate {
    pub candidate: NodeId,
    pub cumulative_latency: f64,
    pub transfer_time: f64,
    pub total: f64,
}

impl MigrationEstimate {
    fn local(node: NodeId) -> Self {
        MigrationEstimate { candidate: node, cumulative_latency: 0.0, transfer_time: 0.0, total: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementRequest {
    pub function: FunctionId,
    pub source: NodeId,
    pub destination: NodeId,
    pub state_size: u64,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementDecision {
    pub function: FunctionId,
    pub source: NodeId,
    pub state_node: NodeId,
    pub estimate: MigrationEstimate,
    pub fallback_used: bool,
}

impl PlacementDecision {
    fn fallback(req: &PlacementRequest) -> Self {
        PlacementDecision {
            function: req.function.clone(),
            source: req.source.clone(),
            state_node: req.source.clone(),
            estimate: MigrationEstimate::local(req.source.clone()),
            fallback_used: true,
        }
    }
}

/// Picks the node farthest along the source→destination path whose migration
/// time stays within `t_max`. The source itself is not a candidate; when no
/// other node qualifies (or the destination is unreachable) the decision
/// falls back to the source.
pub fn compute_placement(graph: &PrunedGraph, req: &PlacementRequest) -> Result<PlacementDecision, PropagationError> {
    let path = match graph.shortest_path(&req.source, &req.destination)? {
        Some(path) => path,
        None => return Ok(PlacementDecision::fallback(req)),
    };
    if path.hop_count() == 0 {
        return Ok(PlacementDecision {
            function: req.function.clone(),
            source: req.source.clone(),
            state_node: req.source.clone(),
            estimate: MigrationEstimate::local(req.source.clone()),
            fallback_used: false,
        });
    }
    let size = req.state_size as f64;
    for i in (1..path.nodes().len()).rev() {
        let l_c = path.cumulative_latency()[i];
        let b = path.bottleneck_bandwidth()[i];
        let total = migration_time(l_c, size, b)?;
        if total <= req.t_max {
            let candidate = path.nodes()[i].clone();
            return Ok(PlacementDecision {
                function: req.function.clone(),
                source: req.source.clone(),
                state_node: candidate.clone(),
                estimate: MigrationEstimate {
                    candidate,
                    cumulative_latency: l_c,
                    transfer_time: transfer_time(size, b),
                    total,
                },
                fallback_used: false,
            });
        }
    }
    Ok(PlacementDecision::fallback(req))
}

/// Result of placing a state.
#[derive(Debug, Clone)]
pub struct OffloadOutcome {
    pub node: NodeId,
    /// True when the state ended on the executor instead of the decided node.
    pub fell_back: bool,
    pub write: WriteOutcome,
}

/// Places `state` according to `decision`. The transfer charged is the
/// decision's migration estimate along its route; a local placement on the
/// executor costs only the store's op overhead.
pub fn offload(
    store: &mut StateStore,
    graph_at_t: &PrunedGraph,
    executor: &NodeId,
    decision: &PlacementDecision,
    state: StateObject,
    kind: OpKind,
) -> Result<OffloadOutcome, StoreError> {
    if !graph_at_t.contains(executor) {
        return Err(PropagationError::ExecutorUnavailable(executor.clone()).into());
    }
    let target = &decision.state_node;
    if target != executor && graph_at_t.contains(target) {
        let write = store.put_routed(state, target, decision.estimate.total, true, kind)?;
        return Ok(OffloadOutcome { node: target.clone(), fell_back: false, write });
    }
    let fell_back = target != executor;
    let write = store.put_routed(state, executor, 0.0, false, kind)?;
    Ok(OffloadOutcome { node: executor.clone(), fell_back, write })
}
