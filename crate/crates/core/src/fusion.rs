//! Function fusion: co-located workflow functions share one sandbox, fetch
//! their inputs with a single bundled read and write back one merged state.
//!
//! Inside a group the [`Middleware`] hands states between members in memory
//! and only releases to each member the keys it was granted.

use std::collections::{BTreeMap, BTreeSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constraints::Assignment;
use crate::statestore::{BundleOutcome, OpCost, StateIdent, StateKey, StateObject, StateStore, StoreError};
use crate::topology::{NodeId, PrunedGraph};
use crate::workflow::{FunctionId, FunctionSpec, WorkflowDag, WorkflowError};

/// Function id used in keys of the workflow's initial input state.
pub const INPUT_FUNCTION: &str = "input";

/// Separator between member ids in a merged state's function id.
pub const MERGE_SEPARATOR: char = '+';

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("max depth must be at least 1")]
    ZeroDepth,
    #[error("function `{0}` is not assigned")]
    Unassigned(FunctionId),
    #[error("empty fusion group")]
    EmptyGroup,
    #[error("missing input state from `{producer}` for `{consumer}`")]
    MissingInput { consumer: FunctionId, producer: String },
    #[error("`{function}` may not access `{key}`")]
    AccessDenied { function: FunctionId, key: String },
    #[error("merged state `{0}` does not split into its member outputs")]
    BadMerge(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionGroup {
    /// Members in execution order.
    pub functions: Vec<FunctionId>,
    pub host: NodeId,
}

impl FusionGroup {
    pub fn new(functions: Vec<FunctionId>, host: NodeId) -> Self {
        FusionGroup { functions, host }
    }

    pub fn depth(&self) -> usize {
        self.functions.len()
    }

    pub fn contains(&self, f: &FunctionId) -> bool {
        self.functions.contains(f)
    }

    /// Function id of the group's merged output state.
    pub fn merged_id(&self) -> String {
        merged_function_id(self.functions.iter().map(FunctionId::as_str))
    }
}

pub fn merged_function_id<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.sort_unstable();
    ids.join(&MERGE_SEPARATOR.to_string())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionPlan {
    pub groups: Vec<FusionGroup>,
}

impl FusionPlan {
    pub fn group_of(&self, f: &FunctionId) -> Option<&FusionGroup> {
        self.groups.iter().find(|g| g.contains(f))
    }
}

/// Greedily merges functions that are consecutive in topological order, share
/// a node and are both fusible, into groups of at most `max_depth`.
pub fn plan_fusion(
    workflow: &WorkflowDag,
    assignment: &Assignment,
    max_depth: usize,
) -> Result<FusionPlan, FusionError> {
    if max_depth == 0 {
        return Err(FusionError::ZeroDepth);
    }
    let mut groups: Vec<FusionGroup> = Vec::new();
    let mut last_fusible = false;
    for f in workflow.topo_order()? {
        let node = assignment.node_of(&f).ok_or_else(|| FusionError::Unassigned(f.clone()))?;
        let fusible = workflow.function(&f)?.fusible;
        match groups.last_mut() {
            Some(g) if g.host == *node && fusible && last_fusible && g.depth() < max_depth => g.functions.push(f),
            _ => groups.push(FusionGroup::new(vec![f], node.clone())),
        }
        last_fusible = fusible;
    }
    Ok(FusionPlan { groups })
}

/// Deterministic synthetic output of a function: a ChaCha8 stream keyed by a
/// SHA-256 digest of the function id and its inputs.
pub fn synthesize_output(function: &FunctionSpec, inputs: &[StateObject], key: StateKey) -> StateObject {
    let size = function.output_state_size;
    if inputs.is_empty() || inputs.iter().any(|s| s.payload.is_none()) {
        return StateObject::synthetic(key, size);
    }
    let mut hasher = Sha256::new();
    hasher.update(function.id.as_str().as_bytes());
    for input in inputs {
        hasher.update(input.size.to_le_bytes());
        hasher.update(input.payload.as_deref().unwrap_or_default());
    }
    let seed: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(seed);
    let mut bytes = vec![0u8; size as usize];
    rng.fill_bytes(&mut bytes);
    StateObject::with_payload(key, bytes)
}

/// Cuts one member's output out of a merged state using the workflow's
/// declared output sizes.
pub fn extract_member(
    merged: &StateObject,
    member: &FunctionId,
    workflow: &WorkflowDag,
) -> Result<StateObject, FusionError> {
    let bad = || FusionError::BadMerge(merged.key.encode());
    let mut ids: Vec<&str> = merged.key.function_id().split(MERGE_SEPARATOR).collect();
    if ids.len() == 1 {
        return if ids[0] == member.as_str() { Ok(merged.clone()) } else { Err(bad()) };
    }
    ids.sort_unstable();
    let mut offset = 0u64;
    for id in &ids {
        let size = workflow.function(&FunctionId::from(*id)).map_err(|_| bad())?.output_state_size;
        if *id == member.as_str() {
            let key = StateKey::new(merged.key.workflow_id(), merged.key.storage_address(), member.as_str())?;
            let payload = match &merged.payload {
                Some(p) => {
                    let end = offset + size;
                    if end as usize > p.len() {
                        return Err(bad());
                    }
                    Some(p[offset as usize..end as usize].into())
                }
                None => None,
            };
            return Ok(StateObject { key, size, payload });
        }
        offset += size;
    }
    Err(bad())
}

/// Which member-or-input produced a state key.
fn producers(key: &StateKey) -> Vec<&str> {
    key.function_id().split(MERGE_SEPARATOR).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Access {
    pub function: FunctionId,
    pub key: String,
    pub granted: bool,
}

/// In-sandbox state exchange with per-function key grants.
#[derive(Debug, Clone, Default)]
pub struct Middleware {
    states: BTreeMap<StateIdent, StateObject>,
    grants: BTreeMap<FunctionId, BTreeSet<StateIdent>>,
    log: Vec<Access>,
}

impl Middleware {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stage(&mut self, state: StateObject) {
        self.states.insert(state.key.ident(), state);
    }

    pub fn grant(&mut self, function: &FunctionId, key: &StateKey) {
        self.grants.entry(function.clone()).or_default().insert(key.ident());
    }

    pub fn read(&mut self, function: &FunctionId, key: &StateKey) -> Result<StateObject, FusionError> {
        let ident = key.ident();
        let granted = self.grants.get(function).is_some_and(|g| g.contains(&ident));
        self.log.push(Access { function: function.clone(), key: key.encode(), granted });
        if !granted {
            return Err(FusionError::AccessDenied { function: function.clone(), key: key.encode() });
        }
        self.states.get(&ident).cloned().ok_or_else(|| FusionError::MissingInput {
            consumer: function.clone(),
            producer: key.function_id().to_owned(),
        })
    }

    pub fn access_log(&self) -> &[Access] {
        &self.log
    }
}

/// Everything a group produced before write-back.
#[derive(Debug, Clone)]
pub struct GroupRun {
    /// Member outputs in execution order.
    pub outputs: Vec<StateObject>,
    pub read: OpCost,
    pub read_ops: usize,
    /// Serving node and hop count for each input key.
    pub served_by: Vec<(NodeId, usize)>,
    /// Network cost of the read group each input key was served in.
    pub input_network: Vec<f64>,
    pub compute: f64,
    pub access_log: Vec<Access>,
}

#[derive(Debug, Clone)]
pub struct GroupMetrics {
    pub read: OpCost,
    pub write: OpCost,
    pub compute: f64,
    pub storage_ops: usize,
}

impl GroupMetrics {
    pub fn storage_latency(&self) -> f64 {
        self.read.total() + self.write.total()
    }
}

#[derive(Debug, Clone)]
pub struct GroupExecution {
    pub output_key: StateKey,
    pub outputs: Vec<StateObject>,
    pub metrics: GroupMetrics,
    pub access_log: Vec<Access>,
}

/// Keys that a member consumes: internal ones come from earlier members,
/// external ones from `input_keys`. The entry function consumes input keys
/// not produced by any workflow function.
fn member_inputs(
    member: &FunctionId,
    group: &FusionGroup,
    input_keys: &[StateKey],
    workflow: &WorkflowDag,
    outputs: &BTreeMap<FunctionId, StateKey>,
) -> Result<Vec<(StateKey, Option<FunctionId>)>, FusionError> {
    let preds = workflow.predecessors(member);
    if preds.is_empty() {
        let ids = workflow.function_ids();
        let found: Vec<_> = input_keys
            .iter()
            .filter(|k| producers(k).iter().all(|p| !ids.contains(&FunctionId::from(*p))))
            .map(|k| (k.clone(), None))
            .collect();
        if found.is_empty() {
            return Err(FusionError::MissingInput { consumer: member.clone(), producer: INPUT_FUNCTION.into() });
        }
        return Ok(found);
    }
    let mut out = Vec::new();
    for p in preds {
        if group.contains(p) {
            let key = outputs
                .get(p)
                .ok_or_else(|| FusionError::MissingInput { consumer: member.clone(), producer: p.to_string() })?;
            out.push((key.clone(), None));
        } else {
            let key = input_keys
                .iter()
                .find(|k| producers(k).contains(&p.as_str()))
                .ok_or_else(|| FusionError::MissingInput { consumer: member.clone(), producer: p.to_string() })?;
            out.push((key.clone(), Some(p.clone())));
        }
    }
    Ok(out)
}

/// How a group fetches its inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fetch {
    /// One bundled read per serving node.
    Bundle,
    /// One read per key.
    PerKey,
}

fn fetch(
    mode: Fetch,
    input_keys: &[StateKey],
    host: &NodeId,
    store: &mut StateStore,
    graph: &PrunedGraph,
) -> Result<BundleOutcome, FusionError> {
    if mode == Fetch::Bundle {
        return Ok(store.bundle_get(input_keys, host, graph)?);
    }
    let mut out = BundleOutcome {
        states: Vec::new(),
        served_by: Vec::new(),
        cost: OpCost::default(),
        group_network: Vec::new(),
        ops: 0,
    };
    for key in input_keys {
        let read = store.get(key, host, graph)?;
        out.cost += read.cost;
        out.ops += 1;
        out.group_network.push(read.cost.network);
        out.served_by.push((read.served_by, read.hops));
        out.states.push(read.state);
    }
    Ok(out)
}

/// Bundled read of `input_keys` at the host followed by in-memory execution
/// of every member. Nothing is written.
pub fn run_group(
    group: &FusionGroup,
    input_keys: &[StateKey],
    store: &mut StateStore,
    graph: &PrunedGraph,
    workflow: &WorkflowDag,
) -> Result<GroupRun, FusionError> {
    run_group_with(group, input_keys, store, graph, workflow, Fetch::Bundle)
}

pub fn run_group_with(
    group: &FusionGroup,
    input_keys: &[StateKey],
    store: &mut StateStore,
    graph: &PrunedGraph,
    workflow: &WorkflowDag,
    mode: Fetch,
) -> Result<GroupRun, FusionError> {
    if group.functions.is_empty() {
        return Err(FusionError::EmptyGroup);
    }
    let bundle = fetch(mode, input_keys, &group.host, store, graph)?;
    let mut mw = Middleware::new();
    for state in &bundle.states {
        mw.stage(state.clone());
    }
    let mut produced: BTreeMap<FunctionId, StateKey> = BTreeMap::new();
    let mut outputs = Vec::with_capacity(group.depth());
    let mut compute = 0.0;
    for member in &group.functions {
        let spec = workflow.function(member)?;
        let mut inputs = Vec::new();
        for (key, producer) in member_inputs(member, group, input_keys, workflow, &produced)? {
            mw.grant(member, &key);
            let state = mw.read(member, &key)?;
            inputs.push(match producer {
                Some(p) => extract_member(&state, &p, workflow)?,
                None => state,
            });
        }
        let key = StateKey::new(workflow.id.clone(), store.address_of(&group.host)?, member.as_str())?;
        let out = synthesize_output(spec, &inputs, key);
        compute += spec.compute_time;
        produced.insert(member.clone(), out.key.clone());
        mw.stage(out.clone());
        outputs.push(out);
    }
    Ok(GroupRun {
        outputs,
        read: bundle.cost,
        read_ops: bundle.ops,
        served_by: bundle.served_by,
        input_network: bundle.group_network,
        compute,
        access_log: mw.access_log().to_vec(),
    })
}

/// Runs a fusion group end to end: one bundled read, in-memory execution of
/// the members, one merged write on the host.
pub fn execute_group(
    group: &FusionGroup,
    input_keys: &[StateKey],
    store: &mut StateStore,
    graph: &PrunedGraph,
    workflow: &WorkflowDag,
) -> Result<GroupExecution, FusionError> {
    let run = run_group(group, input_keys, store, graph, workflow)?;
    let write = store.merged_put(&run.outputs, &group.host, &group.host, graph)?;
    Ok(GroupExecution {
        output_key: write.key,
        outputs: run.outputs,
        metrics: GroupMetrics {
            read: run.read,
            write: write.cost,
            compute: run.compute,
            storage_ops: run.read_ops + 1,
        },
        access_log: run.access_log,
    })
}

/// Runs `functions` one by one on `host` with a separate read per input and a
/// separate write per output.
pub fn execute_unfused(
    functions: &[FunctionId],
    host: &NodeId,
    input_keys: &[StateKey],
    store: &mut StateStore,
    graph: &PrunedGraph,
    workflow: &WorkflowDag,
) -> Result<(Vec<StateObject>, GroupMetrics), FusionError> {
    let mut metrics = GroupMetrics { read: OpCost::default(), write: OpCost::default(), compute: 0.0, storage_ops: 0 };
    let mut keys: Vec<StateKey> = input_keys.to_vec();
    let mut outputs = Vec::new();
    for f in functions {
        let single = FusionGroup::new(vec![f.clone()], host.clone());
        let inputs = member_inputs(f, &single, &keys, workflow, &BTreeMap::new())?;
        let spec = workflow.function(f)?;
        let mut states = Vec::new();
        for (key, producer) in inputs {
            let read = store.get(&key, host, graph)?;
            metrics.read += read.cost;
            metrics.storage_ops += 1;
            states.push(match producer {
                Some(p) => extract_member(&read.state, &p, workflow)?,
                None => read.state,
            });
        }
        let key = StateKey::new(workflow.id.clone(), store.address_of(host)?, f.as_str())?;
        let out = synthesize_output(spec, &states, key);
        metrics.compute += spec.compute_time;
        let write = store.put(out.clone(), host, host, graph)?;
        metrics.write += write.cost;
        metrics.storage_ops += 1;
        keys.push(write.key);
        outputs.push(out);
    }
    Ok((outputs, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statestore::StoreConfig;
    use crate::topology::{Link, Node, NodeKind, Topology};
    use std::collections::BTreeSet as Set;

    fn chain(n: usize) -> WorkflowDag {
        let fns = (1..=n).map(|i| FunctionSpec::new(format!("f{i}").as_str()).with_output_size(16)).collect();
        WorkflowDag::chain("wf", fns, 1.0)
    }

    fn assign(nodes: &[&str]) -> Assignment {
        nodes.iter().enumerate().fold(Assignment::new(0), |a, (i, n)| a.with(format!("f{}", i + 1).as_str(), *n))
    }

    fn names(plan: &FusionPlan) -> Vec<Vec<String>> {
        plan.groups.iter().map(|g| g.functions.iter().map(|f| f.to_string()).collect()).collect()
    }

    #[test]
    fn plans_full_group() {
        let p = plan_fusion(&chain(4), &assign(&["x"; 4]), 5).unwrap();
        assert_eq!(p.groups.len(), 1);
        assert_eq!(p.groups[0].depth(), 4);
    }

    #[test]
    fn plans_singletons_on_distinct_nodes() {
        let p = plan_fusion(&chain(4), &assign(&["a", "b", "c", "d"]), 5).unwrap();
        assert_eq!(p.groups.len(), 4);
        let p1 = plan_fusion(&chain(4), &assign(&["x"; 4]), 1).unwrap();
        assert_eq!(p1.groups.len(), 4);
    }

    #[test]
    fn plans_greedy_trace() {
        let p = plan_fusion(&chain(4), &assign(&["x", "x", "x", "y"]), 2).unwrap();
        assert_eq!(names(&p), vec![vec!["f1", "f2"], vec!["f3"], vec!["f4"]]);
    }

    #[test]
    fn non_fusible_breaks_group() {
        let mut w = chain(3);
        w.functions[1].fusible = false;
        let p = plan_fusion(&w, &assign(&["x"; 3]), 5).unwrap();
        assert_eq!(p.groups.len(), 3);
        assert!(plan_fusion(&w, &assign(&["x"; 3]), 0).is_err());
    }

    fn setup() -> (Topology, StateStore, StateKey) {
        let t = Topology::new(
            vec![Node::new("x", NodeKind::Satellite), Node::new("cloud", NodeKind::Cloud)],
            vec![Link::new("x", "cloud", 0.02, 1e6)],
            Set::new(),
        )
        .unwrap();
        let mut s = StateStore::new(&t, "cloud".into(), StoreConfig { op_overhead: 0.005, replicate_to_global: false })
            .unwrap();
        let key = StateKey::new("wf", "x", INPUT_FUNCTION).unwrap();
        let key = s.seed(StateObject::with_payload(key, b"raw sensor frame".to_vec()), &"x".into()).unwrap();
        (t, s, key)
    }

    #[test]
    fn fused_group_uses_two_ops() {
        let (t, mut s, input) = setup();
        let g = t.prune(0);
        let w = chain(5);
        let group = FusionGroup::new(w.topo_order().unwrap(), "x".into());
        let out = execute_group(&group, &[input], &mut s, &g, &w).unwrap();
        assert_eq!(out.metrics.storage_ops, 2);
        assert_eq!(s.log().len(), 2);
        assert!((out.metrics.storage_latency() - 0.010).abs() < 1e-12);
        assert_eq!(out.output_key.function_id(), "f1+f2+f3+f4+f5");
    }

    #[test]
    fn fused_output_matches_unfused() {
        let w = chain(4);
        let (t, mut s1, input) = setup();
        let g = t.prune(0);
        let group = FusionGroup::new(w.topo_order().unwrap(), "x".into());
        let fused = execute_group(&group, std::slice::from_ref(&input), &mut s1, &g, &w).unwrap();
        let fused_state = s1.get(&fused.output_key, &"x".into(), &g).unwrap().state;

        let (_, mut s2, input2) = setup();
        let (outs, m) = execute_unfused(&group.functions, &"x".into(), &[input2], &mut s2, &g, &w).unwrap();
        assert_eq!(m.storage_ops, 8);
        let merged = StateStore::merge_states(&outs).unwrap();
        assert!(merged.payload.is_some());
        assert_eq!(merged.payload, fused_state.payload);
    }

    #[test]
    fn middleware_enforces_grants() {
        let mut mw = Middleware::new();
        let k = StateKey::new("wf", "x", "f1").unwrap();
        mw.stage(StateObject::synthetic(k.clone(), 1));
        assert!(matches!(mw.read(&"f2".into(), &k), Err(FusionError::AccessDenied { .. })));
        mw.grant(&"f2".into(), &k);
        assert!(mw.read(&"f2".into(), &k).is_ok());
        assert_eq!(mw.access_log().len(), 2);
        assert!(!mw.access_log()[0].granted);
    }

    #[test]
    fn members_read_only_their_inputs() {
        let (t, mut s, input) = setup();
        let g = t.prune(0);
        let w = chain(3);
        let group = FusionGroup::new(w.topo_order().unwrap(), "x".into());
        let out = execute_group(&group, &[input], &mut s, &g, &w).unwrap();
        let reads: Vec<(String, String)> = out
            .access_log
            .iter()
            .map(|a| (a.function.to_string(), a.key.rsplit('|').next().unwrap().to_owned()))
            .collect();
        assert_eq!(reads, vec![("f1".into(), "input".into()), ("f2".into(), "f1".into()), ("f3".into(), "f2".into())]);
        assert!(out.access_log.iter().all(|a| a.granted));
    }

    #[test]
    fn extracts_member_from_merged() {
        let w = chain(2);
        let a = StateObject::with_payload(StateKey::new("wf", "x", "f1").unwrap(), vec![1; 16]);
        let b = StateObject::with_payload(StateKey::new("wf", "x", "f2").unwrap(), vec![2; 16]);
        let m = StateStore::merge_states(&[b.clone(), a.clone()]).unwrap();
        assert_eq!(extract_member(&m, &"f2".into(), &w).unwrap().payload, b.payload);
        assert_eq!(extract_member(&m, &"f1".into(), &w).unwrap().payload, a.payload);
        assert!(extract_member(&m, &"f3".into(), &w).is_err());
    }

    #[test]
    fn missing_input_is_reported() {
        let (t, mut s, _) = setup();
        let g = t.prune(0);
        let w = chain(2);
        let group = FusionGroup::new(vec!["f2".into()], "x".into());
        let err = execute_group(&group, &[], &mut s, &g, &w).unwrap_err();
        assert!(matches!(err, FusionError::MissingInput { .. }));
    }
}
