//! Discrete-epoch execution of a workflow over a dynamic topology under one
//! of three state policies.
//!
//! A run walks the workflow in topological order. Each stage (a function, or
//! a fusion group under Databelt) advances the epoch, re-prunes the topology,
//! places its functions near their input state, reads the inputs, computes,
//! and writes its output where the policy decides.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::Assignment;
use crate::fusion::{run_group_with, Fetch, FusionError, FusionGroup, INPUT_FUNCTION};
use crate::propagation::{compute_placement, offload, PlacementRequest, PropagationError};
use crate::scenario::Scenario;
use crate::statestore::{OpCost, OpKind, StateKey, StateObject, StateStore, StorageOpLog, StoreError};
use crate::topology::{Epoch, NodeId, PrunedGraph, Topology, TopologyError};
use crate::workflow::{FunctionId, WorkflowDag, WorkflowError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Databelt,
    Random,
    Stateless,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Databelt, Policy::Random, Policy::Stateless];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Databelt => "databelt",
            Policy::Random => "random",
            Policy::Stateless => "stateless",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "databelt" => Ok(Policy::Databelt),
            "random" => Ok(Policy::Random),
            "stateless" => Ok(Policy::Stateless),
            other => Err(format!("unknown policy `{other}` (expected databelt, random or stateless)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("placement infeasible for `{function}` at epoch {epoch}")]
    PlacementInfeasible { function: FunctionId, epoch: Epoch },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Latency between a producer's write and a consumer's read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeHandoff {
    pub from: FunctionId,
    pub to: FunctionId,
    pub slo: f64,
    /// Write network cost plus read network cost, in seconds.
    pub latency: f64,
    /// The producer's state stayed on its executor because no candidate
    /// satisfied the budget (or the chosen node disappeared).
    pub fallback: bool,
    /// Both ends ran in the same fusion group.
    pub fused: bool,
}

impl EdgeHandoff {
    pub fn violated(&self) -> bool {
        self.latency > self.slo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub functions: Vec<FunctionId>,
    pub node: NodeId,
    pub epoch: Epoch,
    pub state_node: NodeId,
    pub read: f64,
    pub compute: f64,
    pub write: f64,
}

impl Stage {
    pub fn duration(&self) -> f64 {
        self.read + self.compute + self.write
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub policy: Policy,
    pub seed: u64,
    pub total_latency: f64,
    pub read_latency: f64,
    pub write_latency: f64,
    pub compute_time: f64,
    pub handoffs: Vec<EdgeHandoff>,
    pub slo_violations: usize,
    pub slo_violation_fraction: f64,
    pub reads: usize,
    pub mean_hops: f64,
    pub local_availability: f64,
    pub storage_ops: usize,
    pub bytes_moved: u64,
    pub throughput: f64,
    pub stages: Vec<Stage>,
    pub assignment: Assignment,
    pub output_key: String,
    pub op_log: StorageOpLog,
}

impl RunResult {
    pub fn metrics(&self) -> Metrics {
        Metrics {
            total_s: self.total_latency,
            read_s: self.read_latency,
            write_s: self.write_latency,
            rps: self.throughput,
            slo_violations: self.slo_violations as f64,
            slo_violation_pct: 100.0 * self.slo_violation_fraction,
            mean_hops: self.mean_hops,
            local_availability: self.local_availability,
            storage_ops: self.storage_ops as f64,
            bytes_moved: self.bytes_moved as f64,
        }
    }
}

/// Per-run numbers in export units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total_s: f64,
    pub read_s: f64,
    pub write_s: f64,
    pub rps: f64,
    pub slo_violations: f64,
    pub slo_violation_pct: f64,
    pub mean_hops: f64,
    pub local_availability: f64,
    pub storage_ops: f64,
    pub bytes_moved: f64,
}

impl Metrics {
    fn fields(&self) -> [f64; 10] {
        [
            self.total_s,
            self.read_s,
            self.write_s,
            self.rps,
            self.slo_violations,
            self.slo_violation_pct,
            self.mean_hops,
            self.local_availability,
            self.storage_ops,
            self.bytes_moved,
        ]
    }

    fn from_fields(v: [f64; 10]) -> Self {
        Metrics {
            total_s: v[0],
            read_s: v[1],
            write_s: v[2],
            rps: v[3],
            slo_violations: v[4],
            slo_violation_pct: v[5],
            mean_hops: v[6],
            local_availability: v[7],
            storage_ops: v[8],
            bytes_moved: v[9],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Metrics,
    /// Sample standard deviation; zero for a single run.
    pub stddev: Metrics,
}

impl Summary {
    pub fn of(metrics: &[Metrics]) -> Self {
        let n = metrics.len();
        if n == 0 {
            return Summary { mean: Metrics::default(), stddev: Metrics::default() };
        }
        let mut mean = [0.0; 10];
        for m in metrics {
            for (acc, v) in mean.iter_mut().zip(m.fields()) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= n as f64);
        let mut var = [0.0; 10];
        if n > 1 {
            for m in metrics {
                for ((acc, v), mu) in var.iter_mut().zip(m.fields()).zip(mean) {
                    *acc += (v - mu) * (v - mu);
                }
            }
            var.iter_mut().for_each(|v| *v = (*v / (n - 1) as f64).sqrt());
        }
        Summary { mean: Metrics::from_fields(mean), stddev: Metrics::from_fields(var) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub policy: Policy,
    pub base_seed: u64,
    pub runs: Vec<RunResult>,
    pub summary: Summary,
}

#[derive(Debug, Clone, Copy, Default)]
struct Load {
    demand: f64,
    power: f64,
    heat: f64,
}

/// Whether `f` still fits on `node` given everything already assigned.
fn fits(
    topology: &Topology,
    workflow: &WorkflowDag,
    assignment: &Assignment,
    node: &NodeId,
    f: &FunctionId,
    t: Epoch,
) -> bool {
    let (Ok(n), Ok(spec)) = (topology.node(node), workflow.function(f)) else {
        return false;
    };
    let mut load = Load::default();
    for (g, host) in &assignment.function_to_node {
        if host == node {
            if let Ok(s) = workflow.function(g) {
                load.demand += s.demand;
                load.power += s.power;
                load.heat += s.heat;
            }
        }
    }
    load.demand + spec.demand <= n.capacity
        && load.power + spec.power <= n.power_available
        && n.temp_orbital_at(t) + load.heat + spec.heat <= n.temp_max
}

/// Picks the feasible node closest (by path latency) to the node serving the
/// function's input state; ties go to the smaller node id. With `pin` set
/// the function goes to that node unconditionally.
#[allow(clippy::too_many_arguments)]
pub fn place_function(
    f: &FunctionId,
    t: Epoch,
    graph: &PrunedGraph,
    input_state_node: &NodeId,
    workflow: &WorkflowDag,
    topology: &Topology,
    assignment: &Assignment,
    pin: Option<&NodeId>,
) -> Result<NodeId, SimError> {
    let infeasible = || SimError::PlacementInfeasible { function: f.clone(), epoch: t };
    if let Some(p) = pin {
        return if graph.contains(p) { Ok(p.clone()) } else { Err(infeasible()) };
    }
    let latencies = graph.latencies_from(input_state_node)?;
    let mut best: Option<(f64, &NodeId)> = None;
    for (id, latency) in graph.nodes().iter().zip(latencies) {
        let Some(latency) = latency else { continue };
        if !fits(topology, workflow, assignment, id, f, t) {
            continue;
        }
        if best.is_none_or(|(b, _)| latency < b) {
            best = Some((latency, id));
        }
    }
    best.map(|(_, id)| id.clone()).ok_or_else(infeasible)
}

struct Produced {
    key: StateKey,
    write_network: f64,
    fallback: bool,
}

fn dedup(keys: Vec<StateKey>) -> Vec<StateKey> {
    let mut out: Vec<StateKey> = Vec::new();
    for k in keys {
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

/// Executes one run of the scenario's workflow.
pub fn run_workflow(scenario: &Scenario, policy: Policy, seed: u64) -> Result<RunResult, SimError> {
    let topo = scenario.topology_for_run(seed);
    let wf = &scenario.workflow;
    let order = wf.topo_order()?;
    let terminal = wf.terminal()?;
    let mut store = StateStore::new(&topo, scenario.global_node.clone(), scenario.store)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);

    let input_node = match policy {
        Policy::Stateless => scenario.global_node.clone(),
        _ => scenario.ingress.clone(),
    };
    let input = StateKey::new(wf.id.clone(), store.address_of(&input_node)?, INPUT_FUNCTION)?;
    let input_key = store.seed(StateObject::synthetic(input, scenario.input_size), &input_node)?;

    let max_depth = if policy == Policy::Databelt { scenario.fusion_max_depth } else { 1 };
    let mut produced: BTreeMap<FunctionId, Produced> = BTreeMap::new();
    let mut assignment = Assignment::new(scenario.start_epoch);
    let mut handoffs = Vec::new();
    let mut stages = Vec::new();
    let (mut read_total, mut write_total, mut compute_total) = (0.0, 0.0, 0.0);
    let (mut reads, mut hop_sum, mut local_reads) = (0usize, 0usize, 0usize);
    let mut output_key = input_key.clone();

    let mut idx = 0;
    let mut stage_no: u64 = 0;
    while idx < order.len() {
        let t = scenario.start_epoch + stage_no * scenario.epochs_per_stage;
        let graph = topo.prune(t);
        let first = &order[idx];

        let external_inputs = |members: &[FunctionId]| -> Vec<StateKey> {
            let mut keys = Vec::new();
            for m in members {
                let preds = wf.predecessors(m);
                if preds.is_empty() {
                    keys.push(input_key.clone());
                }
                for p in preds {
                    if !members.contains(p) {
                        keys.push(produced[p].key.clone());
                    }
                }
            }
            dedup(keys)
        };

        let first_inputs = external_inputs(std::slice::from_ref(first));
        let anchor = store.serving_node(first_inputs.last().expect("every function has an input"), &graph)?;
        let pin_node = |f: &FunctionId| (scenario.pin_terminal && *f == terminal).then_some(&scenario.destination);
        let host = place_function(first, t, &graph, &anchor, wf, &topo, &assignment, pin_node(first))?;
        assignment.function_to_node.insert(first.clone(), host.clone());

        let mut members = vec![first.clone()];
        while members.len() < max_depth && idx + members.len() < order.len() {
            let next = &order[idx + members.len()];
            let last = members.last().unwrap();
            let fusible = wf.function(last)?.fusible && wf.function(next)?.fusible;
            let pinned_ok = pin_node(next).is_none_or(|p| *p == host);
            if wf.edge(last, next).is_none() || !fusible || !pinned_ok || !fits(&topo, wf, &assignment, &host, next, t)
            {
                break;
            }
            assignment.function_to_node.insert(next.clone(), host.clone());
            members.push(next.clone());
        }

        let keys = external_inputs(&members);
        let group = FusionGroup::new(members.clone(), host.clone());
        let fetch = if members.len() > 1 { Fetch::Bundle } else { Fetch::PerKey };
        let run = run_group_with(&group, &keys, &mut store, &graph, wf, fetch)?;
        read_total += run.read.total();
        compute_total += run.compute;
        for (_, hops) in &run.served_by {
            reads += 1;
            hop_sum += hops;
            if *hops == 0 {
                local_reads += 1;
            }
        }
        for m in &members {
            for p in wf.predecessors(m) {
                let slo = wf.edge(p, m).expect("edge exists").slo;
                if members.contains(p) {
                    handoffs.push(EdgeHandoff {
                        from: p.clone(),
                        to: m.clone(),
                        slo,
                        latency: 0.0,
                        fallback: false,
                        fused: true,
                    });
                    continue;
                }
                let prod = &produced[p];
                let i = keys.iter().position(|k| *k == prod.key).expect("predecessor key was read");
                handoffs.push(EdgeHandoff {
                    from: p.clone(),
                    to: m.clone(),
                    slo,
                    latency: prod.write_network + run.input_network[i],
                    fallback: prod.fallback,
                    fused: false,
                });
            }
        }

        let (state, kind) = if members.len() > 1 {
            (StateStore::merge_states(&run.outputs)?, OpKind::MergedWrite)
        } else {
            (run.outputs[0].clone(), OpKind::Write)
        };
        let outgoing: Vec<f64> = members
            .iter()
            .flat_map(|m| wf.outgoing(m).filter(|e| !members.contains(&e.to)).map(|e| e.slo).collect::<Vec<_>>())
            .collect();
        let (write_cost, state_node, fallback) = if outgoing.is_empty() {
            let w = store.put_routed(state, &host, 0.0, false, kind)?;
            (w.cost, w.node, false)
        } else {
            write_state(
                scenario,
                policy,
                &topo,
                &graph,
                &mut store,
                &host,
                state,
                kind,
                &outgoing,
                t,
                &mut rng,
                members.last().unwrap(),
            )?
        };
        write_total += write_cost.total();
        let key = store.log().ops().last().map(|op| op.keys[0].clone()).expect("write logged");
        let key = StateKey::parse(&key)?;
        for m in &members {
            produced.insert(m.clone(), Produced { key: key.clone(), write_network: write_cost.network, fallback });
        }
        output_key = key;
        stages.push(Stage {
            functions: members.clone(),
            node: host,
            epoch: t,
            state_node,
            read: run.read.total(),
            compute: run.compute,
            write: write_cost.total(),
        });
        idx += members.len();
        stage_no += 1;
    }

    let slo_violations = handoffs.iter().filter(|h| h.violated()).count();
    let total = read_total + compute_total + write_total;
    let log = store.log().clone();
    Ok(RunResult {
        policy,
        seed,
        total_latency: total,
        read_latency: read_total,
        write_latency: write_total,
        compute_time: compute_total,
        slo_violation_fraction: if handoffs.is_empty() { 0.0 } else { slo_violations as f64 / handoffs.len() as f64 },
        slo_violations,
        handoffs,
        reads,
        mean_hops: if reads == 0 { 0.0 } else { hop_sum as f64 / reads as f64 },
        local_availability: if reads == 0 { 0.0 } else { local_reads as f64 / reads as f64 },
        storage_ops: log.len(),
        bytes_moved: log.bytes_moved(),
        throughput: if total > 0.0 { 1.0 / total } else { f64::INFINITY },
        stages,
        assignment,
        output_key: output_key.encode(),
        op_log: log,
    })
}

/// Stores a stage's output according to the policy. Returns the write cost,
/// the node holding the state and whether Databelt fell back to the executor.
#[allow(clippy::too_many_arguments)]
fn write_state(
    scenario: &Scenario,
    policy: Policy,
    topo: &Topology,
    graph: &PrunedGraph,
    store: &mut StateStore,
    host: &NodeId,
    state: StateObject,
    kind: OpKind,
    outgoing_slos: &[f64],
    t: Epoch,
    rng: &mut ChaCha8Rng,
    producer: &FunctionId,
) -> Result<(OpCost, NodeId, bool), SimError> {
    match policy {
        Policy::Databelt => {
            let t_max = outgoing_slos.iter().copied().fold(f64::INFINITY, f64::min);
            // only consider nodes that stay up until the consumer runs
            let horizon = topo.prune_lookahead(t, scenario.epochs_per_stage, Some(host));
            if !horizon.contains(&scenario.destination) {
                log::debug!(
                    "{producer}: destination down before t={}, keeping state on {host}",
                    t + scenario.epochs_per_stage
                );
                let w = store.put_as(state, host, host, graph, kind)?;
                return Ok((w.cost, host.clone(), true));
            }
            let req = PlacementRequest {
                function: producer.clone(),
                source: host.clone(),
                destination: scenario.destination.clone(),
                state_size: state.size,
                t_max,
            };
            let decision = compute_placement(&horizon, &req)?;
            let out = offload(store, graph, host, &decision, state, kind)?;
            log::debug!(
                "{producer}: state on {} (t_max {:.3} ms, fallback {})",
                out.node,
                t_max * 1e3,
                decision.fallback_used || out.fell_back
            );
            Ok((out.write.cost, out.node, decision.fallback_used || out.fell_back))
        }
        Policy::Random => {
            let ids: Vec<&NodeId> = topo.node_ids().collect();
            let mut target = host.clone();
            for _ in 0..ids.len() {
                let pick = ids[rng.gen_range(0..ids.len())];
                if graph.contains(pick) && graph.latency(host, pick)?.is_some() {
                    target = pick.clone();
                    break;
                }
            }
            let w = store.put_as(state, &target, host, graph, kind)?;
            Ok((w.cost, target, false))
        }
        Policy::Stateless => {
            let global = scenario.global_node.clone();
            let w = store.put_as(state, &global, host, graph, kind)?;
            Ok((w.cost, global, false))
        }
    }
}

/// Runs `repetitions` seeded runs (seeds `base_seed + i`) on up to `jobs`
/// threads. Results are ordered by run index regardless of `jobs`.
pub fn run_batch(
    scenario: &Scenario,
    policy: Policy,
    repetitions: usize,
    base_seed: u64,
    jobs: usize,
) -> Result<BatchResult, SimError> {
    let seeds: Vec<u64> = (0..repetitions as u64).map(|i| base_seed.wrapping_add(i)).collect();
    let runs: Vec<RunResult> = if jobs <= 1 {
        seeds.iter().map(|&s| run_workflow(scenario, policy, s)).collect::<Result<_, _>>()?
    } else {
        let pool =
            rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| SimError::Pool(e.to_string()))?;
        pool.install(|| seeds.par_iter().map(|&s| run_workflow(scenario, policy, s)).collect::<Result<_, _>>())?
    };
    let metrics: Vec<Metrics> = runs.iter().map(RunResult::metrics).collect();
    Ok(BatchResult { policy, base_seed, summary: Summary::of(&metrics), runs })
}

/// Outcome of several pipelines sharing the topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcurrentResult {
    pub pipelines: usize,
    /// Completion time of each pipeline.
    pub latencies: Vec<f64>,
    pub mean_latency: f64,
    pub makespan: f64,
}

/// Runs `pipelines` independent seeded runs and replays their stages through
/// per-node queues that execute one stage at a time.
pub fn run_concurrent(
    scenario: &Scenario,
    policy: Policy,
    pipelines: usize,
    base_seed: u64,
) -> Result<ConcurrentResult, SimError> {
    let runs: Vec<RunResult> = (0..pipelines as u64)
        .map(|i| run_workflow(scenario, policy, base_seed.wrapping_add(i)))
        .collect::<Result<_, _>>()?;
    let mut node_free: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut ready = vec![0.0f64; pipelines];
    let mut next = vec![0usize; pipelines];
    loop {
        // earliest-ready pipeline first, ties by index
        let pick = (0..pipelines)
            .filter(|&p| next[p] < runs[p].stages.len())
            .min_by(|&a, &b| ready[a].total_cmp(&ready[b]).then(a.cmp(&b)));
        let Some(p) = pick else { break };
        let stage = &runs[p].stages[next[p]];
        let free = node_free.entry(stage.node.clone()).or_insert(0.0);
        let start = ready[p].max(*free);
        let end = start + stage.duration();
        *free = end;
        ready[p] = end;
        next[p] += 1;
    }
    let makespan = ready.iter().copied().fold(0.0, f64::max);
    let mean_latency = if pipelines == 0 { 0.0 } else { ready.iter().sum::<f64>() / pipelines as f64 };
    Ok(ConcurrentResult { pipelines, latencies: ready, mean_latency, makespan })
}
