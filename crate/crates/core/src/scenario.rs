//! Scenario files: JSON documents describing a topology, a workflow and run
//! parameters. Units are spelled out in field names and converted to the
//! engine's seconds/bytes/bytes-per-second on load.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::PenaltyConfig;
use crate::statestore::StoreConfig;
use crate::topology::{AvailabilitySchedule, Epoch, Interval, Link, Node, NodeId, NodeKind, TempWindow, Topology};
use crate::units::{mb_to_bytes, mbps_to_bytes_per_sec, ms_to_s};
use crate::workflow::{FunctionSpec, WorkflowDag, WorkflowEdge};

/// The flood-detection scenario shipped with the crate.
pub const FLOOD_DETECTION: &str = include_str!("../scenarios/flood_detection.json");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),
}

/// A link latency: fixed, or a `[min, max]` range sampled once per run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LatencyMs {
    Fixed(f64),
    Range([f64; 2]),
}

impl LatencyMs {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            LatencyMs::Fixed(v) => (v, v),
            LatencyMs::Range([a, b]) => (a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TempWindowFile {
    pub start: Epoch,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<Epoch>,
    pub temp_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeFile {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<String>,
    /// Resource units; absent means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temp_orbital_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temp_max_c: Option<f64>,
    /// Half-open `[start, end)` epochs during which the node is up; `end`
    /// may be null. Absent means always up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub availability: Option<Vec<(Epoch, Option<Epoch>)>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub temp_windows: Vec<TempWindowFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkFile {
    pub src: String,
    pub dst: String,
    pub latency_ms: LatencyMs,
    pub bandwidth_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionFile {
    pub id: String,
    #[serde(default)]
    pub demand: f64,
    #[serde(default)]
    pub power_w: f64,
    #[serde(default)]
    pub heat_c: f64,
    #[serde(default)]
    pub compute_ms: f64,
    /// Output state size; absent means the scenario's input size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_size_mb: Option<f64>,
    #[serde(default = "yes")]
    pub fusible: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeFile {
    pub from: String,
    pub to: String,
    pub slo_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowFile {
    pub id: String,
    pub functions: Vec<FunctionFile>,
    pub edges: Vec<EdgeFile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Node hosting the global storage tier.
    pub global_node: String,
    /// Destination used when choosing where to propagate state; defaults to
    /// the global node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<String>,
    /// Node holding the workflow's input when a run starts.
    pub ingress: String,
    #[serde(default = "one_u64")]
    pub epochs_per_stage: Epoch,
    #[serde(default)]
    pub start_epoch: Epoch,
    pub input_size_mb: f64,
    #[serde(default = "one")]
    pub fusion_max_depth: usize,
    #[serde(default = "default_overhead")]
    pub op_overhead_ms: f64,
    #[serde(default = "yes")]
    pub replicate_to_global: bool,
    /// Run the terminal function on the destination node.
    #[serde(default = "yes")]
    pub pin_terminal: bool,
    #[serde(default = "default_kappa")]
    pub kappa_ms_per_hop: f64,
    #[serde(default)]
    pub enforce_locality_constraint: bool,
    #[serde(default)]
    pub required_types: Vec<NodeKind>,
    pub nodes: Vec<NodeFile>,
    pub links: Vec<LinkFile>,
    pub workflow: WorkflowFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputFile>,
}

fn one() -> usize {
    1
}

fn one_u64() -> Epoch {
    1
}

fn default_overhead() -> f64 {
    5.0
}

fn default_kappa() -> f64 {
    5.0
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// A validated scenario in engine units.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub repetitions: usize,
    /// Topology with every ranged latency at its midpoint.
    pub topology: Topology,
    /// `(min, max)` latency in seconds for each link, in file order.
    pub latency_ranges: Vec<(f64, f64)>,
    pub workflow: WorkflowDag,
    pub global_node: NodeId,
    pub destination: NodeId,
    pub ingress: NodeId,
    pub epochs_per_stage: Epoch,
    pub start_epoch: Epoch,
    pub input_size: u64,
    pub fusion_max_depth: usize,
    pub store: StoreConfig,
    pub penalty: PenaltyConfig,
    pub pin_terminal: bool,
    source: ScenarioFile,
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        let mut errors = Vec::new();
        let mut nodes = Vec::new();
        for n in &file.nodes {
            match node_from_file(n) {
                Ok(node) => nodes.push(node),
                Err(e) => errors.push(e),
            }
        }
        let mut links = Vec::new();
        let mut latency_ranges = Vec::new();
        for (i, l) in file.links.iter().enumerate() {
            let (lo, hi) = l.latency_ms.bounds();
            let ctx = format!("links[{i}] ({}-{})", l.src, l.dst);
            if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
                errors.push(format!("{ctx}: latency_ms must be positive with min <= max"));
                continue;
            }
            if !(l.bandwidth_mbps > 0.0) || !l.bandwidth_mbps.is_finite() {
                errors.push(format!("{ctx}: bandwidth_mbps must be positive"));
                continue;
            }
            latency_ranges.push((ms_to_s(lo), ms_to_s(hi)));
            links.push(Link::new(
                l.src.as_str(),
                l.dst.as_str(),
                ms_to_s((lo + hi) / 2.0),
                mbps_to_bytes_per_sec(l.bandwidth_mbps),
            ));
        }
        if !(file.input_size_mb >= 0.0) || !file.input_size_mb.is_finite() {
            errors.push("input_size_mb must be >= 0".into());
        }
        if !(file.op_overhead_ms >= 0.0) {
            errors.push("op_overhead_ms must be >= 0".into());
        }
        if !(file.kappa_ms_per_hop >= 0.0) {
            errors.push("kappa_ms_per_hop must be >= 0".into());
        }
        if file.epochs_per_stage == 0 {
            errors.push("epochs_per_stage must be >= 1".into());
        }
        if file.fusion_max_depth == 0 {
            errors.push("fusion_max_depth must be >= 1".into());
        }
        if file.repetitions == 0 {
            errors.push("repetitions must be >= 1".into());
        }
        let input_size = mb_to_bytes(file.input_size_mb.max(0.0));
        let workflow = workflow_from_file(&file.workflow, input_size, &mut errors);
        if !errors.is_empty() {
            return Err(ScenarioError::Schema(errors));
        }
        let required: BTreeSet<NodeKind> = file.required_types.iter().copied().collect();
        let topology = Topology::new(nodes, links, required).map_err(|e| ScenarioError::Schema(vec![e.to_string()]))?;
        if let Err(errs) = workflow.validate() {
            return Err(ScenarioError::Schema(errs.iter().map(|e| format!("workflow: {e}")).collect()));
        }
        let destination = file.destination.clone().unwrap_or_else(|| file.global_node.clone());
        for (what, id) in
            [("global_node", &file.global_node), ("destination", &destination), ("ingress", &file.ingress)]
        {
            if !topology.contains(&NodeId::from(id.as_str())) {
                errors.push(format!("{what}: unknown node `{id}`"));
            }
        }
        if !errors.is_empty() {
            return Err(ScenarioError::Schema(errors));
        }
        Ok(Scenario {
            name: file.name.clone(),
            seed: file.seed,
            repetitions: file.repetitions,
            topology,
            latency_ranges,
            workflow,
            global_node: file.global_node.as_str().into(),
            destination: destination.as_str().into(),
            ingress: file.ingress.as_str().into(),
            epochs_per_stage: file.epochs_per_stage,
            start_epoch: file.start_epoch,
            input_size,
            fusion_max_depth: file.fusion_max_depth,
            store: StoreConfig {
                op_overhead: ms_to_s(file.op_overhead_ms),
                replicate_to_global: file.replicate_to_global,
            },
            penalty: PenaltyConfig {
                kappa: ms_to_s(file.kappa_ms_per_hop),
                enforce_locality_constraint: file.enforce_locality_constraint,
            },
            pin_terminal: file.pin_terminal,
            source: file,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Self::from_file(ScenarioFile::from_json(text)?)
    }

    pub fn flood_detection() -> Self {
        Self::from_json(FLOOD_DETECTION).expect("bundled scenario is valid")
    }

    pub fn file(&self) -> &ScenarioFile {
        &self.source
    }

    /// Canonical JSON form; loading it yields an equal scenario.
    pub fn to_json(&self) -> String {
        self.source.to_json()
    }

    /// Rebuilds the scenario after editing its file form.
    pub fn modified(&self, edit: impl FnOnce(&mut ScenarioFile)) -> Result<Self, ScenarioError> {
        let mut file = self.source.clone();
        edit(&mut file);
        Self::from_file(file)
    }

    pub fn with_input_size_mb(&self, mb: f64) -> Result<Self, ScenarioError> {
        self.modified(|f| f.input_size_mb = mb)
    }

    pub fn with_fusion_depth(&self, depth: usize) -> Result<Self, ScenarioError> {
        self.modified(|f| f.fusion_max_depth = depth)
    }

    /// Topology for one run: each ranged latency drawn uniformly from its
    /// range, in link order, by a generator seeded with `seed`.
    pub fn topology_for_run(&self, seed: u64) -> Topology {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let links = self
            .topology
            .links()
            .iter()
            .zip(&self.latency_ranges)
            .map(|(l, &(lo, hi))| {
                let latency = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                Link::new(l.src.clone(), l.dst.clone(), latency, l.bandwidth)
            })
            .collect();
        Topology::new(self.topology.nodes().cloned().collect(), links, self.topology.required_types().clone())
            .expect("sampled topology keeps the validated structure")
    }
}

impl PartialEq for Scenario {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

fn node_from_file(n: &NodeFile) -> Result<Node, String> {
    let ctx = format!("node `{}`", n.id);
    let id = NodeId::new(n.id.as_str()).map_err(|e| format!("{ctx}: {e}"))?;
    let mut node = Node::new(id, n.kind);
    if let Some(a) = &n.address {
        node = node.with_address(a.as_str());
    }
    if let Some(c) = n.capacity {
        node = node.with_capacity(c);
    }
    if let Some(p) = n.power_w {
        node = node.with_power(p);
    }
    node.temp_orbital = n.temp_orbital_c.unwrap_or(0.0);
    if let Some(t) = n.temp_max_c {
        node.temp_max = t;
    }
    if let Some(intervals) = &n.availability {
        let schedule = AvailabilitySchedule::new(intervals.iter().map(|&(s, e)| Interval::new(s, e)).collect())
            .map_err(|e| format!("{ctx}: {e}"))?;
        node = node.with_schedule(schedule);
    }
    for w in &n.temp_windows {
        node = node.with_temp_window(TempWindow { interval: Interval::new(w.start, w.end), temp: w.temp_c });
    }
    Ok(node)
}

fn workflow_from_file(w: &WorkflowFile, input_size: u64, errors: &mut Vec<String>) -> WorkflowDag {
    let mut functions = Vec::new();
    for f in &w.functions {
        let size = match f.output_size_mb {
            Some(mb) if !(mb >= 0.0) || !mb.is_finite() => {
                errors.push(format!("function `{}`: output_size_mb must be >= 0", f.id));
                0
            }
            Some(mb) => mb_to_bytes(mb),
            None => input_size,
        };
        functions.push(
            FunctionSpec::new(f.id.as_str())
                .with_demand(f.demand)
                .with_power(f.power_w)
                .with_heat(f.heat_c)
                .with_compute_time(ms_to_s(f.compute_ms))
                .with_output_size(size)
                .with_fusible(f.fusible),
        );
    }
    let edges = w.edges.iter().map(|e| WorkflowEdge::new(e.from.as_str(), e.to.as_str(), ms_to_s(e.slo_ms))).collect();
    WorkflowDag::new(w.id.clone(), functions, edges)
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    Scenario::from_json(&text)
}
