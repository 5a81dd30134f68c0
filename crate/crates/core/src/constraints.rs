//! Placement feasibility constraints, the latency objective and an
//! exhaustive optimal-placement oracle for tiny instances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{Epoch, NodeId, PrunedGraph, Topology, TopologyError};
use crate::workflow::{FunctionId, WorkflowDag, WorkflowError};

/// Upper bound on the number of assignments `brute_force_optimal` visits.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("no path between `{0}` and `{1}`")]
    Unreachable(NodeId, NodeId),
    #[error("function `{0}` is not assigned")]
    Unassigned(FunctionId),
    #[error("enumeration of {0} assignments exceeds the limit of {ENUMERATION_LIMIT}")]
    TooLarge(u128),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub function_to_node: BTreeMap<FunctionId, NodeId>,
    pub epoch: Epoch,
}

impl Assignment {
    pub fn new(epoch: Epoch) -> Self {
        Assignment { function_to_node: BTreeMap::new(), epoch }
    }

    pub fn with(mut self, function: impl Into<FunctionId>, node: impl Into<NodeId>) -> Self {
        self.function_to_node.insert(function.into(), node.into());
        self
    }

    pub fn node_of(&self, function: &FunctionId) -> Option<&NodeId> {
        self.function_to_node.get(function)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Resource {
        node: NodeId,
        demand: f64,
        capacity: f64,
    },
    Temperature {
        node: NodeId,
        temperature: f64,
        max: f64,
    },
    Power {
        node: NodeId,
        demand: f64,
        available: f64,
    },
    /// `latency` is `None` when the endpoints are disconnected.
    Slo {
        from: FunctionId,
        to: FunctionId,
        latency: Option<f64>,
        slo: f64,
    },
    Placement {
        function: FunctionId,
        node: Option<NodeId>,
        reason: String,
    },
    Locality {
        penalty: f64,
        colocated: usize,
    },
}

impl Violation {
    /// Amount by which the bound is exceeded, where meaningful.
    pub fn excess(&self) -> Option<f64> {
        match self {
            Violation::Resource { demand, capacity, .. } => Some(demand - capacity),
            Violation::Temperature { temperature, max, .. } => Some(temperature - max),
            Violation::Power { demand, available, .. } => Some(demand - available),
            Violation::Slo { latency: Some(l), slo, .. } => Some(l - slo),
            Violation::Locality { penalty, colocated } => Some(penalty - *colocated as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Seconds of penalty per network hop.
    pub kappa: f64,
    pub enforce_locality_constraint: bool,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig { kappa: 0.005, enforce_locality_constraint: false }
    }
}

/// Left and right sides of the locality constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalityIndicator {
    pub penalty_sum: f64,
    pub colocated_edges: usize,
}

impl LocalityIndicator {
    pub fn satisfied(&self) -> bool {
        self.penalty_sum <= self.colocated_edges as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub resource: bool,
    pub temperature: bool,
    pub power: bool,
    pub slo: bool,
    pub placement: bool,
    pub locality: bool,
    pub locality_enforced: bool,
    pub locality_indicator: Option<LocalityIndicator>,
    pub violations: Vec<Violation>,
}

impl ConstraintReport {
    pub fn feasible(&self) -> bool {
        self.resource
            && self.temperature
            && self.power
            && self.slo
            && self.placement
            && (self.locality || !self.locality_enforced)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Load {
    demand: f64,
    power: f64,
    heat: f64,
}

fn loads(assignment: &Assignment, workflow: &WorkflowDag) -> BTreeMap<NodeId, Load> {
    let mut out: BTreeMap<NodeId, Load> = BTreeMap::new();
    for f in &workflow.functions {
        if let Some(node) = assignment.node_of(&f.id) {
            let l = out.entry(node.clone()).or_default();
            l.demand += f.demand;
            l.power += f.power;
            l.heat += f.heat;
        }
    }
    out
}

/// Total demand per node must stay within its capacity.
pub fn check_resource(assignment: &Assignment, topology: &Topology, workflow: &WorkflowDag) -> Vec<Violation> {
    loads(assignment, workflow)
        .into_iter()
        .filter_map(|(id, l)| {
            let node = topology.node(&id).ok()?;
            (l.demand > node.capacity).then_some(Violation::Resource {
                node: id,
                demand: l.demand,
                capacity: node.capacity,
            })
        })
        .collect()
}

/// Orbital temperature at the assignment epoch plus execution heat must stay
/// within the node's maximum.
pub fn check_temperature(assignment: &Assignment, topology: &Topology, workflow: &WorkflowDag) -> Vec<Violation> {
    loads(assignment, workflow)
        .into_iter()
        .filter_map(|(id, l)| {
            let node = topology.node(&id).ok()?;
            let temperature = node.temp_orbital_at(assignment.epoch) + l.heat;
            (temperature > node.temp_max).then_some(Violation::Temperature {
                node: id,
                temperature,
                max: node.temp_max,
            })
        })
        .collect()
}

pub fn check_power(assignment: &Assignment, topology: &Topology, workflow: &WorkflowDag) -> Vec<Violation> {
    loads(assignment, workflow)
        .into_iter()
        .filter_map(|(id, l)| {
            let node = topology.node(&id).ok()?;
            (l.power > node.power_available).then_some(Violation::Power {
                node: id,
                demand: l.power,
                available: node.power_available,
            })
        })
        .collect()
}

fn slo_violations(assignment: &Assignment, graph: &PrunedGraph, workflow: &WorkflowDag) -> Vec<Violation> {
    let mut out = Vec::new();
    for e in &workflow.edges {
        let (Some(a), Some(b)) = (assignment.node_of(&e.from), assignment.node_of(&e.to)) else {
            continue;
        };
        let latency = if a == b { Some(0.0) } else { graph.latency(a, b).ok().flatten() };
        if latency.is_none_or(|l| l > e.slo) {
            out.push(Violation::Slo { from: e.from.clone(), to: e.to.clone(), latency, slo: e.slo });
        }
    }
    out
}

/// Shortest-path latency between the nodes of every workflow edge must stay
/// within its SLO at epoch `t`. Disconnected pairs are violations.
pub fn check_slo(assignment: &Assignment, topology: &Topology, workflow: &WorkflowDag, t: Epoch) -> Vec<Violation> {
    slo_violations(assignment, &topology.prune(t), workflow)
}

/// Every function is placed on exactly one node of the available set.
pub fn check_placement(
    assignment: &Assignment,
    topology: &Topology,
    workflow: &WorkflowDag,
    t: Epoch,
) -> Vec<Violation> {
    let available = topology.available_set(t);
    let mut out = Vec::new();
    for f in &workflow.functions {
        match assignment.node_of(&f.id) {
            None => {
                out.push(Violation::Placement { function: f.id.clone(), node: None, reason: "not assigned".into() })
            }
            Some(n) if !available.contains(n) => out.push(Violation::Placement {
                function: f.id.clone(),
                node: Some(n.clone()),
                reason: "node not available".into(),
            }),
            Some(_) => {}
        }
    }
    for (f, n) in &assignment.function_to_node {
        if workflow.function(f).is_err() {
            out.push(Violation::Placement {
                function: f.clone(),
                node: Some(n.clone()),
                reason: "unknown function".into(),
            });
        }
    }
    out
}

/// `kappa * hops`, and 0 on the same node.
pub fn locality_penalty(
    graph: &PrunedGraph,
    a: &NodeId,
    b: &NodeId,
    config: &PenaltyConfig,
) -> Result<f64, ConstraintError> {
    if a == b {
        return Ok(0.0);
    }
    let hops = graph.hops(a, b)?.ok_or_else(|| ConstraintError::Unreachable(a.clone(), b.clone()))?;
    Ok(config.kappa * hops as f64)
}

/// Penalty sum over all edges against the count of co-located edges.
pub fn locality_indicator(
    assignment: &Assignment,
    graph: &PrunedGraph,
    workflow: &WorkflowDag,
    config: &PenaltyConfig,
) -> Result<LocalityIndicator, ConstraintError> {
    let mut penalty_sum = 0.0;
    let mut colocated_edges = 0;
    for e in &workflow.edges {
        let (a, b) = endpoints(assignment, &e.from, &e.to)?;
        if a == b {
            colocated_edges += 1;
        } else {
            penalty_sum += locality_penalty(graph, a, b, config)?;
        }
    }
    Ok(LocalityIndicator { penalty_sum, colocated_edges })
}

fn endpoints<'a>(
    assignment: &'a Assignment,
    from: &FunctionId,
    to: &FunctionId,
) -> Result<(&'a NodeId, &'a NodeId), ConstraintError> {
    let a = assignment.node_of(from).ok_or_else(|| ConstraintError::Unassigned(from.clone()))?;
    let b = assignment.node_of(to).ok_or_else(|| ConstraintError::Unassigned(to.clone()))?;
    Ok((a, b))
}

/// Sum over workflow edges of path latency plus locality penalty.
pub fn objective(
    assignment: &Assignment,
    topology: &Topology,
    workflow: &WorkflowDag,
    config: &PenaltyConfig,
) -> Result<f64, ConstraintError> {
    objective_on(assignment, &topology.prune(assignment.epoch), workflow, config)
}

pub fn objective_on(
    assignment: &Assignment,
    graph: &PrunedGraph,
    workflow: &WorkflowDag,
    config: &PenaltyConfig,
) -> Result<f64, ConstraintError> {
    let mut total = 0.0;
    for e in &workflow.edges {
        let (a, b) = endpoints(assignment, &e.from, &e.to)?;
        if a == b {
            continue;
        }
        let latency = graph.latency(a, b)?.ok_or_else(|| ConstraintError::Unreachable(a.clone(), b.clone()))?;
        total += latency + locality_penalty(graph, a, b, config)?;
    }
    Ok(total)
}

/// Runs every check and collects the outcome.
pub fn evaluate(
    assignment: &Assignment,
    topology: &Topology,
    workflow: &WorkflowDag,
    config: &PenaltyConfig,
) -> ConstraintReport {
    let t = assignment.epoch;
    let graph = topology.prune(t);
    let resource = check_resource(assignment, topology, workflow);
    let temperature = check_temperature(assignment, topology, workflow);
    let power = check_power(assignment, topology, workflow);
    let slo = slo_violations(assignment, &graph, workflow);
    let placement = check_placement(assignment, topology, workflow, t);
    let indicator = locality_indicator(assignment, &graph, workflow, config).ok();
    let locality = indicator.is_some_and(|i| i.satisfied());
    let mut report = ConstraintReport {
        resource: resource.is_empty(),
        temperature: temperature.is_empty(),
        power: power.is_empty(),
        slo: slo.is_empty(),
        placement: placement.is_empty(),
        locality,
        locality_enforced: config.enforce_locality_constraint,
        locality_indicator: indicator,
        violations: Vec::new(),
    };
    report.violations.extend(resource);
    report.violations.extend(temperature);
    report.violations.extend(power);
    report.violations.extend(slo);
    report.violations.extend(placement);
    if let Some(i) = indicator.filter(|i| !i.satisfied()) {
        report.violations.push(Violation::Locality { penalty: i.penalty_sum, colocated: i.colocated_edges });
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub assignment: Assignment,
    pub objective: f64,
}

/// Precomputed pairwise latency and hop tables over the available nodes.
struct Evaluator<'a> {
    nodes: Vec<NodeId>,
    latency: Vec<Vec<Option<f64>>>,
    hops: Vec<Vec<Option<usize>>>,
    capacity: Vec<f64>,
    power: Vec<f64>,
    headroom: Vec<f64>,
    workflow: &'a WorkflowDag,
    functions: Vec<FunctionId>,
    edges: Vec<(usize, usize, f64)>,
}

impl<'a> Evaluator<'a> {
    fn new(
        topology: &Topology,
        graph: &PrunedGraph,
        workflow: &'a WorkflowDag,
        t: Epoch,
    ) -> Result<Self, ConstraintError> {
        let nodes: Vec<NodeId> = graph.nodes().to_vec();
        let mut latency = Vec::with_capacity(nodes.len());
        let mut hops = Vec::with_capacity(nodes.len());
        for a in &nodes {
            let from = graph.latencies_from(a)?;
            latency.push(nodes.iter().map(|b| from[graph_index(graph, b)]).collect());
            hops.push(nodes.iter().map(|b| graph.hops(a, b)).collect::<Result<Vec<_>, _>>()?);
        }
        let mut capacity = Vec::new();
        let mut power = Vec::new();
        let mut headroom = Vec::new();
        for id in &nodes {
            let n = topology.node(id)?;
            capacity.push(n.capacity);
            power.push(n.power_available);
            headroom.push(n.temp_max - n.temp_orbital_at(t));
        }
        let mut functions: Vec<FunctionId> = workflow.functions.iter().map(|f| f.id.clone()).collect();
        functions.sort();
        let pos = |id: &FunctionId| {
            functions.iter().position(|f| f == id).ok_or_else(|| WorkflowError::UnknownFunction(id.clone()))
        };
        let edges = workflow
            .edges
            .iter()
            .map(|e| Ok((pos(&e.from)?, pos(&e.to)?, e.slo)))
            .collect::<Result<Vec<_>, WorkflowError>>()?;
        Ok(Evaluator { nodes, latency, hops, capacity, power, headroom, workflow, functions, edges })
    }

    fn feasible(&self, choice: &[usize], config: &PenaltyConfig) -> bool {
        let n = self.nodes.len();
        let mut demand = vec![0.0; n];
        let mut power = vec![0.0; n];
        let mut heat = vec![0.0; n];
        for (fi, &ni) in choice.iter().enumerate() {
            let f = self.workflow.function(&self.functions[fi]).expect("function exists");
            demand[ni] += f.demand;
            power[ni] += f.power;
            heat[ni] += f.heat;
        }
        for ni in 0..n {
            if demand[ni] > self.capacity[ni] || power[ni] > self.power[ni] || heat[ni] > self.headroom[ni] {
                return false;
            }
        }
        let mut penalty = 0.0;
        let mut colocated = 0usize;
        for &(a, b, slo) in &self.edges {
            let (na, nb) = (choice[a], choice[b]);
            if na == nb {
                colocated += 1;
                continue;
            }
            match self.latency[na][nb] {
                Some(l) if l <= slo => penalty += config.kappa * self.hops[na][nb].unwrap_or(0) as f64,
                _ => return false,
            }
        }
        !config.enforce_locality_constraint || penalty <= colocated as f64
    }

    fn objective(&self, choice: &[usize], config: &PenaltyConfig) -> f64 {
        let mut total = 0.0;
        for &(a, b, _) in &self.edges {
            let (na, nb) = (choice[a], choice[b]);
            if na != nb {
                total += self.latency[na][nb].unwrap_or(f64::INFINITY)
                    + config.kappa * self.hops[na][nb].unwrap_or(0) as f64;
            }
        }
        total
    }
}

fn graph_index(graph: &PrunedGraph, id: &NodeId) -> usize {
    graph.nodes().binary_search(id).expect("node in graph")
}

/// Enumerates every assignment of functions to available nodes and returns
/// the feasible one with the smallest objective. Ties go to the
/// lexicographically smallest assignment over sorted function ids.
pub fn brute_force_optimal(
    topology: &Topology,
    workflow: &WorkflowDag,
    t: Epoch,
    config: &PenaltyConfig,
) -> Result<Option<Optimum>, ConstraintError> {
    let graph = topology.prune(t);
    let eval = Evaluator::new(topology, &graph, workflow, t)?;
    let (k, n) = (eval.functions.len(), eval.nodes.len());
    let count = (n as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if count > ENUMERATION_LIMIT {
        return Err(ConstraintError::TooLarge(count));
    }
    if n == 0 && k > 0 {
        return Ok(None);
    }
    let mut choice = vec![0usize; k];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        if eval.feasible(&choice, config) {
            let value = eval.objective(&choice, config);
            if best.as_ref().is_none_or(|(_, b)| value < *b) {
                best = Some((choice.clone(), value));
            }
        }
        // odometer with the last function varying fastest
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(best.map(|(c, objective)| Optimum {
                    assignment: Assignment {
                        function_to_node: eval
                            .functions
                            .iter()
                            .cloned()
                            .zip(c.iter().map(|&ni| eval.nodes[ni].clone()))
                            .collect(),
                        epoch: t,
                    },
                    objective,
                }));
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < n {
                break;
            }
            choice[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{AvailabilitySchedule, Link, Node, NodeKind};
    use crate::workflow::FunctionSpec;
    use std::collections::BTreeSet;

    fn topo(nodes: Vec<Node>, links: Vec<Link>) -> Topology {
        Topology::new(nodes, links, BTreeSet::new()).unwrap()
    }

    fn wf(fns: Vec<FunctionSpec>, slo: f64) -> WorkflowDag {
        WorkflowDag::chain("wf", fns, slo)
    }

    #[test]
    fn resource_bounds() {
        let t = topo(vec![Node::new("n", NodeKind::Satellite).with_capacity(4.0)], vec![]);
        let w = wf(vec![FunctionSpec::new("a").with_demand(2.0), FunctionSpec::new("b").with_demand(3.0)], 1.0);
        let a = Assignment::new(0).with("a", "n").with("b", "n");
        let v = check_resource(&a, &t, &w);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].excess(), Some(1.0));
        assert!(check_resource(&Assignment::new(0), &t, &w).is_empty());
        let w2 = wf(vec![FunctionSpec::new("a").with_demand(2.0), FunctionSpec::new("b").with_demand(2.0)], 1.0);
        assert!(check_resource(&a, &t, &w2).is_empty());
    }

    #[test]
    fn temperature_bounds() {
        let w = wf(vec![FunctionSpec::new("a").with_heat(15.0), FunctionSpec::new("b").with_heat(20.0)], 1.0);
        let a = Assignment::new(0).with("a", "n").with("b", "n");
        let ok = topo(vec![Node::new("n", NodeKind::Satellite).with_temperature(80.0, 120.0)], vec![]);
        assert!(check_temperature(&a, &ok, &w).is_empty());
        let hot = topo(vec![Node::new("n", NodeKind::Satellite).with_temperature(80.0, 110.0)], vec![]);
        let v = check_temperature(&a, &hot, &w);
        assert_eq!(v[0].excess(), Some(5.0));
        let ground = topo(vec![Node::new("n", NodeKind::GroundStation)], vec![]);
        assert!(check_temperature(&a, &ground, &w).is_empty());
    }

    #[test]
    fn power_bounds() {
        let t = topo(vec![Node::new("n", NodeKind::Satellite).with_power(10.0)], vec![]);
        let a = Assignment::new(0).with("a", "n").with("b", "n");
        let over = wf(vec![FunctionSpec::new("a").with_power(5.0), FunctionSpec::new("b").with_power(6.0)], 1.0);
        assert_eq!(check_power(&a, &t, &over).len(), 1);
        let exact = wf(vec![FunctionSpec::new("a").with_power(5.0), FunctionSpec::new("b").with_power(5.0)], 1.0);
        assert!(check_power(&a, &t, &exact).is_empty());
    }

    fn pair(latency: f64) -> Topology {
        topo(
            vec![Node::new("cloud", NodeKind::Cloud), Node::new("sat", NodeKind::Satellite)],
            vec![Link::new("cloud", "sat", latency, 1e9)],
        )
    }

    #[test]
    fn slo_bounds() {
        let w = wf(vec![FunctionSpec::new("a"), FunctionSpec::new("b")], 0.060);
        let co = Assignment::new(0).with("a", "sat").with("b", "sat");
        assert!(check_slo(&co, &pair(0.075), &w, 0).is_empty());
        let split = Assignment::new(0).with("a", "sat").with("b", "cloud");
        assert!(check_slo(&split, &pair(0.045), &w, 0).is_empty());
        assert_eq!(check_slo(&split, &pair(0.075), &w, 0).len(), 1);
    }

    #[test]
    fn placement_checks() {
        let t = pair(0.01).with_schedule(&"sat".into(), AvailabilitySchedule::never()).unwrap();
        let w = wf(vec![FunctionSpec::new("a"), FunctionSpec::new("b")], 1.0);
        assert_eq!(check_placement(&Assignment::new(0).with("a", "sat").with("b", "cloud"), &t, &w, 0).len(), 1);
        assert!(check_placement(&Assignment::new(0).with("a", "cloud").with("b", "cloud"), &t, &w, 0).is_empty());
        assert_eq!(check_placement(&Assignment::new(0).with("a", "cloud"), &t, &w, 0).len(), 1);
    }

    fn line(n: usize) -> Topology {
        let nodes = (0..n).map(|i| Node::new(format!("n{i}").as_str(), NodeKind::Satellite)).collect();
        let links =
            (1..n).map(|i| Link::new(format!("n{}", i - 1).as_str(), format!("n{i}").as_str(), 0.010, 1e9)).collect();
        topo(nodes, links)
    }

    #[test]
    fn penalty_grows_with_hops() {
        let g = line(4).prune(0);
        let c = PenaltyConfig { kappa: 0.005, enforce_locality_constraint: false };
        assert_eq!(locality_penalty(&g, &"n0".into(), &"n0".into(), &c).unwrap(), 0.0);
        assert!((locality_penalty(&g, &"n0".into(), &"n1".into(), &c).unwrap() - 0.005).abs() < 1e-12);
        assert!((locality_penalty(&g, &"n0".into(), &"n3".into(), &c).unwrap() - 0.015).abs() < 1e-12);
    }

    #[test]
    fn objective_examples() {
        let t = line(2);
        let w = wf(vec![FunctionSpec::new("a"), FunctionSpec::new("b")], 1.0);
        let co = Assignment::new(0).with("a", "n0").with("b", "n0");
        let split = Assignment::new(0).with("a", "n0").with("b", "n1");
        let zero = PenaltyConfig { kappa: 0.0, enforce_locality_constraint: false };
        let five = PenaltyConfig { kappa: 0.005, enforce_locality_constraint: false };
        assert_eq!(objective(&co, &t, &w, &five).unwrap(), 0.0);
        assert!((objective(&split, &t, &w, &zero).unwrap() - 0.010).abs() < 1e-12);
        assert!((objective(&split, &t, &w, &five).unwrap() - 0.015).abs() < 1e-12);
    }

    #[test]
    fn locality_indicator_colocated() {
        let t = line(3);
        let w = wf(vec![FunctionSpec::new("a"), FunctionSpec::new("b"), FunctionSpec::new("c")], 1.0);
        let a = Assignment::new(0).with("a", "n1").with("b", "n1").with("c", "n1");
        let r = evaluate(&a, &t, &w, &PenaltyConfig::default());
        assert!(r.feasible());
        assert_eq!(r.locality_indicator.unwrap().penalty_sum, 0.0);
        assert!(r.locality);
    }

    #[test]
    fn brute_force_prefers_zero_latency() {
        let t = pair(0.01);
        let w = wf(vec![FunctionSpec::new("a")], 1.0);
        let best = brute_force_optimal(&t, &w, 0, &PenaltyConfig::default()).unwrap().unwrap();
        // single function, no edges: both nodes tie at 0 and the smaller id wins
        assert_eq!(best.assignment.node_of(&"a".into()), Some(&NodeId::from("cloud")));
        assert!(evaluate(&best.assignment, &t, &w, &PenaltyConfig::default()).feasible());
    }

    #[test]
    fn brute_force_pins_to_feasible_pair() {
        // b cannot fit on the cloud node, so the pair must span the link
        let t = topo(
            vec![
                Node::new("cloud", NodeKind::Cloud).with_capacity(1.0),
                Node::new("sat", NodeKind::Satellite).with_capacity(1.0),
            ],
            vec![Link::new("cloud", "sat", 0.02, 1e9)],
        );
        let w = wf(vec![FunctionSpec::new("a").with_demand(1.0), FunctionSpec::new("b").with_demand(1.0)], 1.0);
        let best = brute_force_optimal(&t, &w, 0, &PenaltyConfig::default()).unwrap().unwrap();
        assert!((best.objective - 0.025).abs() < 1e-12);
        assert_eq!(best.assignment.node_of(&"a".into()), Some(&NodeId::from("cloud")));
    }

    #[test]
    fn brute_force_infeasible() {
        let t = topo(vec![Node::new("n", NodeKind::Satellite).with_capacity(0.5)], vec![]);
        let w = wf(vec![FunctionSpec::new("a").with_demand(1.0)], 1.0);
        assert!(brute_force_optimal(&t, &w, 0, &PenaltyConfig::default()).unwrap().is_none());
    }

    #[test]
    fn brute_force_guard() {
        let t = line(10);
        let fns = (0..7).map(|i| FunctionSpec::new(format!("f{i}").as_str())).collect();
        let w = wf(fns, 1.0);
        assert!(matches!(brute_force_optimal(&t, &w, 0, &PenaltyConfig::default()), Err(ConstraintError::TooLarge(_))));
    }
}
