//! Serverless workflow DAGs with per-function demands and per-edge SLOs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FunctionId(String);

impl FunctionId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for FunctionId {
    fn from(s: &str) -> Self {
        FunctionId(s.to_owned())
    }
}

impl From<String> for FunctionId {
    fn from(s: String) -> Self {
        FunctionId(s)
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub id: FunctionId,
    /// Resource demand `D_i`.
    pub demand: f64,
    /// Power demand in watts.
    pub power: f64,
    /// Temperature increase in °C while executing.
    pub heat: f64,
    /// Service time in seconds.
    pub compute_time: f64,
    /// Size in bytes of the state this function produces.
    pub output_state_size: u64,
    /// Whether the function may share a sandbox with its neighbours.
    pub fusible: bool,
}

impl FunctionSpec {
    pub fn new(id: impl Into<FunctionId>) -> Self {
        FunctionSpec {
            id: id.into(),
            demand: 0.0,
            power: 0.0,
            heat: 0.0,
            compute_time: 0.0,
            output_state_size: 0,
            fusible: true,
        }
    }

    pub fn with_demand(mut self, demand: f64) -> Self {
        self.demand = demand;
        self
    }

    pub fn with_power(mut self, watts: f64) -> Self {
        self.power = watts;
        self
    }

    pub fn with_heat(mut self, celsius: f64) -> Self {
        self.heat = celsius;
        self
    }

    pub fn with_compute_time(mut self, seconds: f64) -> Self {
        self.compute_time = seconds;
        self
    }

    pub fn with_output_size(mut self, bytes: u64) -> Self {
        self.output_state_size = bytes;
        self
    }

    pub fn with_fusible(mut self, fusible: bool) -> Self {
        self.fusible = fusible;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowEdge {
    pub from: FunctionId,
    pub to: FunctionId,
    /// Maximum state handoff latency in seconds.
    pub slo: f64,
}

impl WorkflowEdge {
    pub fn new(from: impl Into<FunctionId>, to: impl Into<FunctionId>, slo: f64) -> Self {
        WorkflowEdge { from: from.into(), to: to.into(), slo }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("workflow id must be a non-empty string without `|`")]
    InvalidWorkflowId,
    #[error("workflow has no functions")]
    Empty,
    #[error("invalid function id `{0}`: must be non-empty and contain neither `|` nor `+`")]
    InvalidFunctionId(FunctionId),
    #[error("duplicate function `{0}`")]
    DuplicateFunction(FunctionId),
    #[error("function `{function}` has invalid {field}")]
    InvalidField { function: FunctionId, field: &'static str },
    #[error("edge {from}->{to} references unknown function `{missing}`")]
    DanglingEdge { from: FunctionId, to: FunctionId, missing: FunctionId },
    #[error("self-loop on `{0}`")]
    SelfLoop(FunctionId),
    #[error("duplicate edge {0}->{1}")]
    DuplicateEdge(FunctionId, FunctionId),
    #[error("edge {from}->{to} has non-positive SLO")]
    InvalidSlo { from: FunctionId, to: FunctionId },
    #[error("cycle through {0:?}")]
    Cycle(Vec<FunctionId>),
    #[error("no entry function")]
    NoEntry,
    #[error("multiple entry functions {0:?}")]
    MultipleEntries(Vec<FunctionId>),
    #[error("no terminal function")]
    NoTerminal,
    #[error("multiple terminal functions {0:?}")]
    MultipleTerminals(Vec<FunctionId>),
    #[error("function `{0}` is unreachable from the entry")]
    Unreachable(FunctionId),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkflowError {
    #[error("invalid workflow: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ValidationError>),
    #[error("unknown function `{0}`")]
    UnknownFunction(FunctionId),
}

/// A workflow DAG. Construction does not validate; call
/// [`validate`](Self::validate) before executing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowDag {
    /// Identifies the workflow instance in state keys.
    pub id: String,
    pub functions: Vec<FunctionSpec>,
    pub edges: Vec<WorkflowEdge>,
}

impl WorkflowDag {
    pub fn new(id: impl Into<String>, functions: Vec<FunctionSpec>, edges: Vec<WorkflowEdge>) -> Self {
        WorkflowDag { id: id.into(), functions, edges }
    }

    /// Chain `f[0] -> f[1] -> ...` with one SLO on every edge.
    pub fn chain(id: impl Into<String>, functions: Vec<FunctionSpec>, slo: f64) -> Self {
        let edges = functions.windows(2).map(|w| WorkflowEdge::new(w[0].id.clone(), w[1].id.clone(), slo)).collect();
        WorkflowDag::new(id, functions, edges)
    }

    pub fn function(&self, id: &FunctionId) -> Result<&FunctionSpec, WorkflowError> {
        self.functions.iter().find(|f| &f.id == id).ok_or_else(|| WorkflowError::UnknownFunction(id.clone()))
    }

    pub fn function_ids(&self) -> BTreeSet<&FunctionId> {
        self.functions.iter().map(|f| &f.id).collect()
    }

    pub fn edge(&self, from: &FunctionId, to: &FunctionId) -> Option<&WorkflowEdge> {
        self.edges.iter().find(|e| &e.from == from && &e.to == to)
    }

    pub fn predecessors(&self, id: &FunctionId) -> Vec<&FunctionId> {
        let mut preds: Vec<_> = self.edges.iter().filter(|e| &e.to == id).map(|e| &e.from).collect();
        preds.sort();
        preds
    }

    pub fn successors(&self, id: &FunctionId) -> Vec<&FunctionId> {
        let mut succ: Vec<_> = self.edges.iter().filter(|e| &e.from == id).map(|e| &e.to).collect();
        succ.sort();
        succ
    }

    pub fn outgoing<'a>(&'a self, id: &'a FunctionId) -> impl Iterator<Item = &'a WorkflowEdge> + 'a {
        self.edges.iter().filter(move |e| &e.from == id)
    }

    fn sources(&self) -> Vec<FunctionId> {
        let with_preds: BTreeSet<_> = self.edges.iter().map(|e| &e.to).collect();
        let mut v: Vec<_> = self.functions.iter().map(|f| &f.id).filter(|f| !with_preds.contains(f)).cloned().collect();
        v.sort();
        v
    }

    fn sinks(&self) -> Vec<FunctionId> {
        let with_succ: BTreeSet<_> = self.edges.iter().map(|e| &e.from).collect();
        let mut v: Vec<_> = self.functions.iter().map(|f| &f.id).filter(|f| !with_succ.contains(f)).cloned().collect();
        v.sort();
        v
    }

    pub fn entry(&self) -> Result<FunctionId, WorkflowError> {
        match self.sources().as_slice() {
            [one] => Ok(one.clone()),
            [] => Err(WorkflowError::Invalid(vec![ValidationError::NoEntry])),
            many => Err(WorkflowError::Invalid(vec![ValidationError::MultipleEntries(many.to_vec())])),
        }
    }

    pub fn terminal(&self) -> Result<FunctionId, WorkflowError> {
        match self.sinks().as_slice() {
            [one] => Ok(one.clone()),
            [] => Err(WorkflowError::Invalid(vec![ValidationError::NoTerminal])),
            many => Err(WorkflowError::Invalid(vec![ValidationError::MultipleTerminals(many.to_vec())])),
        }
    }

    /// Checks every structural invariant and reports all violations.
    pub fn validate(&self) -> Result<(), Vec<ValidationError>> {
        let mut errors = Vec::new();
        if self.id.is_empty() || self.id.contains('|') {
            errors.push(ValidationError::InvalidWorkflowId);
        }
        if self.functions.is_empty() {
            errors.push(ValidationError::Empty);
            return Err(errors);
        }
        let mut ids = BTreeSet::new();
        for f in &self.functions {
            let s = f.id.as_str();
            if s.is_empty() || s.contains('|') || s.contains('+') {
                errors.push(ValidationError::InvalidFunctionId(f.id.clone()));
            }
            if !ids.insert(&f.id) {
                errors.push(ValidationError::DuplicateFunction(f.id.clone()));
            }
            let fields = [("demand", f.demand), ("power", f.power), ("heat", f.heat), ("compute_time", f.compute_time)];
            for (field, value) in fields {
                if !(value >= 0.0 && value.is_finite()) {
                    errors.push(ValidationError::InvalidField { function: f.id.clone(), field });
                }
            }
        }
        let mut seen_edges = BTreeSet::new();
        for e in &self.edges {
            for end in [&e.from, &e.to] {
                if !ids.contains(end) {
                    errors.push(ValidationError::DanglingEdge {
                        from: e.from.clone(),
                        to: e.to.clone(),
                        missing: end.clone(),
                    });
                }
            }
            if e.from == e.to {
                errors.push(ValidationError::SelfLoop(e.from.clone()));
            }
            if !(e.slo > 0.0) {
                errors.push(ValidationError::InvalidSlo { from: e.from.clone(), to: e.to.clone() });
            }
            if !seen_edges.insert((&e.from, &e.to)) {
                errors.push(ValidationError::DuplicateEdge(e.from.clone(), e.to.clone()));
            }
        }
        if !errors.is_empty() {
            return Err(errors);
        }

        if let Some(cycle) = self.find_cycle() {
            errors.push(ValidationError::Cycle(cycle));
        }
        let sources = self.sources();
        match sources.len() {
            0 => errors.push(ValidationError::NoEntry),
            1 => {}
            _ => errors.push(ValidationError::MultipleEntries(sources.clone())),
        }
        let sinks = self.sinks();
        match sinks.len() {
            0 => errors.push(ValidationError::NoTerminal),
            1 => {}
            _ => errors.push(ValidationError::MultipleTerminals(sinks)),
        }
        if let [entry] = sources.as_slice() {
            let reached = self.reachable_from(entry);
            for f in &self.functions {
                if !reached.contains(&f.id) {
                    errors.push(ValidationError::Unreachable(f.id.clone()));
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    fn reachable_from(&self, start: &FunctionId) -> BTreeSet<FunctionId> {
        let mut seen = BTreeSet::from([start.clone()]);
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(f) = queue.pop_front() {
            for next in self.successors(&f) {
                if seen.insert(next.clone()) {
                    queue.push_back(next.clone());
                }
            }
        }
        seen
    }

    /// Depth-first search for a back edge; returns the cycle's members.
    fn find_cycle(&self) -> Option<Vec<FunctionId>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let mut marks: BTreeMap<&FunctionId, Mark> = self.functions.iter().map(|f| (&f.id, Mark::New)).collect();
        let ids: Vec<&FunctionId> = marks.keys().copied().collect();
        for start in ids {
            if marks[start] != Mark::New {
                continue;
            }
            let mut stack: Vec<(&FunctionId, Vec<&FunctionId>)> = vec![(start, self.successors(start))];
            marks.insert(start, Mark::Active);
            while let Some((node, pending)) = stack.last_mut() {
                match pending.pop() {
                    Some(next) => match marks[next] {
                        Mark::New => {
                            marks.insert(next, Mark::Active);
                            let succ = self.successors(next);
                            stack.push((next, succ));
                        }
                        Mark::Active => {
                            let pos = stack.iter().position(|(n, _)| *n == next).unwrap();
                            return Some(stack[pos..].iter().map(|(n, _)| (*n).clone()).collect());
                        }
                        Mark::Done => {}
                    },
                    None => {
                        marks.insert(node, Mark::Done);
                        stack.pop();
                    }
                }
            }
        }
        None
    }

    /// Kahn's algorithm with lexicographic tie-break among ready functions.
    pub fn topo_order(&self) -> Result<Vec<FunctionId>, WorkflowError> {
        self.validate().map_err(WorkflowError::Invalid)?;
        let mut indegree: BTreeMap<&FunctionId, usize> = self.functions.iter().map(|f| (&f.id, 0)).collect();
        for e in &self.edges {
            *indegree.get_mut(&e.to).unwrap() += 1;
        }
        let mut ready: BTreeSet<&FunctionId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&f, _)| f).collect();
        let mut order = Vec::with_capacity(self.functions.len());
        while let Some(f) = ready.pop_first() {
            order.push(f.clone());
            for e in self.outgoing(f) {
                let d = indegree.get_mut(&e.to).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(&e.to);
                }
            }
        }
        Ok(order)
    }
}
