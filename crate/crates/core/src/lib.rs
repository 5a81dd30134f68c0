//! Placement engine and simulator for SLO-aware function-state propagation
//! across dynamic Edge-Cloud-Space networks.
//!
//! The pipeline has three phases. [`Topology::prune`] keeps the nodes that are
//! up at an epoch, [`compute_placement`] picks where a function's output state
//! should go, and [`offload`] stores it there. [`simengine`] drives whole
//! workflows through that pipeline and two baselines.

// NaN must fail the range checks, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod export;
pub mod fusion;
pub mod propagation;
pub mod scale;
pub mod scenario;
pub mod simengine;
pub mod statestore;
pub mod topology;
pub mod units;
pub mod workflow;

pub use constraints::{brute_force_optimal, Assignment, ConstraintReport, PenaltyConfig, Violation};
pub use fusion::{execute_group, plan_fusion, FusionGroup, FusionPlan};
pub use propagation::{compute_placement, migration_time, offload, PlacementDecision, PlacementRequest};
pub use scenario::{load_scenario, Scenario, ScenarioFile};
pub use simengine::{run_batch, run_workflow, Policy, RunResult};
pub use statestore::{StateKey, StateObject, StateStore, StorageOpLog};
pub use topology::{NodeId, NodeKind, PrunedGraph, Topology};
pub use workflow::{FunctionId, FunctionSpec, WorkflowDag};
