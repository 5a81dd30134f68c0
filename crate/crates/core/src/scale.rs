//! Synthetic constellation topologies and placement timing.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagation::{compute_placement, PlacementRequest, PropagationError};
use crate::topology::{Link, Node, NodeId, NodeKind, Topology, TopologyError};
use crate::units::{mbps_to_bytes_per_sec, ms_to_s};

/// Largest topology the harness will synthesize.
pub const MAX_SCALE_NODES: usize = 2_000_000;

pub const CLOUD_ID: &str = "cloud";

#[derive(Debug, Error)]
pub enum ScaleError {
    #[error("node count must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("{0} nodes exceeds the memory guard of {MAX_SCALE_NODES}")]
    TooLarge(usize),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

fn sat_id(plane: usize, slot: usize) -> String {
    format!("sat-{plane:04}-{slot:04}")
}

/// Ring-of-rings constellation with `n` nodes: one cloud node plus `n - 1`
/// satellites split over about `sqrt(n - 1)` orbital planes. Satellites link
/// to their in-plane neighbours and to the same slot in the next plane; the
/// cloud links to the first satellite of every plane.
pub fn ring_of_rings(n: usize, seed: u64) -> Result<Topology, ScaleError> {
    if n < 2 {
        return Err(ScaleError::TooSmall(n));
    }
    if n > MAX_SCALE_NODES {
        return Err(ScaleError::TooLarge(n));
    }
    let sats = n - 1;
    let planes = ((sats as f64).sqrt().round() as usize).max(1);
    let sizes: Vec<usize> = (0..planes).map(|p| sats / planes + usize::from(p < sats % planes)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let isl = mbps_to_bytes_per_sec(10_000.0);
    let ground = mbps_to_bytes_per_sec(1_000.0);

    let mut nodes = vec![Node::new(CLOUD_ID, NodeKind::Cloud)];
    let mut links = Vec::new();
    for (p, &size) in sizes.iter().enumerate() {
        for s in 0..size {
            nodes.push(Node::new(sat_id(p, s).as_str(), NodeKind::Satellite));
        }
        let ring_links = if size >= 3 { size } else { size.saturating_sub(1) };
        for s in 0..ring_links {
            let a = sat_id(p, s);
            let b = sat_id(p, (s + 1) % size);
            links.push(Link::new(a.as_str(), b.as_str(), ms_to_s(rng.gen_range(1.0..=20.0)), isl));
        }
        links.push(Link::new(CLOUD_ID, sat_id(p, 0).as_str(), ms_to_s(rng.gen_range(45.0..=75.0)), ground));
    }
    let cross_planes = if planes >= 3 { planes } else { planes - 1 };
    for p in 0..cross_planes {
        let q = (p + 1) % planes;
        for s in 0..sizes[p].min(sizes[q]) {
            let (a, b) = (sat_id(p, s), sat_id(q, s));
            links.push(Link::new(a.as_str(), b.as_str(), ms_to_s(rng.gen_range(1.0..=20.0)), isl));
        }
    }
    Ok(Topology::new(nodes, links, BTreeSet::new())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub nodes: usize,
    pub links: usize,
    pub invocations: usize,
    pub mean_s: f64,
    pub p99_s: f64,
    pub max_s: f64,
}

/// Times `invocations` placement decisions from random satellites towards the
/// cloud with 10-50 MB states and a 60 ms budget.
pub fn time_placements(topology: &Topology, invocations: usize, seed: u64) -> Result<ScaleRow, ScaleError> {
    let graph = topology.prune(0);
    let sources: Vec<&NodeId> = graph.nodes().iter().filter(|id| id.as_str() != CLOUD_ID).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ca1e);
    let mut times = Vec::with_capacity(invocations);
    for i in 0..invocations {
        let req = PlacementRequest {
            function: format!("f{i}").into(),
            source: sources[rng.gen_range(0..sources.len())].clone(),
            destination: CLOUD_ID.into(),
            state_size: rng.gen_range(10_000_000..=50_000_000),
            t_max: 0.060,
        };
        let start = Instant::now();
        let decision = compute_placement(&graph, &req)?;
        times.push(start.elapsed().as_secs_f64());
        std::hint::black_box(decision);
    }
    times.sort_by(f64::total_cmp);
    let mean_s = if times.is_empty() { 0.0 } else { times.iter().sum::<f64>() / times.len() as f64 };
    let p99_s = percentile(&times, 0.99);
    Ok(ScaleRow {
        nodes: topology.node_count(),
        links: topology.links().len(),
        invocations,
        mean_s,
        p99_s,
        max_s: times.last().copied().unwrap_or(0.0),
    })
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn scale_report(counts: &[usize], seed: u64, invocations: usize) -> Result<Vec<ScaleRow>, ScaleError> {
    counts.iter().map(|&n| time_placements(&ring_of_rings(n, seed)?, invocations, seed)).collect()
}

/// Least-squares slope of `log(mean_s)` against `log(nodes)`.
pub fn loglog_slope(rows: &[ScaleRow]) -> f64 {
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.mean_s > 0.0).map(|r| ((r.nodes as f64).ln(), r.mean_s.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return 0.0;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
