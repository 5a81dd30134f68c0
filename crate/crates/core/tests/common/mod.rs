#![allow(dead_code)]

use std::collections::BTreeSet;

use databelt_core::topology::{Link, Node, NodeKind, PrunedGraph, Topology};
use proptest::prelude::*;

/// Raw description of a small random graph: node count and undirected
/// edges `(a, b, latency_ms, bandwidth_mbps)`.
#[derive(Debug, Clone)]
pub struct RawGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, u32, u32)>,
}

pub fn name(i: usize) -> String {
    format!("n{i}")
}

impl RawGraph {
    pub fn topology(&self) -> Topology {
        let nodes = (0..self.n).map(|i| Node::new(name(i).as_str(), NodeKind::Satellite)).collect();
        let links = self
            .edges
            .iter()
            .map(|&(a, b, l, bw)| Link::new(name(a).as_str(), name(b).as_str(), l as f64 / 1000.0, bw as f64 * 1.25e5))
            .collect();
        Topology::new(nodes, links, BTreeSet::new()).unwrap()
    }

    pub fn graph(&self) -> PrunedGraph {
        self.topology().prune(0)
    }

    fn neighbours(&self, v: usize) -> Vec<(usize, f64, f64)> {
        self.edges
            .iter()
            .filter_map(|&(a, b, l, bw)| {
                let (l, bw) = (l as f64 / 1000.0, bw as f64 * 1.25e5);
                if a == v {
                    Some((b, l, bw))
                } else if b == v {
                    Some((a, l, bw))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Every simple path from `src` to `dst` as `(nodes, hop latencies,
    /// hop bandwidths)`.
    pub fn simple_paths(&self, src: usize, dst: usize) -> Vec<(Vec<usize>, Vec<f64>, Vec<f64>)> {
        let mut out = Vec::new();
        let mut nodes = vec![src];
        let mut lat = Vec::new();
        let mut bw = Vec::new();
        self.dfs(dst, &mut nodes, &mut lat, &mut bw, &mut out);
        out
    }

    fn dfs(
        &self,
        dst: usize,
        nodes: &mut Vec<usize>,
        lat: &mut Vec<f64>,
        bw: &mut Vec<f64>,
        out: &mut Vec<(Vec<usize>, Vec<f64>, Vec<f64>)>,
    ) {
        let v = *nodes.last().unwrap();
        if v == dst {
            out.push((nodes.clone(), lat.clone(), bw.clone()));
            return;
        }
        for (w, l, b) in self.neighbours(v) {
            if nodes.contains(&w) {
                continue;
            }
            nodes.push(w);
            lat.push(l);
            bw.push(b);
            self.dfs(dst, nodes, lat, bw, out);
            nodes.pop();
            lat.pop();
            bw.pop();
        }
    }

    /// Minimum path latency by exhaustive enumeration.
    pub fn min_latency(&self, src: usize, dst: usize) -> Option<f64> {
        self.simple_paths(src, dst).iter().map(|(_, l, _)| l.iter().sum::<f64>()).min_by(f64::total_cmp)
    }

    /// Fewest hops by exhaustive enumeration.
    pub fn min_hops(&self, src: usize, dst: usize) -> Option<usize> {
        self.simple_paths(src, dst).iter().map(|(p, _, _)| p.len() - 1).min()
    }
}

/// Random connected-or-not graphs with 2..=8 nodes. Latencies are whole
/// milliseconds from a small range so that equal-cost ties occur.
pub fn arb_graph() -> impl Strategy<Value = RawGraph> {
    (2usize..=8).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        let k = pairs.len();
        proptest::collection::vec((any::<bool>(), 1u32..=6, prop::sample::select(vec![100u32, 1000, 10000])), k)
            .prop_map(move |choices| RawGraph {
                n,
                edges: pairs
                    .iter()
                    .zip(choices)
                    .filter(|(_, (keep, _, _))| *keep)
                    .map(|(&(a, b), (_, l, bw))| (a, b, l, bw))
                    .collect(),
            })
    })
}
