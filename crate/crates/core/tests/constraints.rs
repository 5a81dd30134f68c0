mod common;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use common::{name, RawGraph};
use databelt_core::constraints::{
    brute_force_optimal, check_placement, evaluate, objective, Assignment, PenaltyConfig,
};
use databelt_core::topology::{Link, Node, NodeKind, Topology};
use databelt_core::workflow::{FunctionSpec, WorkflowDag, WorkflowEdge};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct NodeLimits {
    capacity: f64,
    power: f64,
    temp: (f64, f64),
}

#[derive(Debug, Clone)]
struct Func {
    power: f64,
    heat: f64,
}

#[derive(Debug, Clone)]
struct Instance {
    graph: RawGraph,
    limits: Vec<NodeLimits>,
    funcs: Vec<Func>,
    /// `(from, to, slo_ms)` with `from < to`.
    edges: Vec<(usize, usize, u32)>,
    kappa: f64,
    enforce: bool,
}

impl Instance {
    fn topology(&self, scale: u32) -> Topology {
        let nodes = self
            .limits
            .iter()
            .enumerate()
            .map(|(i, l)| {
                Node::new(name(i).as_str(), NodeKind::Satellite)
                    .with_capacity(l.capacity)
                    .with_power(l.power)
                    .with_temperature(l.temp.0, l.temp.1)
            })
            .collect();
        let links = self
            .graph
            .edges
            .iter()
            .map(|&(a, b, l, bw)| {
                Link::new(name(a).as_str(), name(b).as_str(), (l * scale) as f64 / 1000.0, bw as f64 * 1.25e5)
            })
            .collect();
        Topology::new(nodes, links, BTreeSet::new()).unwrap()
    }

    fn workflow(&self, scale: u32) -> WorkflowDag {
        WorkflowDag::new(
            "wf",
            self.funcs
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    FunctionSpec::new(format!("f{i}").as_str()).with_demand(1.0).with_power(f.power).with_heat(f.heat)
                })
                .collect(),
            self.edges
                .iter()
                .map(|&(a, b, slo)| {
                    WorkflowEdge::new(format!("f{a}").as_str(), format!("f{b}").as_str(), (slo * scale) as f64 / 1000.0)
                })
                .collect(),
        )
    }

    fn config(&self, scale: u32) -> PenaltyConfig {
        PenaltyConfig { kappa: self.kappa * scale as f64, enforce_locality_constraint: self.enforce }
    }
}

/// Independent exhaustive solver: Floyd-Warshall latencies, BFS hop counts
/// and a recursive enumeration. Returns the optimal objective.
struct Oracle<'a> {
    inst: &'a Instance,
    dist: Vec<Vec<f64>>,
    hops: Vec<Vec<Option<usize>>>,
}

impl<'a> Oracle<'a> {
    fn new(inst: &'a Instance) -> Self {
        let n = inst.graph.n;
        let mut dist = vec![vec![f64::INFINITY; n]; n];
        let mut adj = vec![Vec::new(); n];
        for (i, row) in dist.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for &(a, b, l, _) in &inst.graph.edges {
            let l = l as f64 / 1000.0;
            dist[a][b] = dist[a][b].min(l);
            dist[b][a] = dist[b][a].min(l);
            adj[a].push(b);
            adj[b].push(a);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if dist[i][k] + dist[k][j] < dist[i][j] {
                        dist[i][j] = dist[i][k] + dist[k][j];
                    }
                }
            }
        }
        let hops = (0..n)
            .map(|s| {
                let mut h = vec![None; n];
                h[s] = Some(0);
                let mut q = VecDeque::from([s]);
                while let Some(v) = q.pop_front() {
                    for &w in &adj[v] {
                        if h[w].is_none() {
                            h[w] = Some(h[v].unwrap() + 1);
                            q.push_back(w);
                        }
                    }
                }
                h
            })
            .collect();
        Oracle { inst, dist, hops }
    }

    /// Objective if feasible.
    fn score(&self, choice: &[usize]) -> Option<f64> {
        let inst = self.inst;
        for (v, lim) in inst.limits.iter().enumerate() {
            let on: Vec<&Func> = choice.iter().zip(&inst.funcs).filter(|(&c, _)| c == v).map(|(_, f)| f).collect();
            let demand = on.len() as f64;
            let power: f64 = on.iter().map(|f| f.power).sum();
            let heat: f64 = on.iter().map(|f| f.heat).sum();
            if demand > lim.capacity || power > lim.power || lim.temp.0 + heat > lim.temp.1 {
                return None;
            }
        }
        let mut total = 0.0;
        let mut penalty = 0.0;
        let mut colocated = 0;
        for &(a, b, slo) in &inst.edges {
            let (x, y) = (choice[a], choice[b]);
            if x == y {
                colocated += 1;
                continue;
            }
            let d = self.dist[x][y];
            if !d.is_finite() || d > slo as f64 / 1000.0 {
                return None;
            }
            let p = inst.kappa * self.hops[x][y].unwrap() as f64;
            total += d + p;
            penalty += p;
        }
        if inst.enforce && penalty > colocated as f64 {
            return None;
        }
        Some(total)
    }

    fn best(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut choice = vec![0; self.inst.funcs.len()];
        self.walk(0, &mut choice, &mut best);
        best
    }

    fn walk(&self, i: usize, choice: &mut Vec<usize>, best: &mut Option<f64>) {
        if i == choice.len() {
            if let Some(s) = self.score(choice) {
                *best = Some(best.map_or(s, |b: f64| b.min(s)));
            }
            return;
        }
        for v in 0..self.inst.graph.n {
            choice[i] = v;
            self.walk(i + 1, choice, best);
        }
    }
}

fn arb_instance() -> impl Strategy<Value = Instance> {
    let graph = (2usize..=5).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        let k = pairs.len();
        proptest::collection::vec((any::<bool>(), 1u32..=6), k).prop_map(move |c| RawGraph {
            n,
            edges: pairs
                .iter()
                .zip(c)
                .filter(|(_, (keep, _))| *keep)
                .map(|(&(a, b), (_, l))| (a, b, l, 1000))
                .collect(),
        })
    });
    let limits = (
        prop::sample::select(vec![1.0, 2.0, 3.0, f64::INFINITY]),
        prop::sample::select(vec![4.0, 8.0, f64::INFINITY]),
        0.0f64..60.0,
        70.0f64..120.0,
    )
        .prop_map(|(capacity, power, orbital, max)| NodeLimits { capacity, power, temp: (orbital, max) });
    (graph, 2usize..=4)
        .prop_flat_map(move |(graph, k)| {
            let extra: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 2..k).map(move |b| (a, b))).collect();
            let m = extra.len();
            (
                Just(graph.clone()),
                proptest::collection::vec(limits.clone(), graph.n),
                proptest::collection::vec(
                    (1.0f64..5.0, 5.0f64..30.0).prop_map(|(power, heat)| Func { power, heat }),
                    k,
                ),
                proptest::collection::vec(3u32..=20, k - 1),
                proptest::collection::vec(proptest::option::of(3u32..=20), m),
                Just(extra),
                prop::sample::select(vec![0.0, 0.001, 0.005]),
                any::<bool>(),
            )
        })
        .prop_map(|(graph, limits, funcs, chain_slo, extra_slo, extra, kappa, enforce)| {
            let mut edges: Vec<(usize, usize, u32)> =
                chain_slo.iter().enumerate().map(|(i, &s)| (i, i + 1, s)).collect();
            edges.extend(extra.iter().zip(extra_slo).filter_map(|(&(a, b), s)| s.map(|s| (a, b, s))));
            Instance { graph, limits, funcs, edges, kappa, enforce }
        })
}

fn ids(a: &Assignment) -> BTreeMap<String, String> {
    a.function_to_node.iter().map(|(f, n)| (f.as_str().to_owned(), n.as_str().to_owned())).collect()
}

fn choice_of(a: &Assignment, k: usize) -> Vec<usize> {
    (0..k)
        .map(|i| {
            let node = &ids(a)[&format!("f{i}")];
            node[1..].parse().unwrap()
        })
        .collect()
}

#[test]
fn chain_on_a_line_prefers_colocation() {
    // n0 - n1 - n2 with room for two functions per node
    let inst = Instance {
        graph: RawGraph { n: 3, edges: vec![(0, 1, 5, 1000), (1, 2, 5, 1000)] },
        limits: vec![NodeLimits { capacity: 2.0, power: f64::INFINITY, temp: (0.0, 100.0) }; 3],
        funcs: vec![Func { power: 1.0, heat: 1.0 }; 3],
        edges: vec![(0, 1, 10), (1, 2, 10)],
        kappa: 0.005,
        enforce: false,
    };
    let best = brute_force_optimal(&inst.topology(1), &inst.workflow(1), 0, &inst.config(1)).unwrap().unwrap();
    // one edge must cross a single 5 ms hop
    assert!((best.objective - 0.010).abs() < 1e-12);
    assert_eq!(ids(&best.assignment)["f0"], "n0");
}

#[test]
fn unassigned_function_is_a_placement_violation() {
    let inst = Instance {
        graph: RawGraph { n: 2, edges: vec![(0, 1, 5, 1000)] },
        limits: vec![NodeLimits { capacity: 2.0, power: 10.0, temp: (0.0, 100.0) }; 2],
        funcs: vec![Func { power: 1.0, heat: 1.0 }; 2],
        edges: vec![(0, 1, 10)],
        kappa: 0.005,
        enforce: false,
    };
    let a = Assignment::new(0).with("f0", "n0");
    assert_eq!(check_placement(&a, &inst.topology(1), &inst.workflow(1), 0).len(), 1);
    assert!(objective(&a, &inst.topology(1), &inst.workflow(1), &inst.config(1)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn brute_force_matches_independent_solver(inst in arb_instance()) {
        let found = brute_force_optimal(&inst.topology(1), &inst.workflow(1), 0, &inst.config(1)).unwrap();
        let oracle = Oracle::new(&inst);
        match (found, oracle.best()) {
            (None, None) => {}
            (Some(opt), Some(best)) => {
                prop_assert!((opt.objective - best).abs() < 1e-9, "{} vs {}", opt.objective, best);
                let mine = oracle.score(&choice_of(&opt.assignment, inst.funcs.len()));
                prop_assert!(mine.is_some_and(|s| (s - best).abs() < 1e-9));
            }
            (a, b) => prop_assert!(false, "solver {:?} vs oracle {:?}", a.map(|o| o.objective), b),
        }
    }

    #[test]
    fn optimum_passes_every_check(inst in arb_instance()) {
        let (topo, wf, cfg) = (inst.topology(1), inst.workflow(1), inst.config(1));
        if let Some(opt) = brute_force_optimal(&topo, &wf, 0, &cfg).unwrap() {
            let report = evaluate(&opt.assignment, &topo, &wf, &cfg);
            prop_assert!(report.feasible(), "{:?}", report.violations);
            prop_assert!(report.resource && report.temperature && report.power && report.slo && report.placement);
            let value = objective(&opt.assignment, &topo, &wf, &cfg).unwrap();
            prop_assert!((value - opt.objective).abs() < 1e-12);
        }
    }

    #[test]
    fn argmin_invariant_under_joint_scaling(inst in arb_instance(), scale in prop::sample::select(vec![2u32, 4])) {
        let base = brute_force_optimal(&inst.topology(1), &inst.workflow(1), 0, &inst.config(1)).unwrap();
        let scaled = brute_force_optimal(&inst.topology(scale), &inst.workflow(scale), 0, &inst.config(scale)).unwrap();
        match (base, scaled) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                prop_assert_eq!(&a.assignment.function_to_node, &b.assignment.function_to_node);
                prop_assert!((b.objective - a.objective * scale as f64).abs() < 1e-12);
            }
            _ => prop_assert!(false, "feasibility changed under scaling"),
        }
    }

    #[test]
    fn zero_kappa_is_pure_latency(inst in arb_instance(), choice in proptest::collection::vec(0usize..5, 4)) {
        let inst = Instance { kappa: 0.0, ..inst };
        let oracle = Oracle::new(&inst);
        let choice: Vec<usize> = choice.iter().take(inst.funcs.len()).map(|c| c % inst.graph.n).collect();
        let a = choice.iter().enumerate().fold(Assignment::new(0), |a, (i, &v)| a.with(format!("f{i}").as_str(), name(v).as_str()));
        let expected: Option<f64> = inst
            .edges
            .iter()
            .map(|&(x, y, _)| Some(oracle.dist[choice[x]][choice[y]]).filter(|d| d.is_finite()))
            .sum();
        match (objective(&a, &inst.topology(1), &inst.workflow(1), &inst.config(1)), expected) {
            (Ok(v), Some(e)) => {
                prop_assert!((v - e).abs() < 1e-12);
                prop_assert!(v >= 0.0);
            }
            (Err(_), None) => {}
            (v, e) => prop_assert!(false, "objective {:?} vs {:?}", v, e),
        }
    }

    #[test]
    fn full_colocation_is_free(inst in arb_instance(), v in 0usize..5) {
        let v = v % inst.graph.n;
        let a = (0..inst.funcs.len()).fold(Assignment::new(0), |a, i| a.with(format!("f{i}").as_str(), name(v).as_str()));
        let (topo, wf, cfg) = (inst.topology(1), inst.workflow(1), inst.config(1));
        prop_assert_eq!(objective(&a, &topo, &wf, &cfg).unwrap(), 0.0);
        let report = evaluate(&a, &topo, &wf, &cfg);
        prop_assert!(report.locality && report.slo);
        let indicator = report.locality_indicator.unwrap();
        prop_assert_eq!(indicator.colocated_edges, inst.edges.len());
    }
}
