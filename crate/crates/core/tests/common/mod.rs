#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use ptpsec_core::topology::Edge;
use ptpsec_core::{parse_scenario, NetworkGraph, NodeId, Scenario};

pub const US: i64 = 1_000;
pub const S: i64 = 1_000_000_000;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

pub fn load(name: &str) -> Scenario {
    parse_scenario(scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Connected multigraph with 2..=8 nodes and at most 14 edges. Node `n0` is
/// the master, a random other node the only slave.
pub fn random_graph(seed: u64) -> NetworkGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=8usize);
    let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
    let mut edges = Vec::new();
    let add = |rng: &mut ChaCha8Rng, a: usize, b: usize, edges: &mut Vec<Edge>| {
        let id = format!("e{}", edges.len());
        let fwd = rng.gen_range(1..=100) * US;
        let bwd = rng.gen_range(1..=100) * US;
        edges.push(Edge::new(id.as_str(), names[a].as_str(), names[b].as_str(), fwd, bwd));
    };
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        add(&mut rng, parent, i, &mut edges);
    }
    let extra = rng.gen_range(0..=(14 - (n - 1)));
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        add(&mut rng, a, b, &mut edges);
    }
    let slave = rng.gen_range(1..n);
    NetworkGraph::new(
        names.iter().map(|s| NodeId::new(s.as_str())).collect(),
        edges,
        NodeId::new("n0"),
        vec![NodeId::new(names[slave].as_str())],
    )
    .expect("generated graph is valid")
}

fn connected_without(graph: &NetworkGraph, removed: u32, src: &NodeId, dst: &NodeId) -> bool {
    let mut seen = vec![src.clone()];
    let mut queue = VecDeque::from([src.clone()]);
    while let Some(u) = queue.pop_front() {
        if &u == dst {
            return true;
        }
        for (i, e) in graph.edges().iter().enumerate() {
            if removed & (1 << i) != 0 {
                continue;
            }
            let next = if e.a == u {
                &e.b
            } else if e.b == u {
                &e.a
            } else {
                continue;
            };
            if !seen.contains(next) {
                seen.push(next.clone());
                queue.push_back(next.clone());
            }
        }
    }
    false
}

/// Smallest number of edges whose removal separates `src` from `dst`, by
/// enumerating every edge subset.
pub fn brute_force_min_cut(graph: &NetworkGraph, src: &NodeId, dst: &NodeId) -> usize {
    let m = graph.edges().len();
    assert!(m <= 20, "enumeration limited to small graphs");
    let mut best = m;
    for mask in 0u32..(1 << m) {
        let k = mask.count_ones() as usize;
        if k < best && !connected_without(graph, mask, src, dst) {
            best = k;
        }
    }
    best
}

/// Parameters of a small randomized master/slave scenario.
#[derive(Debug, Clone)]
pub struct ShortRun {
    pub parallel: usize,
    pub delays_us: Vec<(u32, u32)>,
    pub offset_us: i64,
    pub drift_ppm: f64,
    pub jitter_us: f64,
    pub seed: u64,
    pub duration_s: u32,
    pub sync_eps_us: u32,
    pub dreq_eps_us: u32,
    pub mode: &'static str,
    pub mitigation: bool,
}

impl ShortRun {
    pub fn scenario(&self) -> Scenario {
        let edges: Vec<_> = (0..self.parallel)
            .map(|i| {
                let (f, b) = self.delays_us[i % self.delays_us.len()];
                json!({"id": format!("e{i}"), "a": "M", "b": "S", "delay_fwd_us": f, "delay_bwd_us": b})
            })
            .collect();
        let end = self.duration_s as f64;
        let mut attacks = Vec::new();
        if self.sync_eps_us > 0 {
            attacks.push(json!({"edge": "e0", "direction": "forward", "messages": ["Sync"],
                "kind": "static", "epsilon_us": self.sync_eps_us, "start_s": 0.0, "end_s": end}));
        }
        if self.dreq_eps_us > 0 {
            attacks.push(json!({"edge": "e0", "direction": "reverse", "messages": ["Delay_Req"],
                "kind": "static", "epsilon_us": self.dreq_eps_us, "start_s": 0.0, "end_s": end}));
        }
        let jitter = if self.jitter_us > 0.0 {
            json!({"kind": "uniform", "half_width_us": self.jitter_us})
        } else {
            json!({"kind": "none"})
        };
        let doc = json!({
            "name": "short",
            "topology": {"nodes": ["M", "S"], "edges": edges, "master": "M", "slaves": ["S"]},
            "clocks": {"S": {"offset_us": self.offset_us, "drift_ppm": self.drift_ppm}},
            "protocol": {"mode": self.mode, "mitigation": self.mitigation},
            "attacks": attacks,
            "run": {"duration_s": self.duration_s, "seed": self.seed, "jitter": jitter, "threshold_us": 0.001}
        });
        Scenario::from_json(&doc.to_string()).expect("short scenario is valid")
    }
}
