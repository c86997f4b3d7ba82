//! Adversarial and structured initial configurations.
//!
//! Uniform fuzzing explores the state space near round 0 but almost never
//! produces deep counter states or coordinated train layouts, so the modes
//! here also build coherent layered structures directly: leaderless train
//! fields, counters parked just below overflow, and pairs of marked
//! structures aimed at each other.

use crate::engine::Configuration;
use crate::graph::Graph;
use crate::params::ProtocolParams;
use crate::protocol::{NodeState, Wagon};
use crate::rng::SimRng;
use crate::trace::{read_snapshot, TraceError};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuzzError {
    #[error("bad start spec {spec:?}: {reason}")]
    BadSpec { spec: String, reason: String },
    #[error("graph is too deep for train length {train_len}: layer {layer} needs digit {digit}")]
    TooDeep {
        train_len: u8,
        layer: usize,
        digit: u64,
    },
    #[error("no complete train fits around the root: need {need} layers, graph offers {got}")]
    NoCompleteTrain { need: usize, got: usize },
    #[error("colliding structures need roots at distance >= 2, best pair ({0}, {1}) is at distance {2}")]
    CollisionTooClose(usize, usize, usize),
    #[error("near-overflow deficit {deficit} out of range 1..={max}")]
    BadDeficit { deficit: u64, max: u64 },
    #[error("snapshot node count {got} does not match graph node count {want}")]
    WrongNodeCount { got: usize, want: usize },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Ways to produce an initial configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum FuzzMode {
    /// Every field of every node drawn independently over its full domain.
    /// Each station is empty with probability `1/(8*train_len + 1)`.
    Uniform,
    /// Leaderless layered train field around a deterministic root: every
    /// station holds the wagon its layer would hold in a stable layout, with
    /// a seeded head index and flag.
    NoLeaderCoherent,
    /// Every node a fresh leader; `rand` drawn with its stationary
    /// distribution, Bernoulli(1/4).
    AllLeaders,
    /// Leaderless marked train field whose complete trains all carry the
    /// counter value `2^train_len - deficit`, so overflow is imminent.
    NearOverflow { deficit: u64 },
    /// Two marked train fields rooted at a most-distant node pair, each node
    /// joining the structure of its nearer root.
    CollidingMarked,
    /// Configuration record loaded from a snapshot file.
    FromFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzSpec {
    pub mode: FuzzMode,
    pub seed: u64,
}

impl FuzzSpec {
    pub fn new(mode: FuzzMode, seed: u64) -> Self {
        FuzzSpec { mode, seed }
    }

    /// Parses CLI syntax: `uniform[:SEED]`, `no-leader-coherent[:SEED]`,
    /// `all-leaders[:SEED]`, `near-overflow[:SEED[:DEFICIT]]`,
    /// `colliding-marked[:SEED]`, `from-file:PATH`. Omitted seeds fall back
    /// to `default_seed`.
    pub fn parse(s: &str, default_seed: u64) -> Result<Self, FuzzError> {
        let bad = |reason: &str| FuzzError::BadSpec {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let (mode, rest) = match s.split_once(':') {
            Some((m, r)) => (m, Some(r)),
            None => (s, None),
        };
        if mode == "from-file" {
            let path = rest.ok_or_else(|| bad("from-file needs a path"))?;
            return Ok(FuzzSpec::new(
                FuzzMode::FromFile(PathBuf::from(path)),
                default_seed,
            ));
        }
        let mut parts = rest.map(|r| r.split(':')).into_iter().flatten();
        let seed = match parts.next() {
            None => default_seed,
            Some(tok) => tok.parse().map_err(|_| bad("bad seed"))?,
        };
        let mode = match mode {
            "uniform" => FuzzMode::Uniform,
            "no-leader-coherent" => FuzzMode::NoLeaderCoherent,
            "all-leaders" => FuzzMode::AllLeaders,
            "near-overflow" => {
                let deficit = match parts.next() {
                    None => 2,
                    Some(tok) => tok.parse().map_err(|_| bad("bad deficit"))?,
                };
                FuzzMode::NearOverflow { deficit }
            }
            "colliding-marked" => FuzzMode::CollidingMarked,
            _ => return Err(bad("unknown start mode")),
        };
        if parts.next().is_some() {
            return Err(bad("trailing fields"));
        }
        Ok(FuzzSpec::new(mode, seed))
    }
}

impl std::fmt::Display for FuzzSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.mode {
            FuzzMode::Uniform => write!(f, "uniform:{}", self.seed),
            FuzzMode::NoLeaderCoherent => write!(f, "no-leader-coherent:{}", self.seed),
            FuzzMode::AllLeaders => write!(f, "all-leaders:{}", self.seed),
            FuzzMode::NearOverflow { deficit } => {
                write!(f, "near-overflow:{}:{deficit}", self.seed)
            }
            FuzzMode::CollidingMarked => write!(f, "colliding-marked:{}", self.seed),
            FuzzMode::FromFile(path) => write!(f, "from-file:{}", path.display()),
        }
    }
}

pub fn generate(
    spec: &FuzzSpec,
    graph: &Graph,
    params: &ProtocolParams,
) -> Result<Configuration, FuzzError> {
    match &spec.mode {
        FuzzMode::Uniform => Ok(uniform(spec.seed, graph, params)),
        FuzzMode::NoLeaderCoherent => coherent_field(spec.seed, graph, params),
        FuzzMode::AllLeaders => Ok(all_leaders(spec.seed, graph)),
        FuzzMode::NearOverflow { deficit } => near_overflow(spec.seed, graph, params, *deficit),
        FuzzMode::CollidingMarked => colliding_marked(spec.seed, graph, params),
        FuzzMode::FromFile(path) => from_file(path, graph, params),
    }
}

/// Strips leadership from every node, leaving everything else untouched.
/// Turns a uniform draw into a uniform-conditioned-leaderless one.
pub fn clear_leaders(config: &mut Configuration) {
    for s in &mut config.states {
        s.leader = false;
    }
}

fn uniform(seed: u64, graph: &Graph, params: &ProtocolParams) -> Configuration {
    let mut rng = SimRng::new(seed);
    let domain = 8 * params.train_len() as u64 + 1;
    let station = |rng: &mut SimRng| -> Option<Wagon> {
        let r = rng.below(domain);
        if r == domain - 1 {
            None
        } else {
            Some(Wagon::new(
                (r / 8) as u8,
                (r >> 2 & 1) as u8,
                (r >> 1 & 1) as u8,
                (r & 1) as u8,
            ))
        }
    };
    let states = (0..graph.node_count())
        .map(|_| {
            let rand = rng.bit();
            let leader = rng.bit() == 1;
            let f = station(&mut rng);
            let l = station(&mut rng);
            NodeState::new(rand, leader, f, l)
        })
        .collect();
    Configuration::new(states)
}

fn all_leaders(seed: u64, graph: &Graph) -> Configuration {
    let mut rng = SimRng::new(seed);
    let states = (0..graph.node_count())
        .map(|_| {
            let rand = rng.bit() & rng.bit();
            NodeState::new(
                rand,
                true,
                Some(Wagon::new(0, 1, 0, 0)),
                Some(Wagon::new(1, 0, 0, 0)),
            )
        })
        .collect();
    Configuration::new(states)
}

/// Wagon a stable layout would hold at layer `k` when the layer-0 wagon has
/// index `head_idx`: index steps down per layer and the digit makes every
/// anchored train prefix sum to `floor(k / 2^idx)`.
fn layer_wagon(
    k: usize,
    head_idx: u8,
    flag: u8,
    params: &ProtocolParams,
) -> Result<Wagon, FuzzError> {
    let n = params.train_len() as usize;
    let q = (head_idx as usize + n - k % n) % n;
    let value = |k: usize, q: usize| (k as u64) >> q;
    let digit = if k == 0 || q == n - 1 {
        value(k, q)
    } else {
        value(k, q) - 2 * value(k - 1, q + 1)
    };
    let limit = if q == n - 1 { 1 } else { 3 };
    if digit > limit {
        return Err(FuzzError::TooDeep {
            train_len: params.train_len(),
            layer: k,
            digit,
        });
    }
    Ok(Wagon::new(
        q as u8,
        (digit % 2) as u8,
        (digit / 2) as u8,
        flag,
    ))
}

fn layered_states(
    dist: &[usize],
    head_idx: u8,
    flag: u8,
    params: &ProtocolParams,
    rng: &mut SimRng,
) -> Result<Vec<NodeState>, FuzzError> {
    dist.iter()
        .map(|&d| {
            let l = layer_wagon(2 * d, head_idx, flag, params)?;
            let f = layer_wagon(2 * d + 1, head_idx, flag, params)?;
            Ok(NodeState::new(rng.bit(), false, Some(f), Some(l)))
        })
        .collect()
}

fn coherent_field(
    seed: u64,
    graph: &Graph,
    params: &ProtocolParams,
) -> Result<Configuration, FuzzError> {
    let mut rng = SimRng::new(seed);
    let head_idx = rng.below(params.train_len() as u64) as u8;
    let flag = rng.bit();
    let root = graph.peripheral_node();
    let dist = graph.bfs_distances(root);
    Ok(Configuration::new(layered_states(
        &dist, head_idx, flag, params, &mut rng,
    )?))
}

/// Nodes of a cycle graph in ring order, or None if the graph is not a
/// plain cycle.
fn ring_order(graph: &Graph) -> Option<Vec<usize>> {
    if (0..graph.node_count()).any(|v| graph.neighbors(v).len() != 2) {
        return None;
    }
    let mut order = vec![0];
    let mut prev = 0;
    let mut cur = graph.neighbors(0)[0];
    while cur != 0 {
        order.push(cur);
        let nbrs = graph.neighbors(cur);
        let next = if nbrs[0] == prev { nbrs[1] } else { nbrs[0] };
        prev = cur;
        cur = next;
    }
    Some(order)
}

fn near_overflow(
    seed: u64,
    graph: &Graph,
    params: &ProtocolParams,
    deficit: u64,
) -> Result<Configuration, FuzzError> {
    let max = params.overflow_value();
    if deficit == 0 || deficit > max {
        return Err(FuzzError::BadDeficit { deficit, max });
    }
    let value = max - deficit;
    let n_len = params.train_len() as usize;
    let mut rng = SimRng::new(seed);
    let value_bit = |idx: usize| (value >> idx & 1) as u8;

    // On a cycle whose station count is a multiple of the train length the
    // trains tile the ring with no seam: every node has a successor and the
    // counters run undisturbed until they overflow.
    if let Some(order) = ring_order(graph) {
        if (2 * order.len()) % n_len == 0 {
            let mut states = vec![NodeState::new(0, false, None, None); order.len()];
            for (k, &v) in order.iter().enumerate() {
                let f_idx = (2 * k) % n_len;
                let l_idx = (2 * k + 1) % n_len;
                states[v] = NodeState::new(
                    rng.bit(),
                    false,
                    Some(Wagon::new(f_idx as u8, value_bit(f_idx), 0, 1)),
                    Some(Wagon::new(l_idx as u8, value_bit(l_idx), 0, 1)),
                );
            }
            return Ok(Configuration::new(states));
        }
    }

    // Otherwise build a layered field with the head index chosen so complete
    // trains sit as low as possible, then rewrite their digits to the target
    // value.
    let root = graph.peripheral_node();
    let dist = graph.bfs_distances(root);
    let layer_count = 2 * dist.iter().max().unwrap() + 2;
    if layer_count < n_len {
        return Err(FuzzError::NoCompleteTrain {
            need: n_len,
            got: layer_count,
        });
    }
    let head_idx = params.last_idx();
    let mut states = layered_states(&dist, head_idx, 1, params, &mut rng)?;
    for (v, &d) in dist.iter().enumerate() {
        let state = &mut states[v];
        for (offset, station) in [(0usize, &mut state.l), (1, &mut state.f)] {
            let k = 2 * d + offset;
            // Layer k belongs to a complete train iff the train's head layer
            // head_k = k + idx(k) also has all of its other wagons inside the
            // layer range; with the head index pinned to the train tail this
            // is head_k <= layer_count - 1.
            let w = station.unwrap();
            let head_layer = k + w.idx as usize;
            if head_layer < layer_count {
                *station = Some(Wagon::new(w.idx, value_bit(w.idx as usize), 0, 1));
            }
        }
    }
    Ok(Configuration::new(states))
}

fn colliding_marked(
    seed: u64,
    graph: &Graph,
    params: &ProtocolParams,
) -> Result<Configuration, FuzzError> {
    let (a, b) = graph.diameter_pair();
    let dist_a = graph.bfs_distances(a);
    let dist_b = graph.bfs_distances(b);
    if dist_a[b] < 2 {
        return Err(FuzzError::CollisionTooClose(a, b, dist_a[b]));
    }
    let mut rng = SimRng::new(seed);
    let head_idx = rng.below(params.train_len() as u64) as u8;
    let states = (0..graph.node_count())
        .map(|v| {
            let d = dist_a[v].min(dist_b[v]);
            let l = layer_wagon(2 * d, head_idx, 1, params)?;
            let f = layer_wagon(2 * d + 1, head_idx, 1, params)?;
            Ok(NodeState::new(rng.bit(), false, Some(f), Some(l)))
        })
        .collect::<Result<_, FuzzError>>()?;
    Ok(Configuration::new(states))
}

fn from_file(
    path: &Path,
    graph: &Graph,
    params: &ProtocolParams,
) -> Result<Configuration, FuzzError> {
    let config = read_snapshot(path, params)?;
    if config.node_count() != graph.node_count() {
        return Err(FuzzError::WrongNodeCount {
            got: config.node_count(),
            want: graph.node_count(),
        });
    }
    Ok(config)
}
