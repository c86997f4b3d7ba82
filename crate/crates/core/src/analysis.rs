//! Read-only inspection of configurations: trains, layers, legitimacy,
//! per-round metrics.
//!
//! A train is a chain of wagons with consecutive indices and one common flag,
//! starting at a head (idx 0), where consecutive wagons sit either in the F
//! and L stations of one node or in the L station of one node and the F
//! station of an adjacent node. A complete train has one wagon per index and
//! carries a counter value read head-first, least significant digit first.

use crate::engine::Configuration;
use crate::graph::Graph;
use crate::params::ProtocolParams;
use crate::protocol::{err, NodeState, Station, Wagon};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("train extraction exceeded its expansion budget of {budget}")]
    BudgetExceeded { budget: u64 },
}

/// Default cap on chain extension steps per configuration. Coherent
/// configurations stay far below it; wildly ambiguous adversarial ones fail
/// loudly instead of silently truncating.
pub const DEFAULT_EXPANSION_BUDGET: u64 = 1 << 16;

/// Which of a node's two stations a wagon sits in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StationKind {
    F,
    L,
}

/// One train occurrence: the wagons in index order plus the stations
/// carrying them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TrainView {
    pub wagons: Vec<Wagon>,
    pub carriers: Vec<(usize, StationKind)>,
}

impl TrainView {
    pub fn flag(&self) -> u8 {
        self.wagons[0].flag
    }

    pub fn is_complete(&self, params: &ProtocolParams) -> bool {
        self.wagons.len() == params.train_len() as usize
    }

    pub fn value(&self) -> u64 {
        train_value(&self.wagons)
    }
}

/// Counter value of a run of wagons with consecutive indices, least
/// significant digit first: `sum_i 2^i * (bit_i + 2 * carry_i)`.
pub fn train_value(wagons: &[Wagon]) -> u64 {
    debug_assert!(wagons
        .windows(2)
        .all(|w| w[1].idx == w[0].idx + 1));
    wagons
        .iter()
        .enumerate()
        .map(|(i, w)| w.digit() << i)
        .sum()
}

fn station(state: &NodeState, kind: StationKind) -> Station {
    match kind {
        StationKind::F => state.f,
        StationKind::L => state.l,
    }
}

/// Collects every maximal train in the configuration.
///
/// Chains are followed from every head wagon; where several neighbors could
/// continue a chain, all continuations are explored, so one head can yield
/// several views. Extension work is capped by `budget`.
pub fn extract_trains(
    config: &Configuration,
    graph: &Graph,
    params: &ProtocolParams,
    budget: u64,
) -> Result<Vec<TrainView>, AnalysisError> {
    let mut views = Vec::new();
    let mut spent = 0u64;
    for v in 0..config.node_count() {
        for kind in [StationKind::F, StationKind::L] {
            if let Some(w) = station(&config.states[v], kind) {
                if w.idx == 0 {
                    let mut wagons = vec![w];
                    let mut carriers = vec![(v, kind)];
                    extend(
                        config,
                        graph,
                        params,
                        budget,
                        &mut spent,
                        &mut wagons,
                        &mut carriers,
                        &mut views,
                    )?;
                }
            }
        }
    }
    Ok(views)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    config: &Configuration,
    graph: &Graph,
    params: &ProtocolParams,
    budget: u64,
    spent: &mut u64,
    wagons: &mut Vec<Wagon>,
    carriers: &mut Vec<(usize, StationKind)>,
    views: &mut Vec<TrainView>,
) -> Result<(), AnalysisError> {
    let last = *wagons.last().unwrap();
    let &(node, kind) = carriers.last().unwrap();
    let matches = |s: Station| {
        s.filter(|w| w.idx == last.idx + 1 && w.flag == wagons[0].flag)
    };
    let mut extended = false;
    if last.idx < params.last_idx() {
        let candidates: Vec<(usize, StationKind, Wagon)> = match kind {
            StationKind::F => matches(config.states[node].l)
                .map(|w| (node, StationKind::L, w))
                .into_iter()
                .collect(),
            StationKind::L => graph
                .neighbors(node)
                .iter()
                .filter_map(|&u| matches(config.states[u].f).map(|w| (u, StationKind::F, w)))
                .collect(),
        };
        for (u, k, w) in candidates {
            *spent += 1;
            if *spent > budget {
                return Err(AnalysisError::BudgetExceeded { budget });
            }
            extended = true;
            wagons.push(w);
            carriers.push((u, k));
            extend(config, graph, params, budget, spent, wagons, carriers, views)?;
            wagons.pop();
            carriers.pop();
        }
    }
    if !extended {
        views.push(TrainView {
            wagons: wagons.clone(),
            carriers: carriers.clone(),
        });
    }
    Ok(())
}

/// Smallest counter value among complete trains with the given flag, if any.
pub fn min_train_value(
    config: &Configuration,
    graph: &Graph,
    params: &ProtocolParams,
    flag: u8,
    budget: u64,
) -> Result<Option<u64>, AnalysisError> {
    let trains = extract_trains(config, graph, params, budget)?;
    Ok(trains
        .iter()
        .filter(|t| t.is_complete(params) && t.flag() == flag)
        .map(|t| t.value())
        .min())
}

/// Stations of one layer: layer `2d` holds the L stations of nodes at
/// distance `d` from the root, layer `2d + 1` their F stations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerView {
    pub index: usize,
    /// `(node, station content)` for every node on the layer, ascending by
    /// node id.
    pub stations: Vec<(usize, Station)>,
}

/// All layers around `root`, indices `0 ..= 2 * ecc(root) + 1`.
pub fn layer_stations(config: &Configuration, graph: &Graph, root: usize) -> Vec<LayerView> {
    let dist = graph.bfs_distances(root);
    let ecc = *dist.iter().max().unwrap();
    let mut layers: Vec<LayerView> = (0..2 * ecc + 2)
        .map(|index| LayerView {
            index,
            stations: Vec::new(),
        })
        .collect();
    for (v, &d) in dist.iter().enumerate() {
        layers[2 * d].stations.push((v, config.states[v].l));
        layers[2 * d + 1].stations.push((v, config.states[v].f));
    }
    layers
}

/// Checks whether the configuration is a stable single-leader layout:
/// exactly one leader, every layer around it holding one shared wagon, wagon
/// indices stepping down per layer, and every train prefix anchored at layer
/// `k` carrying the counter value `floor(k / 2^idx)`. Returns the leader.
pub fn is_legitimate(
    config: &Configuration,
    graph: &Graph,
    params: &ProtocolParams,
) -> Option<usize> {
    let leaders = config.leaders();
    let &[root] = leaders.as_slice() else {
        return None;
    };
    let mut layers: Vec<Option<Wagon>> = Vec::new();
    for layer in layer_stations(config, graph, root) {
        let mut common: Option<Wagon> = None;
        for (_, s) in layer.stations {
            let w = s?;
            if *common.get_or_insert(w) != w {
                return None;
            }
        }
        layers.push(common);
    }
    let b: Vec<Wagon> = layers.into_iter().collect::<Option<_>>()?;
    let train_len = params.train_len() as usize;
    for (i, w) in b.iter().enumerate() {
        if (w.idx as usize + i) % train_len != b[0].idx as usize {
            return None;
        }
    }
    for k in 0..b.len() {
        let q = b[k].idx as usize;
        let m = k.min(train_len - 1 - q);
        let span: Vec<Wagon> = (0..=m).map(|j| b[k - j]).collect();
        if span.iter().any(|w| w.flag != b[k].flag) {
            return None;
        }
        if train_value(&span) != (k as u64) >> q {
            return None;
        }
    }
    Some(root)
}

/// Aggregated per-round observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundMetrics {
    pub round: u64,
    pub leader_count: usize,
    /// Stations holding a marked wagon.
    pub marked_wagon_count: usize,
    /// Nodes whose error reset would fire this round.
    pub err_trigger_count: usize,
    pub min_unmarked_train_value: Option<u64>,
    pub min_marked_train_value: Option<u64>,
    pub legitimate_leader: Option<usize>,
}

pub fn collect_metrics(
    config: &Configuration,
    graph: &Graph,
    params: &ProtocolParams,
    budget: u64,
) -> Result<RoundMetrics, AnalysisError> {
    let marked = |s: &Station| s.is_some_and(|w| w.flag == 1) as usize;
    let mut err_triggers = 0;
    let mut nbrs: Vec<NodeState> = Vec::new();
    for v in 0..config.node_count() {
        nbrs.clear();
        nbrs.extend(graph.neighbors(v).iter().map(|&u| config.states[u]));
        if err(&config.states[v], &nbrs, params) {
            err_triggers += 1;
        }
    }
    let trains = extract_trains(config, graph, params, budget)?;
    let min_for = |flag: u8| {
        trains
            .iter()
            .filter(|t| t.is_complete(params) && t.flag() == flag)
            .map(|t| t.value())
            .min()
    };
    Ok(RoundMetrics {
        round: config.round,
        leader_count: config.leader_count(),
        marked_wagon_count: config
            .states
            .iter()
            .map(|s| marked(&s.f) + marked(&s.l))
            .sum(),
        err_trigger_count: err_triggers,
        min_unmarked_train_value: min_for(0),
        min_marked_train_value: min_for(1),
        legitimate_leader: is_legitimate(config, graph, params),
    })
}
