//! Campaign suites: batches of seeded runs that check protocol properties
//! and report violations in a byte-reproducible format.
//!
//! Every suite attaches the cross-cutting [`InvariantChecker`] (train value
//! increments, local error predicates, tail-wagon carries) on top of its own
//! property check. Runs execute in parallel but rows are reported in
//! (graph, seed) order, so identical inputs yield identical reports.

use crate::analysis::{
    extract_trains, is_legitimate, layer_stations, train_value, DEFAULT_EXPANSION_BUDGET,
};
use crate::engine::{
    run, step, Configuration, ConvergenceDetector, EngineError, Observer, RandomSource, RunOutcome,
    ScriptTable, Verdict,
};
use crate::fuzz::{clear_leaders, generate, FuzzError, FuzzMode, FuzzSpec};
use crate::graph::{Graph, GraphError, GraphSpec};
use crate::params::{ParamsError, ProtocolParams};
use crate::protocol::{err, local_error, NodeState, Wagon};
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Fuzz(#[from] FuzzError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error("emission scenario infeasible on {graph}: {detail}")]
    Infeasible { graph: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Once legitimate, stays legitimate with the same leader.
    Closure,
    /// Leaderless starts grow a leader before the counter bound.
    LeaderCreation,
    /// With zeroed randomness, marked wagons die out by a fixed round.
    MarkedVanish,
    /// Minimum train value rises every leader-free round pair.
    TrainIncr,
    /// A scripted lone marked emission sweeps the graph into a legitimate
    /// configuration rooted at the emitter.
    LegGrow,
    /// Runs from adversarial starts converge under the round cap.
    Convergence,
    /// No local error predicate holds from round 1 onward.
    LocalErrorPurge,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Closure,
        Suite::LeaderCreation,
        Suite::MarkedVanish,
        Suite::TrainIncr,
        Suite::LegGrow,
        Suite::Convergence,
        Suite::LocalErrorPurge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Closure => "closure",
            Suite::LeaderCreation => "leader-creation",
            Suite::MarkedVanish => "marked-vanish",
            Suite::TrainIncr => "train-incr",
            Suite::LegGrow => "leg-grow",
            Suite::Convergence => "convergence",
            Suite::LocalErrorPurge => "local-error-purge",
        }
    }

    pub fn default_window(self) -> u64 {
        match self {
            Suite::Closure => 5_000,
            Suite::Convergence => 64,
            _ => 0,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = CampaignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| CampaignError::UnknownSuite(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub suite: Suite,
    pub graphs: Vec<GraphSpec>,
    pub train_len: u8,
    /// Runs per graph; run k uses seed `seed0 + k`.
    pub runs: u32,
    pub seed0: u64,
    /// Overrides the suite's default round cap.
    pub max_rounds: Option<u64>,
    /// Overrides the suite's default post-legitimacy watch window.
    pub verify_window: Option<u64>,
}

impl CampaignConfig {
    /// Round cap for suites with a fixed default. Leader creation and marked
    /// vanish derive their caps from the train length instead.
    fn cap(&self) -> u64 {
        self.max_rounds.unwrap_or(match self.suite {
            Suite::Closure => 200_000,
            Suite::TrainIncr => 100,
            Suite::LegGrow => 2_000,
            Suite::Convergence => 1_000_000,
            _ => 60,
        })
    }

    fn window(&self) -> u64 {
        self.verify_window.unwrap_or(self.suite.default_window())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub round: u64,
    pub kind: &'static str,
    pub detail: String,
}

#[derive(Debug)]
pub struct RunRow {
    pub graph: String,
    pub seed: u64,
    pub init: String,
    pub rng: &'static str,
    pub outcome: &'static str,
    pub rounds: u64,
    pub first_legit: Option<u64>,
    /// Suite-specific extras as comma-joined key=value pairs, `-` if none.
    pub detail: String,
    pub violations: Vec<Violation>,
}

#[derive(Debug)]
pub struct CampaignReport {
    pub config: CampaignConfig,
    pub rows: Vec<RunRow>,
}

fn median(sorted: &[u64]) -> Option<u64> {
    if sorted.is_empty() {
        None
    } else {
        Some(sorted[(sorted.len() - 1) / 2])
    }
}

impl CampaignReport {
    pub fn total_violations(&self) -> usize {
        self.rows.iter().map(|r| r.violations.len()).sum()
    }

    pub fn passed(&self) -> usize {
        self.rows.iter().filter(|r| r.violations.is_empty()).count()
    }

    pub fn converged(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome == "converged").count()
    }

    /// First-legitimacy rounds of converged rows, ascending.
    pub fn convergence_rounds(&self) -> Vec<u64> {
        let mut rounds: Vec<u64> = self.rows.iter().filter_map(|r| r.first_legit).collect();
        rounds.sort_unstable();
        rounds
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let graphs = self
            .config
            .graphs
            .iter()
            .map(|g| g.to_string())
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&format!(
            "# campaign suite={} bign={} graphs={} runs={} seed={}\n",
            self.config.suite, self.config.train_len, graphs, self.config.runs, self.config.seed0,
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "run suite={} graph={} seed={} init={} rng={} outcome={} rounds={} first_legit={} detail={} violations={}\n",
                self.config.suite,
                row.graph,
                row.seed,
                row.init,
                row.rng,
                row.outcome,
                row.rounds,
                row.first_legit.map_or_else(|| "-".into(), |r: u64| r.to_string()),
                row.detail,
                row.violations.len(),
            ));
            for v in &row.violations {
                out.push_str(&format!(
                    "violation suite={} graph={} seed={} round={} kind={} detail={}\n",
                    self.config.suite, row.graph, row.seed, v.round, v.kind, v.detail,
                ));
            }
        }
        let rounds = self.convergence_rounds();
        let fmt_opt = |v: Option<u64>| v.map_or_else(|| "-".into(), |r: u64| r.to_string());
        out.push_str(&format!(
            "summary suite={} graphs={} runs={} passed={} failed={} violations={} median_rounds={} max_rounds={}\n",
            self.config.suite,
            self.config.graphs.len(),
            self.rows.len(),
            self.passed(),
            self.rows.len() - self.passed(),
            self.total_violations(),
            fmt_opt(median(&rounds)),
            fmt_opt(rounds.last().copied()),
        ));
        out
    }
}

/// Cross-cutting per-round checks applied in every suite.
///
/// Records a violation when, from round 1 onward, any node satisfies a local
/// error predicate or any station holds a last wagon with a carry, and when a
/// leader-free round pair fails to increment the minimum complete-train
/// value for its flag.
#[derive(Debug)]
pub struct InvariantChecker {
    budget: u64,
    prev_mins: Option<[Option<u64>; 2]>,
    /// Round pairs satisfying the increment precondition, per flag.
    pub qualifying_pairs: [u64; 2],
    pub violations: Vec<Violation>,
}

impl InvariantChecker {
    pub fn new() -> Self {
        InvariantChecker {
            budget: DEFAULT_EXPANSION_BUDGET,
            prev_mins: None,
            qualifying_pairs: [0, 0],
            violations: Vec::new(),
        }
    }
}

impl Default for InvariantChecker {
    fn default() -> Self {
        Self::new()
    }
}

impl Observer for InvariantChecker {
    fn on_round(
        &mut self,
        config: &Configuration,
        graph: &Graph,
        params: &ProtocolParams,
    ) -> Result<Verdict, EngineError> {
        let round = config.round;
        if round >= 1 {
            for (v, state) in config.states.iter().enumerate() {
                if local_error(state, params) {
                    self.violations.push(Violation {
                        round,
                        kind: "local-error",
                        detail: format!("node={v}"),
                    });
                }
                for (name, station) in [("F", state.f), ("L", state.l)] {
                    if let Some(w) = station {
                        if w.idx == params.last_idx() && w.carry == 1 {
                            self.violations.push(Violation {
                                round,
                                kind: "tail-carry",
                                detail: format!("node={v},station={name}"),
                            });
                        }
                    }
                }
            }
        }
        let trains = extract_trains(config, graph, params, self.budget)?;
        let mut mins: [Option<u64>; 2] = [None, None];
        for t in &trains {
            if t.is_complete(params) {
                let slot = &mut mins[t.flag() as usize];
                *slot = Some(slot.map_or(t.value(), |m: u64| m.min(t.value())));
            }
        }
        if let Some(prev) = self.prev_mins {
            for (i, (p, c)) in prev.into_iter().zip(mins).enumerate() {
                let (Some(p), Some(c)) = (p, c) else { continue };
                let leader_holds = config.states.iter().any(|s| {
                    s.leader
                        && [s.f, s.l]
                            .iter()
                            .any(|st| st.is_some_and(|w| w.flag as usize == i))
                });
                if leader_holds {
                    continue;
                }
                self.qualifying_pairs[i] += 1;
                if c < p + 1 {
                    self.violations.push(Violation {
                        round,
                        kind: "train-incr",
                        detail: format!("flag={i},prev={p},cur={c}"),
                    });
                }
            }
        }
        self.prev_mins = Some(mins);
        Ok(Verdict::Continue)
    }
}

fn count_marked(config: &Configuration) -> usize {
    config
        .states
        .iter()
        .flat_map(|s| [s.f, s.l])
        .filter(|s| s.is_some_and(|w| w.flag == 1))
        .count()
}

fn count_errs(config: &Configuration, graph: &Graph, params: &ProtocolParams) -> usize {
    let mut nbrs: Vec<NodeState> = Vec::new();
    (0..config.node_count())
        .filter(|&v| {
            nbrs.clear();
            nbrs.extend(graph.neighbors(v).iter().map(|&u| config.states[u]));
            err(&config.states[v], &nbrs, params)
        })
        .count()
}

/// Runs the configured suite and collects one row per (graph, seed).
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignReport, CampaignError> {
    let mut jobs = Vec::new();
    for spec in &config.graphs {
        let graph = spec.build()?;
        let params = ProtocolParams::for_graph(config.train_len, graph.node_count())?;
        for k in 0..config.runs {
            jobs.push((spec.to_string(), graph.clone(), params, k));
        }
    }
    let rows = jobs
        .par_iter()
        .map(|(name, graph, params, k)| run_one(config, name, graph, params, *k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CampaignReport {
        config: config.clone(),
        rows,
    })
}

fn run_one(
    config: &CampaignConfig,
    graph_name: &str,
    graph: &Graph,
    params: &ProtocolParams,
    k: u32,
) -> Result<RunRow, CampaignError> {
    let seed = config.seed0 + k as u64;
    match config.suite {
        Suite::Closure => {
            let mode = if k.is_multiple_of(2) {
                FuzzMode::AllLeaders
            } else {
                FuzzMode::NoLeaderCoherent
            };
            watched_run(config, graph_name, graph, params, seed, mode, true)
        }
        Suite::Convergence => {
            let mode = if k.is_multiple_of(2) {
                FuzzMode::Uniform
            } else {
                FuzzMode::AllLeaders
            };
            watched_run(config, graph_name, graph, params, seed, mode, false)
        }
        Suite::LeaderCreation => leader_creation_run(config, graph_name, graph, params, seed, k),
        Suite::MarkedVanish => marked_vanish_run(config, graph_name, graph, params, seed, k),
        Suite::TrainIncr => train_incr_run(config, graph_name, graph, params, seed),
        Suite::LocalErrorPurge => local_error_purge_run(config, graph_name, graph, params, seed, k),
        Suite::LegGrow => leg_grow_run(config, graph_name, graph, params, seed),
    }
}

/// Shared body of the closure and convergence suites: run to convergence
/// under a watch window. `cap_is_violation` makes a round-cap outcome count
/// as a violation (closure needs converged runs; convergence reports rates).
fn watched_run(
    config: &CampaignConfig,
    graph_name: &str,
    graph: &Graph,
    params: &ProtocolParams,
    seed: u64,
    mode: FuzzMode,
    cap_is_violation: bool,
) -> Result<RunRow, CampaignError> {
    let spec = FuzzSpec::new(mode, seed);
    let initial = generate(&spec, graph, params)?;
    let rng = RandomSource::seeded(seed);
    let mut checker = InvariantChecker::new();
    let mut detector = ConvergenceDetector::new(config.window());
    let result = run(
        initial,
        graph,
        &rng,
        params,
        config.cap(),
        &mut [&mut checker, &mut detector],
    )?;
    let mut violations = checker.violations;
    for b in &detector.breaks {
        violations.push(Violation {
            round: b.broke_at_round,
            kind: "closure-break",
            detail: format!(
                "legit_since={},{}",
                b.first_legit_round,
                b.detail.replace(' ', "-")
            ),
        });
    }
    let (outcome, first_legit) = match result.outcome {
        RunOutcome::Converged {
            first_legit_round, ..
        } => ("converged", Some(first_legit_round)),
        RunOutcome::RoundCap => {
            if cap_is_violation {
                violations.push(Violation {
                    round: result.config.round,
                    kind: "no-convergence",
                    detail: format!("cap={}", config.cap()),
                });
            }
            ("cap", detector.first_legit_round())
        }
    };
    Ok(RunRow {
        graph: graph_name.to_string(),
        seed,
        init: spec.to_string(),
        rng: "seeded",
        outcome,
        rounds: result.config.round,
        first_legit,
        detail: "-".into(),
        violations,
    })
}

struct FirstLeader {
    round: Option<u64>,
}

impl Observer for FirstLeader {
    fn on_round(
        &mut self,
        config: &Configuration,
        _graph: &Graph,
        _params: &ProtocolParams,
    ) -> Result<Verdict, EngineError> {
        if self.round.is_none() && config.leader_count() > 0 {
            self.round = Some(config.round);
        }
        Ok(Verdict::Continue)
    }
}

fn leader_creation_run(
    config: &CampaignConfig,
    graph_name: &str,
    graph: &Graph,
    params: &ProtocolParams,
    seed: u64,
    k: u32,
) -> Result<RunRow, CampaignError> {
    let bound = params.overflow_value() + params.train_len() as u64;
    let (init, initial) = if k.is_multiple_of(2) {
        let spec = FuzzSpec::new(FuzzMode::NoLeaderCoherent, seed);
        (spec.to_string(), generate(&spec, graph, params)?)
    } else {
        let spec = FuzzSpec::new(FuzzMode::Uniform, seed);
        let mut cfg = generate(&spec, graph, params)?;
        clear_leaders(&mut cfg);
        (format!("uniform-leaderless:{seed}"), cfg)
    };
    let rng = RandomSource::seeded(seed);
    let mut checker = InvariantChecker::new();
    let mut first = FirstLeader { round: None };
    let cap = config.max_rounds.unwrap_or(bound - 1);
    let result = run(
        initial,
        graph,
        &rng,
        params,
        cap,
        &mut [&mut checker, &mut first],
    )?;
    let mut violations = checker.violations;
    match first.round {
        Some(r) if r < bound => {}
        _ => violations.push(Violation {
            round: result.config.round,
            kind: "no-leader",
            detail: format!("bound={bound}"),
        }),
    }
    Ok(RunRow {
        graph: graph_name.to_string(),
        seed,
        init,
        rng: "seeded",
        outcome: "ok",
        rounds: result.config.round,
        first_legit: None,
        detail: format!(
            "first_leader={}",
            first.round.map_or_else(|| "-".into(), |r| r.to_string())
        ),
        violations,
    })
}

fn marked_vanish_run(
    config: &CampaignConfig,
    graph_name: &str,
    graph: &Graph,
    params: &ProtocolParams,
    seed: u64,
    k: u32,
) -> Result<RunRow, CampaignError> {
    let n = params.train_len() as u64;
    let threshold = params.overflow_value() + 3 * n - 2;
    let mode = if k.is_multiple_of(2) {
        FuzzMode::NoLeaderCoherent
    } else {
        FuzzMode::CollidingMarked
    };
    let spec = FuzzSpec::new(mode, seed);
    let initial = generate(&spec, graph, params)?;
    let rng = RandomSource::forced_zero();
    let mut checker = InvariantChecker::new();
    let mut marked = crate::trace::MarkedTracker::default();
    let cap = config.max_rounds.unwrap_or(2 * threshold);
    let result = run(
        initial,
        graph,
        &rng,
        params,
        cap,
        &mut [&mut checker, &mut marked],
    )?;
    let mut violations = checker.violations;
    if let Some(last) = marked.last_marked_round {
        if last >= threshold {
            violations.push(Violation {
                round: last,
                kind: "marked-persist",
                detail: format!("threshold={threshold}"),
            });
        }
    }
    Ok(RunRow {
        graph: graph_name.to_string(),
        seed,
        init: spec.to_string(),
        rng: "zero",
        outcome: "ok",
        rounds: result.config.round,
        first_legit: None,
        detail: format!(
            "last_marked={}",
            marked
                .last_marked_round
                .map_or_else(|| "-".into(), |r| r.to_string())
        ),
        violations,
    })
}

fn train_incr_run(
    config: &CampaignConfig,
    graph_name: &str,
    graph: &Graph,
    params: &ProtocolParams,
    seed: u64,
) -> Result<RunRow, CampaignError> {
    let spec = FuzzSpec::new(FuzzMode::NearOverflow { deficit: 2 }, seed);
    let initial = generate(&spec, graph, params)?;
    let rng = RandomSource::seeded(seed);
    let mut checker = InvariantChecker::new();
    let result = run(
        initial,
        graph,
        &rng,
        params,
        config.cap(),
        &mut [&mut checker],
    )?;
    let mut violations = checker.violations;
    let [q0, q1] = checker.qualifying_pairs;
    if q0 + q1 == 0 {
        violations.push(Violation {
            round: result.config.round,
            kind: "no-qualifying-pair",
            detail: "increment-property-vacuous".into(),
        });
    }
    Ok(RunRow {
        graph: graph_name.to_string(),
        seed,
        init: spec.to_string(),
        rng: "seeded",
        outcome: "ok",
        rounds: result.config.round,
        first_legit: None,
        detail: format!("qpairs0={q0},qpairs1={q1}"),
        violations,
    })
}

fn local_error_purge_run(
    config: &CampaignConfig,
    graph_name: &str,
    graph: &Graph,
    params: &ProtocolParams,
    seed: u64,
    k: u32,
) -> Result<RunRow, CampaignError> {
    let (init, initial) = match k % 3 {
        0 => {
            let spec = FuzzSpec::new(FuzzMode::Uniform, seed);
            let mut cfg = generate(&spec, graph, params)?;
            clear_leaders(&mut cfg);
            (format!("uniform-leaderless:{seed}"), cfg)
        }
        1 => {
            let spec = FuzzSpec::new(FuzzMode::NoLeaderCoherent, seed);
            (spec.to_string(), generate(&spec, graph, params)?)
        }
        _ => {
            let spec = FuzzSpec::new(FuzzMode::CollidingMarked, seed);
            (spec.to_string(), generate(&spec, graph, params)?)
        }
    };
    let rng = RandomSource::seeded(seed);
    let mut checker = InvariantChecker::new();
    let result = run(
        initial,
        graph,
        &rng,
        params,
        config.cap(),
        &mut [&mut checker],
    )?;
    Ok(RunRow {
        graph: graph_name.to_string(),
        seed,
        init,
        rng: "seeded",
        outcome: "ok",
        rounds: result.config.round,
        first_legit: None,
        detail: "-".into(),
        violations: checker.violations,
    })
}

/// Scripted lone-emitter scenario. Phase 1 runs with zeroed randomness from
/// an all-leaders start until the leader set, error count, and marked count
/// have been stable for 2N rounds. Phase 2 scripts one designated leader's
/// draws to 1 for the N rounds feeding its next head emission, then checks
/// the wave conditions at the emission round plus k for every k up to
/// 2*ecc+1 and final legitimacy rooted at the emitter.
fn leg_grow_run(
    config: &CampaignConfig,
    graph_name: &str,
    graph: &Graph,
    params: &ProtocolParams,
    seed: u64,
) -> Result<RunRow, CampaignError> {
    let n = params.train_len() as u64;
    let spec = FuzzSpec::new(FuzzMode::AllLeaders, seed);
    let mut cfg = generate(&spec, graph, params)?;
    let zero = RandomSource::forced_zero();
    let mut checker = InvariantChecker::new();
    let settle_cap = config.cap();

    let mut stable_since = 0;
    let mut prev_leaders = cfg.leaders();
    loop {
        checker.on_round(&cfg, graph, params)?;
        let leaders = cfg.leaders();
        if leaders.is_empty()
            || leaders != prev_leaders
            || count_marked(&cfg) > 0
            || count_errs(&cfg, graph, params) > 0
        {
            stable_since = cfg.round;
            prev_leaders = leaders;
        }
        if cfg.round - stable_since >= 2 * n {
            break;
        }
        if cfg.round >= settle_cap {
            return Err(CampaignError::Infeasible {
                graph: graph_name.to_string(),
                detail: format!("no stable leader set by round {settle_cap}"),
            });
        }
        cfg = step(&cfg, graph, &zero, params);
    }

    let settle = cfg.round;
    let leaders = cfg.leaders();
    let emitter = leaders[seed as usize % leaders.len()];
    let q = cfg.states[emitter].l.ok_or_else(|| CampaignError::Infeasible {
        graph: graph_name.to_string(),
        detail: format!("settled leader {emitter} holds no last wagon"),
    })?;
    // The leader's last-station index advances by one per round, so its next
    // head emission lands at settle + r with r = N - idx (mod N, in 1..=N).
    // The head's flag is the product of the N draws taken in the rounds
    // [t-N-1, t-2]; bump t by whole phases until that window starts after
    // the settle round.
    let mut r = (n - 1 - q.idx as u64) % n + 1;
    while r < n + 1 {
        r += n;
    }
    let emission = settle + r;
    let mut table = ScriptTable::default();
    table.push(emitter, emission - n - 1, emission - 2, 1);
    let scripted = RandomSource::scripted(table);

    let dist = graph.bfs_distances(emitter);
    let ecc = *dist.iter().max().unwrap() as u64;
    let horizon = 2 * ecc + 1;
    let tau = 4 * params.overflow_value() + n;
    let tau_prime = params.overflow_value() + 2 * n;
    let bound = tau + tau_prime + 2 * graph.diameter() as u64 + 1;
    let mut violations = Vec::new();
    if horizon > bound {
        violations.push(Violation {
            round: emission,
            kind: "bound-exceeded",
            detail: format!("horizon={horizon},bound={bound}"),
        });
    }

    let mut head_seen = false;
    let mut legit_at_end = None;
    while cfg.round < emission + horizon {
        cfg = step(&cfg, graph, &scripted, params);
        checker.on_round(&cfg, graph, params)?;
        let round = cfg.round;
        if round < emission {
            continue;
        }
        if round == emission {
            head_seen = cfg.states[emitter]
                .l
                .is_some_and(|w| w.idx == 0 && w.flag == 1);
            if !head_seen {
                violations.push(Violation {
                    round,
                    kind: "no-emission",
                    detail: format!("emitter={emitter}"),
                });
                break;
            }
        }
        let k = round - emission;
        check_wave(
            &cfg,
            graph,
            params,
            emitter,
            &dist,
            k,
            &mut violations,
        );
        if k == horizon {
            legit_at_end = is_legitimate(&cfg, graph, params);
            if legit_at_end != Some(emitter) {
                violations.push(Violation {
                    round,
                    kind: "not-rooted",
                    detail: format!("emitter={emitter}"),
                });
            }
        }
    }
    violations.extend(checker.violations);

    let converged = head_seen && legit_at_end == Some(emitter);
    Ok(RunRow {
        graph: graph_name.to_string(),
        seed,
        init: spec.to_string(),
        rng: "script",
        outcome: if converged { "converged" } else { "failed" },
        rounds: cfg.round,
        first_legit: converged.then_some(emission + horizon),
        detail: format!("emitter={emitter},emission={emission}"),
        violations,
    })
}

/// Checks the five wave conditions k rounds after a lone marked emission:
/// no leader but the emitter within distance k/2; layers 0..=k singleton
/// with the index relation; anchored layer values matching floor(i / 2^idx);
/// no marked wagon beyond layer k; the marked head wagon at layer k.
fn check_wave(
    config: &Configuration,
    graph: &Graph,
    params: &ProtocolParams,
    emitter: usize,
    dist: &[usize],
    k: u64,
    out: &mut Vec<Violation>,
) {
    let round = config.round;
    let mut fail = |kind: &'static str, detail: String| {
        out.push(Violation {
            round,
            kind,
            detail,
        });
    };
    if !config.states[emitter].leader {
        fail("emitter-dethroned", format!("emitter={emitter},k={k}"));
    }
    for (u, &d) in dist.iter().enumerate() {
        if u != emitter && 2 * d as u64 <= k && config.states[u].leader {
            fail("leader-in-wave", format!("node={u},dist={d},k={k}"));
        }
    }

    let layers = layer_stations(config, graph, emitter);
    let mut b: Vec<Wagon> = Vec::new();
    for layer in layers.iter().take(k as usize + 1) {
        let mut common: Option<Wagon> = None;
        for &(node, station) in &layer.stations {
            let Some(w) = station else {
                fail(
                    "layer-hole",
                    format!("layer={},node={node},k={k}", layer.index),
                );
                return;
            };
            if *common.get_or_insert(w) != w {
                fail(
                    "layer-mismatch",
                    format!("layer={},node={node},k={k}", layer.index),
                );
                return;
            }
        }
        b.push(common.expect("layers are never empty on a connected graph"));
    }

    let n = params.train_len() as usize;
    for (i, w) in b.iter().enumerate() {
        if (w.idx as usize + i) % n != b[0].idx as usize {
            fail("layer-index", format!("layer={i},idx={},k={k}", w.idx));
        }
    }
    for i in 0..b.len() {
        let q = b[i].idx as usize;
        let m = i.min(n - 1 - q);
        let span: Vec<Wagon> = (0..=m).map(|j| b[i - j]).collect();
        if span.iter().any(|w| w.flag != b[i].flag) {
            fail("layer-flag", format!("layer={i},k={k}"));
        } else if train_value(&span) != (i as u64) >> q {
            fail(
                "layer-value",
                format!("layer={i},value={},want={},k={k}", train_value(&span), (i as u64) >> q),
            );
        }
    }
    let head = b[k as usize];
    if head.idx != 0 || head.flag != 1 {
        fail("head-misplaced", format!("idx={},flag={},k={k}", head.idx, head.flag));
    }
    for layer in layers.iter().skip(k as usize + 1) {
        for &(node, station) in &layer.stations {
            if station.is_some_and(|w| w.flag == 1) {
                fail(
                    "marked-beyond-wave",
                    format!("layer={},node={node},k={k}", layer.index),
                );
            }
        }
    }
}
