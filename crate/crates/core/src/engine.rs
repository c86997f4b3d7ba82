//! Synchronous round engine.
//!
//! Each round every node reads the previous round's states of its neighbors
//! and applies [`protocol::update_state`] with two fresh random bits. Updates
//! are double buffered, so within a round all nodes see the same snapshot.

use crate::analysis::is_legitimate;
use crate::graph::Graph;
use crate::params::ProtocolParams;
use crate::protocol::{update_state, BitPair, NodeState, StateError};
use crate::rng::mix_parts;
use std::cell::Cell;
use thiserror::Error;

/// Global state of one round: every node's state plus the round counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub states: Vec<NodeState>,
    pub round: u64,
}

impl Configuration {
    pub fn new(states: Vec<NodeState>) -> Self {
        Configuration { states, round: 0 }
    }

    pub fn node_count(&self) -> usize {
        self.states.len()
    }

    pub fn leader_count(&self) -> usize {
        self.states.iter().filter(|s| s.leader).count()
    }

    pub fn leaders(&self) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&v| self.states[v].leader)
            .collect()
    }

    pub fn validate(&self, params: &ProtocolParams) -> Result<(), StateError> {
        self.states.iter().try_for_each(|s| s.validate(params))
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("observer output failed: {0}")]
    ObserverIo(#[from] std::io::Error),
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("script line {line}: {reason}")]
    BadLine { line: usize, reason: String },
}

/// One scripted coin-flip override: node `node` draws `x` (both raw bits
/// equal to `x`) in every round of `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptEntry {
    pub node: usize,
    pub start: u64,
    pub end: u64,
    pub x: u8,
}

/// Per-node per-round coin-flip script. Draws not covered by any entry are 0;
/// when entries overlap, the latest one wins.
#[derive(Debug, Clone, Default)]
pub struct ScriptTable {
    entries: Vec<ScriptEntry>,
}

impl ScriptTable {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        ScriptTable { entries }
    }

    pub fn push(&mut self, node: usize, start: u64, end: u64, x: u8) {
        debug_assert!(x <= 1);
        self.entries.push(ScriptEntry { node, start, end, x });
    }

    fn lookup(&self, node: usize, round: u64) -> u8 {
        self.entries
            .iter()
            .rev()
            .find(|e| e.node == node && (e.start..=e.end).contains(&round))
            .map_or(0, |e| e.x)
    }

    /// Parses `node start end x` lines. Blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| ScriptError::BadLine {
                line: lineno + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(bad("expected: node start end x"));
            }
            let node = fields[0].parse().map_err(|_| bad("bad node id"))?;
            let start = fields[1].parse().map_err(|_| bad("bad start round"))?;
            let end = fields[2].parse().map_err(|_| bad("bad end round"))?;
            let x: u8 = fields[3].parse().map_err(|_| bad("bad x value"))?;
            if x > 1 {
                return Err(bad("x must be 0 or 1"));
            }
            if end < start {
                return Err(bad("end round before start round"));
            }
            entries.push(ScriptEntry { node, start, end, x });
        }
        Ok(ScriptTable { entries })
    }
}

#[derive(Debug, Clone)]
enum RngMode {
    Seeded(u64),
    ForcedZero,
    ForcedOne,
    Scripted(ScriptTable),
}

/// Source of the two raw bits each node draws each round.
///
/// Draws are a pure function of (mode, node, round), never of call order, so
/// a run is reproducible from its seed alone. The source still counts how
/// many raw bits were handed out, which lets callers audit the randomness
/// consumption of a run.
#[derive(Debug)]
pub struct RandomSource {
    mode: RngMode,
    drawn: Cell<u64>,
}

impl RandomSource {
    pub fn seeded(seed: u64) -> Self {
        Self::with_mode(RngMode::Seeded(seed))
    }

    /// Both raw bits always 0. Leaders can never emit marked heads.
    pub fn forced_zero() -> Self {
        Self::with_mode(RngMode::ForcedZero)
    }

    /// Both raw bits always 1. Every emitted head is marked.
    pub fn forced_one() -> Self {
        Self::with_mode(RngMode::ForcedOne)
    }

    pub fn scripted(table: ScriptTable) -> Self {
        Self::with_mode(RngMode::Scripted(table))
    }

    fn with_mode(mode: RngMode) -> Self {
        RandomSource {
            mode,
            drawn: Cell::new(0),
        }
    }

    pub fn draw(&self, node: usize, round: u64) -> BitPair {
        self.drawn.set(self.drawn.get() + 2);
        match &self.mode {
            RngMode::Seeded(seed) => {
                let z = mix_parts(&[*seed, node as u64, round]);
                BitPair::new((z >> 63) as u8, (z >> 62 & 1) as u8)
            }
            RngMode::ForcedZero => BitPair::ZERO,
            RngMode::ForcedOne => BitPair::ONE,
            RngMode::Scripted(table) => {
                let x = table.lookup(node, round);
                BitPair::new(x, x)
            }
        }
    }

    /// Raw bits drawn so far (two per draw).
    pub fn bits_drawn(&self) -> u64 {
        self.drawn.get()
    }
}

/// Advances the configuration by one synchronous round.
pub fn step(
    config: &Configuration,
    graph: &Graph,
    rng: &RandomSource,
    params: &ProtocolParams,
) -> Configuration {
    debug_assert_eq!(config.node_count(), graph.node_count());
    let mut states = Vec::with_capacity(config.node_count());
    let mut nbrs: Vec<NodeState> = Vec::new();
    for v in 0..config.node_count() {
        nbrs.clear();
        nbrs.extend(graph.neighbors(v).iter().map(|&u| config.states[u]));
        let pair = rng.draw(v, config.round);
        states.push(update_state(&config.states[v], &nbrs, pair, params));
    }
    Configuration {
        states,
        round: config.round + 1,
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    /// An observer confirmed a stable legitimate configuration.
    Converged {
        leader: usize,
        first_legit_round: u64,
    },
    /// The round cap was reached. This is a normal outcome, not an error.
    RoundCap,
}

#[derive(Debug)]
pub struct RunResult {
    pub config: Configuration,
    pub outcome: RunOutcome,
    pub bits_drawn: u64,
}

pub enum Verdict {
    Continue,
    Stop(RunOutcome),
}

/// Round callback. Observers run in list order on the initial configuration
/// and then after every step; the first `Stop` verdict ends the run.
pub trait Observer {
    fn on_round(
        &mut self,
        config: &Configuration,
        graph: &Graph,
        params: &ProtocolParams,
    ) -> Result<Verdict, EngineError>;
}

/// Runs at most `max_rounds` rounds from `config`.
pub fn run(
    mut config: Configuration,
    graph: &Graph,
    rng: &RandomSource,
    params: &ProtocolParams,
    max_rounds: u64,
    observers: &mut [&mut dyn Observer],
) -> Result<RunResult, EngineError> {
    let deliver = |config: &Configuration,
                   observers: &mut [&mut dyn Observer]|
     -> Result<Option<RunOutcome>, EngineError> {
        for obs in observers.iter_mut() {
            if let Verdict::Stop(outcome) = obs.on_round(config, graph, params)? {
                return Ok(Some(outcome));
            }
        }
        Ok(None)
    };
    if let Some(outcome) = deliver(&config, observers)? {
        return Ok(RunResult {
            config,
            outcome,
            bits_drawn: rng.bits_drawn(),
        });
    }
    for _ in 0..max_rounds {
        config = step(&config, graph, rng, params);
        if let Some(outcome) = deliver(&config, observers)? {
            return Ok(RunResult {
                config,
                outcome,
                bits_drawn: rng.bits_drawn(),
            });
        }
    }
    Ok(RunResult {
        config,
        outcome: RunOutcome::RoundCap,
        bits_drawn: rng.bits_drawn(),
    })
}

/// Record of a legitimacy loss observed after convergence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureBreak {
    pub first_legit_round: u64,
    pub broke_at_round: u64,
    pub detail: String,
}

/// Detects the first legitimate round, then keeps watching for `window` more
/// rounds before declaring convergence. Any loss of legitimacy or change of
/// leader inside the window is recorded as a closure break and the watch
/// restarts.
#[derive(Debug)]
pub struct ConvergenceDetector {
    window: u64,
    current: Option<(u64, usize)>,
    pub breaks: Vec<ClosureBreak>,
}

impl ConvergenceDetector {
    pub fn new(window: u64) -> Self {
        ConvergenceDetector {
            window,
            current: None,
            breaks: Vec::new(),
        }
    }

    pub fn first_legit_round(&self) -> Option<u64> {
        self.current.map(|(r, _)| r)
    }
}

impl Observer for ConvergenceDetector {
    fn on_round(
        &mut self,
        config: &Configuration,
        graph: &Graph,
        params: &ProtocolParams,
    ) -> Result<Verdict, EngineError> {
        let legit = is_legitimate(config, graph, params);
        match (self.current, legit) {
            (None, Some(leader)) => {
                self.current = Some((config.round, leader));
                if self.window == 0 {
                    return Ok(Verdict::Stop(RunOutcome::Converged {
                        leader,
                        first_legit_round: config.round,
                    }));
                }
            }
            (None, None) => {}
            (Some((first, leader)), Some(now)) => {
                if now != leader {
                    self.breaks.push(ClosureBreak {
                        first_legit_round: first,
                        broke_at_round: config.round,
                        detail: format!("leader moved from {leader} to {now}"),
                    });
                    self.current = Some((config.round, now));
                } else if config.round - first >= self.window {
                    return Ok(Verdict::Stop(RunOutcome::Converged {
                        leader,
                        first_legit_round: first,
                    }));
                }
            }
            (Some((first, _)), None) => {
                self.breaks.push(ClosureBreak {
                    first_legit_round: first,
                    broke_at_round: config.round,
                    detail: "legitimacy lost".to_string(),
                });
                self.current = None;
            }
        }
        Ok(Verdict::Continue)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{new_leader, Wagon};

    fn p5() -> ProtocolParams {
        ProtocolParams::new(5).unwrap()
    }

    fn all_empty(n: usize) -> Configuration {
        Configuration::new(vec![NodeState::new(0, false, None, None); n])
    }

    #[test]
    fn erroneous_configuration_resets_every_node() {
        let graph = Graph::ring(4).unwrap();
        let rng = RandomSource::forced_one();
        let next = step(&all_empty(4), &graph, &rng, &p5());
        assert_eq!(next.round, 1);
        for s in next.states {
            assert_eq!(s, new_leader(BitPair::ONE));
        }
    }

    #[test]
    fn step_is_deterministic() {
        let graph = Graph::ring(5).unwrap();
        let params = p5();
        let a = step(&all_empty(5), &graph, &RandomSource::forced_zero(), &params);
        let b = step(&all_empty(5), &graph, &RandomSource::forced_zero(), &params);
        assert_eq!(a, b);
        let s1 = step(&a, &graph, &RandomSource::seeded(9), &params);
        let s2 = step(&a, &graph, &RandomSource::seeded(9), &params);
        assert_eq!(s1, s2);
    }

    #[test]
    fn seeded_draws_depend_on_node_and_round_not_call_order() {
        let rng = RandomSource::seeded(3);
        let a = rng.draw(0, 7);
        let b = rng.draw(1, 7);
        let a_again = rng.draw(0, 7);
        assert_eq!(a, a_again);
        let rng2 = RandomSource::seeded(3);
        assert_eq!(rng2.draw(1, 7), b);
    }

    #[test]
    fn run_accounts_two_bits_per_node_per_round() {
        let graph = Graph::ring(4).unwrap();
        let rng = RandomSource::seeded(1);
        let result = run(all_empty(4), &graph, &rng, &p5(), 10, &mut []).unwrap();
        assert_eq!(result.outcome, RunOutcome::RoundCap);
        assert_eq!(result.config.round, 10);
        assert_eq!(result.bits_drawn, 2 * 4 * 10);
    }

    #[test]
    fn script_table_lookup_and_parse() {
        let table = ScriptTable::parse("# comment\n2 5 9 1\n\n2 7 7 0\n").unwrap();
        let rng = RandomSource::scripted(table);
        assert_eq!(rng.draw(2, 4).x(), 0);
        assert_eq!(rng.draw(2, 5).x(), 1);
        assert_eq!(rng.draw(2, 9).x(), 1);
        // Later entries override earlier ones.
        assert_eq!(rng.draw(2, 7).x(), 0);
        assert_eq!(rng.draw(2, 10).x(), 0);
        assert_eq!(rng.draw(1, 6).x(), 0);

        assert!(ScriptTable::parse("1 2 3").is_err());
        assert!(ScriptTable::parse("1 2 3 4").is_err());
        assert!(ScriptTable::parse("1 9 3 1").is_err());
    }

    #[test]
    fn forced_modes_pin_both_bits() {
        assert_eq!(RandomSource::forced_zero().draw(3, 100), BitPair::ZERO);
        assert_eq!(RandomSource::forced_one().draw(3, 100), BitPair::ONE);
    }

    #[test]
    fn leaders_restart_emission_after_losing_l() {
        let graph = Graph::ring(4).unwrap();
        let params = p5();
        let mut states = vec![NodeState::new(0, false, None, Some(Wagon::new(0, 0, 0, 0))); 4];
        states[0] = NodeState::new(1, true, Some(Wagon::new(2, 0, 0, 0)), None);
        let next = step(
            &Configuration::new(states),
            &graph,
            &RandomSource::forced_zero(),
            &params,
        );
        let repaired = &next.states[0];
        assert!(repaired.leader);
        assert_eq!(repaired.f, None);
        assert_eq!(repaired.l, Some(Wagon::new(0, 0, 0, 1)));
    }
}
