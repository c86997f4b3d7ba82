//! Line-based record formats: traces, metrics, snapshots, run summaries.
//!
//! A configuration record is one line
//! `round=R nodes=TOK;TOK;...` where each node token is
//! `rand,leader,F,L` and a station is `-` (empty) or `idx:bit:carry:flag`.
//! Extra `key=value` pairs may follow `nodes=`; parsers ignore them, which
//! lets trace lines carry per-round metrics while staying loadable as
//! snapshots. Lines starting with `#` or `summary` are comments and run
//! summaries. All fields are written in a fixed order so identical runs
//! serialize identically, byte for byte.

use crate::analysis::{collect_metrics, RoundMetrics};
use crate::engine::{Configuration, EngineError, Observer, RunOutcome, RunResult, Verdict};
use crate::graph::Graph;
use crate::params::ProtocolParams;
use crate::protocol::{NodeState, StateError, Station, Wagon};
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("bad station token {0:?}")]
    BadStation(String),
    #[error("bad node token {0:?}")]
    BadNode(String),
    #[error("bad configuration record {0:?}")]
    BadRecord(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("no configuration record in {}", .0.display())]
    NoConfig(PathBuf),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn write_station(out: &mut String, s: &Station) {
    match s {
        None => out.push('-'),
        Some(w) => {
            let _ = write!(out, "{}:{}:{}:{}", w.idx, w.bit, w.carry, w.flag);
        }
    }
}

pub fn format_node(state: &NodeState) -> String {
    let mut out = String::new();
    let _ = write!(out, "{},{},", state.rand, state.leader as u8);
    write_station(&mut out, &state.f);
    out.push(',');
    write_station(&mut out, &state.l);
    out
}

fn parse_station(tok: &str, params: &ProtocolParams) -> Result<Station, TraceError> {
    if tok == "-" {
        return Ok(None);
    }
    let bad = || TraceError::BadStation(tok.to_string());
    let mut fields = tok.split(':').map(|f| f.parse::<u8>());
    let mut next = || fields.next().ok_or_else(bad)?.map_err(|_| bad());
    let w = Wagon {
        idx: next()?,
        bit: next()?,
        carry: next()?,
        flag: next()?,
    };
    if fields.next().is_some() {
        return Err(bad());
    }
    w.validate(params)?;
    Ok(Some(w))
}

pub fn parse_node(tok: &str, params: &ProtocolParams) -> Result<NodeState, TraceError> {
    let bad = || TraceError::BadNode(tok.to_string());
    let parts: Vec<&str> = tok.split(',').collect();
    let [rand, leader, f, l] = parts.as_slice() else {
        return Err(bad());
    };
    let rand: u8 = rand.parse().map_err(|_| bad())?;
    let leader: u8 = leader.parse().map_err(|_| bad())?;
    if rand > 1 || leader > 1 {
        return Err(bad());
    }
    Ok(NodeState::new(
        rand,
        leader == 1,
        parse_station(f, params)?,
        parse_station(l, params)?,
    ))
}

/// Renders `round=R nodes=...` without a trailing newline.
pub fn format_config(config: &Configuration) -> String {
    let mut out = format!("round={} nodes=", config.round);
    for (i, s) in config.states.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        out.push_str(&format_node(s));
    }
    out
}

/// Parses a configuration record; `key=value` pairs after `nodes=` are
/// ignored.
pub fn parse_config(line: &str, params: &ProtocolParams) -> Result<Configuration, TraceError> {
    let bad = || TraceError::BadRecord(line.to_string());
    let mut round = None;
    let mut nodes = None;
    for field in line.split_whitespace() {
        let (key, value) = field.split_once('=').ok_or_else(bad)?;
        match key {
            "round" => round = Some(value.parse::<u64>().map_err(|_| bad())?),
            "nodes" => nodes = Some(value),
            _ => {}
        }
    }
    let (round, nodes) = round.zip(nodes).ok_or_else(bad)?;
    let states = nodes
        .split(';')
        .map(|tok| parse_node(tok, params))
        .collect::<Result<Vec<_>, _>>()?;
    if states.is_empty() {
        return Err(bad());
    }
    Ok(Configuration { states, round })
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

/// Metrics keys in their fixed order, without the leading `round=`.
pub fn format_metrics_fields(m: &RoundMetrics) -> String {
    format!(
        "leaders={} marked={} errs={} legit={} leader={} min_unmarked={} min_marked={}",
        m.leader_count,
        m.marked_wagon_count,
        m.err_trigger_count,
        m.legitimate_leader.is_some() as u8,
        opt(m.legitimate_leader),
        opt(m.min_unmarked_train_value),
        opt(m.min_marked_train_value),
    )
}

pub fn format_metrics(m: &RoundMetrics) -> String {
    format!("round={} {}", m.round, format_metrics_fields(m))
}

/// Loads the last configuration record of a snapshot or trace file.
pub fn read_snapshot(path: &Path, params: &ProtocolParams) -> Result<Configuration, TraceError> {
    let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("summary") {
            continue;
        }
        config = Some(parse_config(line, params)?);
    }
    config.ok_or_else(|| TraceError::NoConfig(path.to_path_buf()))
}

/// Final record of a simulate run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub outcome: RunOutcome,
    pub round: u64,
    pub legitimate_leader: Option<usize>,
    /// Last round on which any marked wagon existed.
    pub last_marked_round: Option<u64>,
    pub bits_drawn: u64,
    /// False when the train length is below the bound for the graph size.
    pub in_regime: bool,
}

impl Summary {
    pub fn render(&self) -> String {
        let (stop, first_legit) = match self.outcome {
            RunOutcome::Converged {
                first_legit_round, ..
            } => ("converged", Some(first_legit_round)),
            RunOutcome::RoundCap => ("cap", None),
        };
        format!(
            "summary stop={} round={} first_legit={} legit={} leader={} last_marked={} bits={} regime={}",
            stop,
            self.round,
            opt(first_legit),
            self.legitimate_leader.is_some() as u8,
            opt(self.legitimate_leader),
            opt(self.last_marked_round),
            self.bits_drawn,
            if self.in_regime { "ok" } else { "out-of-regime" },
        )
    }

    pub fn from_run(
        result: &RunResult,
        graph: &Graph,
        params: &ProtocolParams,
        last_marked_round: Option<u64>,
        in_regime: bool,
    ) -> Self {
        Summary {
            outcome: result.outcome,
            round: result.config.round,
            legitimate_leader: crate::analysis::is_legitimate(&result.config, graph, params),
            last_marked_round,
            bits_drawn: result.bits_drawn,
            in_regime,
        }
    }
}

/// Observer writing one configuration record per recorded round, with
/// optional metrics fields appended.
pub struct TraceWriter<W: Write> {
    out: W,
    every: u64,
    with_metrics: bool,
    budget: u64,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W, every: u64, with_metrics: bool, budget: u64) -> Self {
        TraceWriter {
            out,
            every: every.max(1),
            with_metrics,
            budget,
        }
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

impl<W: Write> Observer for TraceWriter<W> {
    fn on_round(
        &mut self,
        config: &Configuration,
        graph: &Graph,
        params: &ProtocolParams,
    ) -> Result<Verdict, EngineError> {
        if config.round.is_multiple_of(self.every) {
            if self.with_metrics {
                let m = collect_metrics(config, graph, params, self.budget)?;
                writeln!(
                    self.out,
                    "{} {}",
                    format_config(config),
                    format_metrics_fields(&m)
                )?;
            } else {
                writeln!(self.out, "{}", format_config(config))?;
            }
        }
        Ok(Verdict::Continue)
    }
}

/// Observer writing one metrics record per round.
pub struct MetricsWriter<W: Write> {
    out: W,
    budget: u64,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W, budget: u64) -> Self {
        MetricsWriter { out, budget }
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.out.flush()
    }

    /// Hands the underlying writer back, for appending a summary record.
    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> Observer for MetricsWriter<W> {
    fn on_round(
        &mut self,
        config: &Configuration,
        graph: &Graph,
        params: &ProtocolParams,
    ) -> Result<Verdict, EngineError> {
        let m = collect_metrics(config, graph, params, self.budget)?;
        writeln!(self.out, "{}", format_metrics(&m))?;
        Ok(Verdict::Continue)
    }
}

/// Observer remembering the last round that held any marked wagon.
#[derive(Debug, Default)]
pub struct MarkedTracker {
    pub last_marked_round: Option<u64>,
}

impl Observer for MarkedTracker {
    fn on_round(
        &mut self,
        config: &Configuration,
        _graph: &Graph,
        _params: &ProtocolParams,
    ) -> Result<Verdict, EngineError> {
        let any = config
            .states
            .iter()
            .flat_map(|s| [s.f, s.l])
            .any(|s| s.is_some_and(|w| w.flag == 1));
        if any {
            self.last_marked_round = Some(config.round);
        }
        Ok(Verdict::Continue)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p5() -> ProtocolParams {
        ProtocolParams::new(5).unwrap()
    }

    #[test]
    fn node_token_format() {
        let s = NodeState::new(1, true, Some(Wagon::new(0, 1, 0, 0)), None);
        assert_eq!(format_node(&s), "1,1,0:1:0:0,-");
        assert_eq!(parse_node("1,1,0:1:0:0,-", &p5()).unwrap(), s);
    }

    #[test]
    fn config_record_format() {
        let config = Configuration {
            states: vec![
                NodeState::new(0, false, None, Some(Wagon::new(2, 1, 0, 1))),
                NodeState::new(1, true, Some(Wagon::new(0, 1, 0, 0)), None),
            ],
            round: 12,
        };
        let line = format_config(&config);
        assert_eq!(line, "round=12 nodes=0,0,-,2:1:0:1;1,1,0:1:0:0,-");
        assert_eq!(parse_config(&line, &p5()).unwrap(), config);
        // Extra fields after nodes= are tolerated.
        let decorated = format!("{line} leaders=1 marked=1");
        assert_eq!(parse_config(&decorated, &p5()).unwrap(), config);
    }

    #[test]
    fn parse_rejects_malformed_input() {
        let params = p5();
        assert!(parse_node("2,0,-,-", &params).is_err());
        assert!(parse_node("0,0,-", &params).is_err());
        assert!(parse_node("0,0,-,9:0:0:0", &params).is_err());
        assert!(parse_node("0,0,-,1:2:0:0", &params).is_err());
        assert!(parse_config("nodes=0,0,-,-", &params).is_err());
        assert!(parse_config("round=3", &params).is_err());
        assert!(parse_config("round=3 nodes=", &params).is_err());
    }

    #[test]
    fn snapshot_takes_the_last_record() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# trace").unwrap();
        writeln!(file, "round=0 nodes=0,0,-,-;0,0,-,-").unwrap();
        writeln!(file, "round=1 nodes=1,1,0:1:0:0,1:0:0:0;0,0,-,0:0:0:0").unwrap();
        writeln!(file, "summary stop=cap round=1").unwrap();
        let config = read_snapshot(file.path(), &p5()).unwrap();
        assert_eq!(config.round, 1);
        assert!(config.states[0].leader);

        let empty = tempfile::NamedTempFile::new().unwrap();
        assert!(matches!(
            read_snapshot(empty.path(), &p5()),
            Err(TraceError::NoConfig(_))
        ));
    }

    #[test]
    fn summary_line_is_stable() {
        let s = Summary {
            outcome: RunOutcome::Converged {
                leader: 3,
                first_legit_round: 40,
            },
            round: 1040,
            legitimate_leader: Some(3),
            last_marked_round: Some(38),
            bits_drawn: 2080,
            in_regime: true,
        };
        assert_eq!(
            s.render(),
            "summary stop=converged round=1040 first_legit=40 legit=1 leader=3 last_marked=38 bits=2080 regime=ok"
        );
        let s = Summary {
            outcome: RunOutcome::RoundCap,
            round: 9,
            legitimate_leader: None,
            last_marked_round: None,
            bits_drawn: 72,
            in_regime: false,
        };
        assert_eq!(
            s.render(),
            "summary stop=cap round=9 first_legit=- legit=0 leader=- last_marked=- bits=72 regime=out-of-regime"
        );
    }

    fn arb_station() -> impl Strategy<Value = Station> {
        prop_oneof![
            1 => Just(None),
            4 => (0u8..5, 0u8..2, 0u8..2, 0u8..2)
                .prop_map(|(i, b, c, f)| Some(Wagon::new(i, b, c, f))),
        ]
    }

    proptest! {
        #[test]
        fn config_records_round_trip(
            round in 0u64..1_000_000,
            states in proptest::collection::vec(
                (0u8..2, any::<bool>(), arb_station(), arb_station())
                    .prop_map(|(r, ld, f, l)| NodeState::new(r, ld, f, l)),
                1..12,
            ),
        ) {
            let config = Configuration { states, round };
            let line = format_config(&config);
            prop_assert_eq!(parse_config(&line, &p5()).unwrap(), config);
        }
    }
}
