//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single PASS line (visible with `-- --nocapture`); a failure panics with
//! the matching FAIL line.
//!
//! Run with: cargo test -p railelect --test acceptance -- --nocapture

use railelect::analysis::{extract_trains, is_legitimate, DEFAULT_EXPANSION_BUDGET};
use railelect::campaign::{run_campaign, CampaignConfig, CampaignReport, Suite};
use railelect::engine::{
    run, Configuration, ConvergenceDetector, EngineError, Observer, RandomSource, RunOutcome,
    Verdict,
};
use railelect::fuzz::{generate, FuzzMode, FuzzSpec};
use railelect::graph::{Graph, GraphSpec};
use railelect::protocol::{update_state, BitPair};
use railelect::trace::{format_node, parse_node};
use railelect::{NodeState, ProtocolParams, Station, Wagon};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

const BIGN: u8 = 5;

fn verdict(criterion: u32, name: &str, pass: bool, detail: String) {
    let word = if pass { "PASS" } else { "FAIL" };
    let line = format!("ACCEPTANCE {criterion} {name}: {word} ({detail})");
    println!("{line}");
    assert!(pass, "{line}");
}

fn params() -> ProtocolParams {
    ProtocolParams::new(BIGN).unwrap()
}

/// Plain counter-keyed generator for test-local randomness, independent of
/// the library's sources.
struct TestRng(u64);

impl TestRng {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

// The four campaign graph families named by the convergence and closure
// criteria. The gnp seed is pinned so every acceptance run sees the same
// connected graph.
const CAMPAIGN_GRAPHS: &str = "ring:6,path:8,gnp:8:0.4:7,grid:3x3";

struct Corpus {
    closure: CampaignReport,
    closure_elapsed: Duration,
    leader_creation: CampaignReport,
    marked_vanish: CampaignReport,
    train_incr: CampaignReport,
    leg_grow: CampaignReport,
    local_error_purge: CampaignReport,
}

impl Corpus {
    fn reports(&self) -> [&CampaignReport; 6] {
        [
            &self.closure,
            &self.leader_creation,
            &self.marked_vanish,
            &self.train_incr,
            &self.leg_grow,
            &self.local_error_purge,
        ]
    }
}

fn campaign(suite: Suite, graphs: &str, runs: u32, seed0: u64) -> CampaignReport {
    let config = CampaignConfig {
        suite,
        graphs: graphs.split(',').map(|g| g.parse().unwrap()).collect(),
        train_len: BIGN,
        runs,
        seed0,
        max_rounds: None,
        verify_window: None,
    };
    run_campaign(&config).expect("acceptance campaign")
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let start = Instant::now();
        let closure = campaign(Suite::Closure, CAMPAIGN_GRAPHS, 13, 100);
        let closure_elapsed = start.elapsed();
        Corpus {
            closure,
            closure_elapsed,
            leader_creation: campaign(Suite::LeaderCreation, CAMPAIGN_GRAPHS, 25, 300),
            marked_vanish: campaign(Suite::MarkedVanish, CAMPAIGN_GRAPHS, 25, 500),
            train_incr: campaign(Suite::TrainIncr, "ring:10,path:12", 10, 700),
            leg_grow: campaign(
                Suite::LegGrow,
                "ring:5,ring:6,ring:7,ring:8,path:5,path:6,path:7,path:8",
                3,
                900,
            ),
            local_error_purge: campaign(Suite::LocalErrorPurge, CAMPAIGN_GRAPHS, 9, 1100),
        }
    })
}

#[test]
fn acceptance_01_closure() {
    let c = corpus();
    let converged = c.closure.converged();
    let violations = c.closure.total_violations();
    let within_budget = c.closure_elapsed < Duration::from_secs(120);
    verdict(
        1,
        "closure",
        converged >= 50 && violations == 0 && within_budget,
        format!(
            "{converged}/52 converged with 5000-round watch, {violations} violations, {:.1}s",
            c.closure_elapsed.as_secs_f64(),
        ),
    );
}

#[test]
fn acceptance_02_leader_creation_bound() {
    let c = corpus();
    let rows = c.leader_creation.rows.len();
    let violations = c.leader_creation.total_violations();

    // Tightness: leaderless counters parked at value zero overflow into the
    // first leader close to the bound, never past it.
    let p = params();
    let graph = Graph::ring(10).unwrap();
    let spec = FuzzSpec::new(FuzzMode::NearOverflow { deficit: 32 }, 2);
    let initial = generate(&spec, &graph, &p).unwrap();
    struct FirstLeader(Option<u64>);
    impl Observer for FirstLeader {
        fn on_round(
            &mut self,
            config: &Configuration,
            _graph: &Graph,
            _params: &ProtocolParams,
        ) -> Result<Verdict, EngineError> {
            if self.0.is_none() && config.leader_count() > 0 {
                self.0 = Some(config.round);
            }
            Ok(Verdict::Continue)
        }
    }
    let mut first = FirstLeader(None);
    let rng = RandomSource::seeded(2);
    run(initial, &graph, &rng, &p, 60, &mut [&mut first]).unwrap();
    let bound = p.overflow_value() + u64::from(p.train_len());
    let tight = first.0.is_some_and(|r| r > 25 && r < bound);

    verdict(
        2,
        "leader-creation-bound",
        rows == 100 && violations == 0 && tight,
        format!(
            "{rows} leaderless runs saw a leader before round {bound}, {violations} violations, \
             zero-value counters first lead at round {:?}",
            first.0,
        ),
    );
}

#[test]
fn acceptance_03_marked_disappearance() {
    let c = corpus();
    let rows = c.marked_vanish.rows.len();
    let violations = c.marked_vanish.total_violations();
    verdict(
        3,
        "marked-disappearance",
        rows == 100 && violations == 0,
        format!("{rows} forced-zero runs cleared marked wagons before round 45, {violations} violations"),
    );
}

#[test]
fn acceptance_04_train_value_increment() {
    let c = corpus();
    let incr_violations: usize = c
        .reports()
        .iter()
        .flat_map(|r| &r.rows)
        .flat_map(|row| &row.violations)
        .filter(|v| v.kind == "train-incr")
        .count();
    // Every near-overflow run must log at least one qualifying round pair,
    // otherwise the increment property was checked vacuously.
    let vacuous = c
        .train_incr
        .rows
        .iter()
        .filter(|row| {
            row.violations.iter().any(|v| v.kind == "no-qualifying-pair")
                || row.detail == "qpairs0=0,qpairs1=0"
        })
        .count();
    let runs = c.train_incr.rows.len();
    verdict(
        4,
        "train-value-increment",
        incr_violations == 0 && vacuous == 0 && runs == 20,
        format!(
            "{incr_violations} increment violations across all campaign traces, \
             {vacuous}/{runs} vacuous near-overflow runs"
        ),
    );
}

#[test]
fn acceptance_05_leg_grow() {
    let c = corpus();
    let rows = c.leg_grow.rows.len();
    let converged = c
        .leg_grow
        .rows
        .iter()
        .filter(|r| r.outcome == "converged")
        .count();
    let violations = c.leg_grow.total_violations();
    verdict(
        5,
        "leg-grow",
        rows >= 20 && converged == rows && violations == 0,
        format!("{converged}/{rows} scripted emitters grew a rooted legitimate field, {violations} violations"),
    );
}

#[test]
fn acceptance_06_convergence() {
    let p = params();
    let cap = 1_000_000;
    let mut first_legits: Vec<u64> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    let mut total = 0u32;
    for graph_spec in ["ring:8", "path:8", "gnp:8:0.4:7", "complete:6"] {
        let graph = graph_spec.parse::<GraphSpec>().unwrap().build().unwrap();
        for seed in 0..20u64 {
            for init in ["uniform", "all-leaders"] {
                total += 1;
                let seed = 2000 + seed;
                let spec = FuzzSpec::parse(&format!("{init}:{seed}"), seed).unwrap();
                let initial = generate(&spec, &graph, &p).unwrap();
                let rng = RandomSource::seeded(seed);
                let mut detector = ConvergenceDetector::new(0);
                let result = run(initial, &graph, &rng, &p, cap, &mut [&mut detector]).unwrap();
                match result.outcome {
                    RunOutcome::Converged {
                        first_legit_round, ..
                    } => first_legits.push(first_legit_round),
                    RunOutcome::RoundCap => {
                        failures.push(format!("{graph_spec} {init}:{seed}"));
                    }
                }
            }
        }
    }
    first_legits.sort_unstable();
    let converged = first_legits.len() as u32;
    let median = first_legits
        .get((first_legits.len().saturating_sub(1)) / 2)
        .copied()
        .unwrap_or(0);
    let max = first_legits.last().copied().unwrap_or(0);
    let pass = total == 160 && converged * 20 >= total * 19;
    verdict(
        6,
        "convergence",
        pass,
        format!(
            "{converged}/{total} converged under {cap} rounds, median={median}, max={max}{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!(", capped: {}", failures.join(" "))
            }
        ),
    );
}

#[test]
fn acceptance_07_local_error_purge_and_tail_carry() {
    let c = corpus();
    let mut local_errors = 0usize;
    let mut tail_carries = 0usize;
    let mut rows = 0usize;
    for report in c.reports() {
        for row in &report.rows {
            rows += 1;
            for v in &row.violations {
                match v.kind {
                    "local-error" => local_errors += 1,
                    "tail-carry" => tail_carries += 1,
                    _ => {}
                }
            }
        }
    }
    verdict(
        7,
        "local-error-purge-and-tail-carry",
        local_errors == 0 && tail_carries == 0,
        format!("{local_errors} local errors and {tail_carries} tail carries from round 1 across {rows} campaign runs"),
    );
}

#[test]
fn acceptance_08_space_and_randomness() {
    let p = params();
    let width = NodeState::packed_bits(&p);
    let n_len = u32::from(p.train_len());
    let budget_bits = 2 * (n_len.next_power_of_two().trailing_zeros() + 4) + 2;

    struct PackAssert {
        params: ProtocolParams,
        tokens: u64,
        oversized: u64,
    }
    impl Observer for PackAssert {
        fn on_round(
            &mut self,
            config: &Configuration,
            _graph: &Graph,
            _params: &ProtocolParams,
        ) -> Result<Verdict, EngineError> {
            for state in &config.states {
                self.tokens += 1;
                let word = state.pack(&self.params);
                let bits = 64 - word.leading_zeros();
                if bits > NodeState::packed_bits(&self.params)
                    || NodeState::unpack(word, &self.params).ok().as_ref() != Some(state)
                    || parse_node(&format_node(state), &self.params).ok().as_ref() != Some(state)
                {
                    self.oversized += 1;
                }
            }
            Ok(Verdict::Continue)
        }
    }

    let mut tokens = 0;
    let mut oversized = 0;
    let mut bit_accounting_ok = true;
    for (graph_spec, init) in [("ring:8", "uniform:31"), ("complete:6", "all-leaders:32")] {
        let graph = graph_spec.parse::<GraphSpec>().unwrap().build().unwrap();
        let initial = generate(&FuzzSpec::parse(init, 0).unwrap(), &graph, &p).unwrap();
        let rng = RandomSource::seeded(33);
        let mut packs = PackAssert {
            params: p,
            tokens: 0,
            oversized: 0,
        };
        let rounds = 2000;
        let result = run(initial, &graph, &rng, &p, rounds, &mut [&mut packs]).unwrap();
        tokens += packs.tokens;
        oversized += packs.oversized;
        bit_accounting_ok &= result.bits_drawn == 2 * graph.node_count() as u64 * rounds
            && result.bits_drawn == rng.bits_drawn();
    }

    verdict(
        8,
        "space-and-randomness",
        width == 16 && width <= budget_bits && oversized == 0 && bit_accounting_ok,
        format!(
            "state packs into {width} <= {budget_bits} bits on {tokens} tokens ({oversized} over), \
             two random bits per node per round"
        ),
    );
}

// A walk is the carrier path (node, station-kind) paired with the wagons read
// along it.
type Walk = (Vec<(usize, u8)>, Vec<Wagon>);

// Exhaustive train enumeration written against the station-walk definition:
// a train starts at any idx-0 wagon and alternates F -> same-node L ->
// neighbor F with consecutive indices and the head's flag, forking on every
// choice and recording maximal walks.
fn brute_trains(config: &Configuration, graph: &Graph, params: &ProtocolParams) -> Vec<Walk> {
    let station = |v: usize, s: u8| -> Station {
        if s == 0 {
            config.states[v].f
        } else {
            config.states[v].l
        }
    };
    let mut work: Vec<Walk> = Vec::new();
    for v in 0..config.node_count() {
        for s in [0u8, 1u8] {
            if let Some(w) = station(v, s) {
                if w.idx == 0 {
                    work.push((vec![(v, s)], vec![w]));
                }
            }
        }
    }
    let mut done = Vec::new();
    while let Some((walk, wagons)) = work.pop() {
        let &(v, s) = walk.last().unwrap();
        let w = *wagons.last().unwrap();
        let mut nexts: Vec<(usize, u8, Wagon)> = Vec::new();
        if w.idx + 1 < params.train_len() {
            let want = |cand: Station| {
                cand.filter(|c| c.idx == w.idx + 1 && c.flag == wagons[0].flag)
            };
            if s == 0 {
                if let Some(c) = want(station(v, 1)) {
                    nexts.push((v, 1, c));
                }
            } else {
                for &u in graph.neighbors(v) {
                    if let Some(c) = want(station(u, 0)) {
                        nexts.push((u, 0, c));
                    }
                }
            }
        }
        if nexts.is_empty() {
            done.push((walk, wagons));
        } else {
            for (u, k, c) in nexts {
                let mut walk = walk.clone();
                let mut wagons = wagons.clone();
                walk.push((u, k));
                wagons.push(c);
                work.push((walk, wagons));
            }
        }
    }
    done.sort();
    done
}

#[allow(clippy::needless_range_loop)]
fn floyd_warshall(graph: &Graph) -> Vec<Vec<usize>> {
    let n = graph.node_count();
    let far = usize::MAX / 2;
    let mut d = vec![vec![far; n]; n];
    for v in 0..n {
        d[v][v] = 0;
        for &u in graph.neighbors(v) {
            d[v][u] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

// Straight-line legitimacy check: unique leader, singleton layers under
// all-pairs distances, the index relation, and the anchored partial-train
// value law, each written out directly.
#[allow(clippy::needless_range_loop)]
fn oracle_legitimate(
    config: &Configuration,
    graph: &Graph,
    params: &ProtocolParams,
) -> Option<usize> {
    let n = config.node_count();
    let leaders: Vec<usize> = (0..n).filter(|&v| config.states[v].leader).collect();
    if leaders.len() != 1 {
        return None;
    }
    let root = leaders[0];
    let dist = floyd_warshall(graph);
    let ecc = (0..n).map(|u| dist[root][u]).max().unwrap();
    let mut b: Vec<Option<Wagon>> = vec![None; 2 * ecc + 2];
    for u in 0..n {
        let d = dist[root][u];
        for (i, s) in [(2 * d, config.states[u].l), (2 * d + 1, config.states[u].f)] {
            let w = s?;
            match b[i] {
                None => b[i] = Some(w),
                Some(seen) if seen == w => {}
                Some(_) => return None,
            }
        }
    }
    let b: Vec<Wagon> = b.into_iter().map(|w| w.unwrap()).collect();
    let n_len = params.train_len() as usize;
    for (i, w) in b.iter().enumerate() {
        if (w.idx as usize + i) % n_len != b[0].idx as usize {
            return None;
        }
    }
    for k in 0..b.len() {
        let q = b[k].idx as usize;
        let m = k.min(n_len - 1 - q);
        let mut value = 0u64;
        for j in 0..=m {
            let w = b[k - j];
            if w.idx as usize != q + j || w.flag != b[k].flag {
                return None;
            }
            value += u64::from(w.bit + 2 * w.carry) << j;
        }
        if value != (k as u64) >> q {
            return None;
        }
    }
    Some(root)
}

#[test]
fn acceptance_09_oracle_equivalence() {
    let p = params();

    // Train extraction against the walk oracle on small fuzzed graphs.
    let small: Vec<Graph> = [
        "ring:4", "ring:5", "ring:6", "path:4", "path:5", "path:6", "complete:4", "complete:5",
        "gnp:6:0.5:3", "tree:6:1",
    ]
    .iter()
    .map(|g| g.parse::<GraphSpec>().unwrap().build().unwrap())
    .collect();
    let mut train_checks = 0u32;
    let mut train_mismatches = 0u32;
    for (i, graph) in small.iter().enumerate() {
        for seed in 0..20u64 {
            let spec = FuzzSpec::new(FuzzMode::Uniform, 7000 + 100 * i as u64 + seed);
            let config = generate(&spec, graph, &p).unwrap();
            let mut got: Vec<Walk> =
                extract_trains(&config, graph, &p, DEFAULT_EXPANSION_BUDGET)
                    .unwrap()
                    .into_iter()
                    .map(|t| {
                        let carriers = t
                            .carriers
                            .iter()
                            .map(|&(v, kind)| (v, kind as u8))
                            .collect();
                        (carriers, t.wagons)
                    })
                    .collect();
            got.sort();
            train_checks += 1;
            if got != brute_trains(&config, graph, &p) {
                train_mismatches += 1;
            }
        }
    }

    // Legitimacy against the straight-line oracle on converged, perturbed,
    // and raw fuzzed snapshots.
    let mut rng = TestRng(41);
    let mut snapshots: Vec<(Graph, Configuration)> = Vec::new();
    for graph_spec in ["ring:6", "path:7", "gnp:8:0.4:7", "complete:5"] {
        let graph = graph_spec.parse::<GraphSpec>().unwrap().build().unwrap();
        for seed in 0..10u64 {
            let seed = 8000 + seed;
            let spec = FuzzSpec::parse(&format!("all-leaders:{seed}"), seed).unwrap();
            let initial = generate(&spec, &graph, &p).unwrap();
            let source = RandomSource::seeded(seed);
            let mut detector = ConvergenceDetector::new(0);
            let result = run(initial, &graph, &source, &p, 200_000, &mut [&mut detector]).unwrap();
            assert!(
                matches!(result.outcome, RunOutcome::Converged { .. }),
                "snapshot corpus run failed to converge"
            );
            let legit = result.config;

            // A perturbed copy: flip one field of one node.
            let mut bent = legit.clone();
            let v = rng.below(bent.node_count() as u64) as usize;
            match rng.below(3) {
                0 => bent.states[v].leader = !bent.states[v].leader,
                1 => {
                    bent.states[v].l = bent.states[v].l.map(|w| {
                        Wagon::new(w.idx, w.bit ^ 1, w.carry, w.flag)
                    });
                }
                _ => bent.states[v].f = None,
            }
            // A raw fuzzed configuration on the same graph.
            let raw = generate(
                &FuzzSpec::new(FuzzMode::Uniform, 9000 + seed),
                &graph,
                &p,
            )
            .unwrap();

            snapshots.push((graph.clone(), legit));
            snapshots.push((graph.clone(), bent));
            for _ in 0..3 {
                snapshots.push((graph.clone(), raw.clone()));
            }
        }
    }
    let mut legit_checks = 0u32;
    let mut legit_mismatches = 0u32;
    let mut legit_seen = 0u32;
    let mut non_legit_seen = 0u32;
    for (graph, config) in &snapshots {
        legit_checks += 1;
        let lib = is_legitimate(config, graph, &p);
        let oracle = oracle_legitimate(config, graph, &p);
        if lib != oracle {
            legit_mismatches += 1;
        }
        match lib {
            Some(_) => legit_seen += 1,
            None => non_legit_seen += 1,
        }
    }

    verdict(
        9,
        "oracle-equivalence",
        train_checks == 200
            && train_mismatches == 0
            && legit_checks == 200
            && legit_mismatches == 0
            && legit_seen >= 30
            && non_legit_seen >= 30,
        format!(
            "trains {train_checks} configs {train_mismatches} mismatches; \
             legitimacy {legit_checks} snapshots {legit_mismatches} mismatches \
             ({legit_seen} legitimate, {non_legit_seen} not)"
        ),
    );
}

#[test]
fn acceptance_10_tie_break_invariance() {
    let p = params();
    let mut rng = TestRng(17);
    let station = |rng: &mut TestRng| -> Station {
        if rng.below(5) == 0 {
            None
        } else {
            Some(Wagon::new(
                rng.below(u64::from(BIGN)) as u8,
                rng.below(2) as u8,
                rng.below(2) as u8,
                rng.below(2) as u8,
            ))
        }
    };
    let state = |rng: &mut TestRng| -> NodeState {
        let f = station(rng);
        let l = station(rng);
        NodeState::new(rng.below(2) as u8, rng.below(2) == 0, f, l)
    };
    let mut checks = 0u32;
    let mut mismatches = 0u32;
    for _ in 0..10_000 {
        let v = state(&mut rng);
        let mut nbrs: Vec<NodeState> = (0..1 + rng.below(5)).map(|_| state(&mut rng)).collect();
        let pair = BitPair::new(rng.below(2) as u8, rng.below(2) as u8);
        let base = update_state(&v, &nbrs, pair, &p);
        for _ in 0..3 {
            for i in (1..nbrs.len()).rev() {
                nbrs.swap(i, rng.below(i as u64 + 1) as usize);
            }
            checks += 1;
            if update_state(&v, &nbrs, pair, &p) != base {
                mismatches += 1;
            }
        }
    }
    verdict(
        10,
        "tie-break-invariance",
        checks == 30_000 && mismatches == 0,
        format!("{mismatches} order-dependent transitions over {checks} shuffled views"),
    );
}
