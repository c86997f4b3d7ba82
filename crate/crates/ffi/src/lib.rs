//! C ABI for embedding the simulator: an opaque simulation handle, integer
//! status codes, and snapshot strings in the trace record format.
//!
//! The committed header lives at `include/railelect.h` and is regenerated
//! with `cargo build -p railelect-ffi --features generate-header`.

use railelect::analysis::{collect_metrics, is_legitimate, DEFAULT_EXPANSION_BUDGET};
use railelect::engine::{step, Configuration, RandomSource};
use railelect::fuzz::{generate, FuzzSpec};
use railelect::graph::{Graph, GraphSpec};
use railelect::trace::{format_config, parse_config};
use railelect::ProtocolParams;
use std::ffi::{c_char, CStr, CString};

/// Result of every fallible call in this ABI. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RailStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    BadGraphSpec = 3,
    BadTrainLen = 4,
    BadInit = 5,
    BadSnapshot = 6,
    NodeCountMismatch = 7,
    AnalysisBudget = 8,
}

/// A running simulation: graph, parameters, round randomness, and the
/// current configuration. Opaque; create with `rail_sim_new`, release with
/// `rail_sim_free`.
pub struct RailSim {
    graph: Graph,
    params: ProtocolParams,
    rng: RandomSource,
    config: Configuration,
}

/// Per-round aggregates. Fields typed `int64_t` use -1 for "absent".
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RailMetrics {
    pub round: u64,
    pub leader_count: u64,
    pub marked_wagon_count: u64,
    pub err_trigger_count: u64,
    /// Minimum value over complete unmarked trains, -1 when there are none.
    pub min_unmarked_train_value: i64,
    /// Minimum value over complete marked trains, -1 when there are none.
    pub min_marked_train_value: i64,
    /// Root of a legitimate configuration, -1 when not legitimate.
    pub legitimate_leader: i64,
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, RailStatus> {
    if ptr.is_null() {
        return Err(RailStatus::NullPointer);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| RailStatus::InvalidUtf8)
}

/// Smallest train length the protocol accepts for a graph with `nodes` nodes.
#[no_mangle]
pub extern "C" fn rail_min_train_len(nodes: usize) -> u8 {
    ProtocolParams::min_len_for_nodes(nodes)
}

/// Creates a simulation and writes the handle to `out`.
///
/// `graph_spec` uses the CLI grammar (`ring:6`, `path:8`, `grid:3x3`,
/// `gnp:8:0.4:7`, ...). `init` uses the init mode grammar (`uniform`,
/// `no-leader-coherent:3`, ...); passing NULL means `uniform`. `seed` feeds
/// both the round randomness and any init mode without its own seed.
///
/// # Safety
/// `out` must be a valid pointer. String arguments must be NUL-terminated
/// or NULL.
#[no_mangle]
pub unsafe extern "C" fn rail_sim_new(
    graph_spec: *const c_char,
    train_len: u8,
    seed: u64,
    init: *const c_char,
    out: *mut *mut RailSim,
) -> RailStatus {
    if out.is_null() {
        return RailStatus::NullPointer;
    }
    *out = std::ptr::null_mut();
    let spec = match read_str(graph_spec) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let graph = match spec.parse::<GraphSpec>().map(|g| g.build()) {
        Ok(Ok(graph)) => graph,
        _ => return RailStatus::BadGraphSpec,
    };
    let params = match ProtocolParams::for_graph(train_len, graph.node_count()) {
        Ok(params) => params,
        Err(_) => return RailStatus::BadTrainLen,
    };
    let init_text = if init.is_null() {
        "uniform"
    } else {
        match read_str(init) {
            Ok(s) => s,
            Err(status) => return status,
        }
    };
    let config = match FuzzSpec::parse(init_text, seed).map(|f| generate(&f, &graph, &params)) {
        Ok(Ok(config)) => config,
        _ => return RailStatus::BadInit,
    };
    let sim = RailSim {
        graph,
        params,
        rng: RandomSource::seeded(seed),
        config,
    };
    *out = Box::into_raw(Box::new(sim));
    RailStatus::Ok
}

/// Releases a handle from `rail_sim_new`. NULL is a no-op.
///
/// # Safety
/// `sim` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rail_sim_free(sim: *mut RailSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances the simulation by `rounds` synchronous rounds.
///
/// # Safety
/// `sim` must be a live handle from `rail_sim_new`.
#[no_mangle]
pub unsafe extern "C" fn rail_sim_advance(sim: *mut RailSim, rounds: u64) -> RailStatus {
    let Some(sim) = sim.as_mut() else {
        return RailStatus::NullPointer;
    };
    for _ in 0..rounds {
        sim.config = step(&sim.config, &sim.graph, &sim.rng, &sim.params);
    }
    RailStatus::Ok
}

/// Advances the simulation by one round.
///
/// # Safety
/// `sim` must be a live handle from `rail_sim_new`.
#[no_mangle]
pub unsafe extern "C" fn rail_sim_step(sim: *mut RailSim) -> RailStatus {
    rail_sim_advance(sim, 1)
}

/// Current round number, 0 for a fresh simulation. Returns 0 on NULL.
///
/// # Safety
/// `sim` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rail_sim_round(sim: *const RailSim) -> u64 {
    sim.as_ref().map_or(0, |s| s.config.round)
}

/// Number of nodes in the simulated graph. Returns 0 on NULL.
///
/// # Safety
/// `sim` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rail_sim_node_count(sim: *const RailSim) -> usize {
    sim.as_ref().map_or(0, |s| s.config.node_count())
}

/// Random bits consumed so far (two per node per round). Returns 0 on NULL.
///
/// # Safety
/// `sim` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rail_sim_bits_drawn(sim: *const RailSim) -> u64 {
    sim.as_ref().map_or(0, |s| s.rng.bits_drawn())
}

/// Root of the current configuration when it is legitimate, else -1.
///
/// # Safety
/// `sim` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rail_sim_legitimate_leader(sim: *const RailSim) -> i64 {
    let Some(sim) = sim.as_ref() else {
        return -1;
    };
    match is_legitimate(&sim.config, &sim.graph, &sim.params) {
        Some(leader) => leader as i64,
        None => -1,
    }
}

/// Fills `out` with aggregates for the current round.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rail_sim_metrics(
    sim: *const RailSim,
    out: *mut RailMetrics,
) -> RailStatus {
    let Some(sim) = sim.as_ref() else {
        return RailStatus::NullPointer;
    };
    if out.is_null() {
        return RailStatus::NullPointer;
    }
    let m = match collect_metrics(&sim.config, &sim.graph, &sim.params, DEFAULT_EXPANSION_BUDGET) {
        Ok(m) => m,
        Err(_) => return RailStatus::AnalysisBudget,
    };
    let opt = |v: Option<u64>| v.map_or(-1, |x| x as i64);
    *out = RailMetrics {
        round: m.round,
        leader_count: m.leader_count as u64,
        marked_wagon_count: m.marked_wagon_count as u64,
        err_trigger_count: m.err_trigger_count as u64,
        min_unmarked_train_value: opt(m.min_unmarked_train_value),
        min_marked_train_value: opt(m.min_marked_train_value),
        legitimate_leader: m.legitimate_leader.map_or(-1, |l| l as i64),
    };
    RailStatus::Ok
}

/// Writes the current configuration as a NUL-terminated trace record to
/// `out`. Free the string with `rail_string_free`.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rail_sim_snapshot(
    sim: *const RailSim,
    out: *mut *mut c_char,
) -> RailStatus {
    let Some(sim) = sim.as_ref() else {
        return RailStatus::NullPointer;
    };
    if out.is_null() {
        return RailStatus::NullPointer;
    }
    let record = format_config(&sim.config);
    match CString::new(record) {
        Ok(s) => {
            *out = s.into_raw();
            RailStatus::Ok
        }
        Err(_) => RailStatus::BadSnapshot,
    }
}

/// Replaces the current configuration with a parsed trace record. The record
/// must describe the same number of nodes as the simulated graph; the round
/// counter is taken from the record.
///
/// # Safety
/// `sim` must be a live handle and `record` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rail_sim_restore(
    sim: *mut RailSim,
    record: *const c_char,
) -> RailStatus {
    let Some(sim) = sim.as_mut() else {
        return RailStatus::NullPointer;
    };
    let text = match read_str(record) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let config = match parse_config(text, &sim.params) {
        Ok(config) => config,
        Err(_) => return RailStatus::BadSnapshot,
    };
    if config.node_count() != sim.graph.node_count() {
        return RailStatus::NodeCountMismatch;
    }
    sim.config = config;
    RailStatus::Ok
}

/// Frees a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `s` must be NULL or a string returned by `rail_sim_snapshot`, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn rail_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Static description of a status code. Never NULL; do not free.
#[no_mangle]
pub extern "C" fn rail_status_message(status: RailStatus) -> *const c_char {
    let text: &'static [u8] = match status {
        RailStatus::Ok => b"ok\0",
        RailStatus::NullPointer => b"null pointer argument\0",
        RailStatus::InvalidUtf8 => b"string argument is not valid utf-8\0",
        RailStatus::BadGraphSpec => b"unparseable graph spec\0",
        RailStatus::BadTrainLen => b"train length out of range for this graph\0",
        RailStatus::BadInit => b"unparseable or infeasible init mode\0",
        RailStatus::BadSnapshot => b"malformed configuration record\0",
        RailStatus::NodeCountMismatch => b"record node count does not match the graph\0",
        RailStatus::AnalysisBudget => b"train expansion budget exceeded\0",
    };
    text.as_ptr() as *const c_char
}
