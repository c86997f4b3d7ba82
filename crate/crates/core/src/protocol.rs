//! Per-node state and the round transition rules.
//!
//! Every node carries two wagon stations: `F` (front, older) and `L` (last,
//! newer). Wagons hold a position index inside a train plus one binary-counter
//! digit (bit and carry) and a marked flag. Each synchronous round a node
//! either emits wagons (leaders), forwards wagons pulled from a successor
//! (followers), or resets itself to a fresh leader when its local view is
//! inconsistent.
//!
//! All rules read a node's own state plus an unordered multiset of neighbor
//! states. Nothing here identifies neighbors: the outcome is invariant under
//! permutation of the neighbor slice.

use crate::params::ProtocolParams;
use thiserror::Error;

/// One train wagon. `idx` is the position inside a complete train (0 is the
/// head), `bit`/`carry` hold one digit of the train's counter value, `flag`
/// marks wagons of elimination trains. All of `bit`, `carry`, `flag` are 0/1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Wagon {
    pub idx: u8,
    pub bit: u8,
    pub carry: u8,
    pub flag: u8,
}

impl Wagon {
    pub fn new(idx: u8, bit: u8, carry: u8, flag: u8) -> Self {
        debug_assert!(bit <= 1 && carry <= 1 && flag <= 1);
        Wagon {
            idx,
            bit,
            carry,
            flag,
        }
    }

    /// Digit value carried by this wagon, `bit + 2 * carry`.
    pub fn digit(&self) -> u64 {
        (self.bit + 2 * self.carry) as u64
    }

    pub fn validate(&self, params: &ProtocolParams) -> Result<(), StateError> {
        if self.idx >= params.train_len() {
            return Err(StateError::IdxOutOfRange {
                idx: self.idx,
                train_len: params.train_len(),
            });
        }
        for (field, value) in [
            ("bit", self.bit),
            ("carry", self.carry),
            ("flag", self.flag),
        ] {
            if value > 1 {
                return Err(StateError::NotABit { field, value });
            }
        }
        Ok(())
    }
}

/// A wagon slot. Empty stations are how trains end and how elimination
/// consumes wagons.
pub type Station = Option<Wagon>;

/// Full per-node protocol state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeState {
    /// Survivor of the node's recent coin flips; decides whether the next
    /// emitted train head is marked.
    pub rand: u8,
    pub leader: bool,
    /// Front station, holds the older of the node's two wagons.
    pub f: Station,
    /// Last station, holds the newer wagon.
    pub l: Station,
}

impl NodeState {
    pub fn new(rand: u8, leader: bool, f: Station, l: Station) -> Self {
        debug_assert!(rand <= 1);
        NodeState { rand, leader, f, l }
    }

    pub fn validate(&self, params: &ProtocolParams) -> Result<(), StateError> {
        if self.rand > 1 {
            return Err(StateError::NotABit {
                field: "rand",
                value: self.rand,
            });
        }
        if let Some(w) = self.f {
            w.validate(params)?;
        }
        if let Some(w) = self.l {
            w.validate(params)?;
        }
        Ok(())
    }

    /// Width of the canonical packed encoding:
    /// `2 * (ceil(log2 train_len) + 4) + 2` bits.
    pub fn packed_bits(params: &ProtocolParams) -> u32 {
        2 * (params.idx_bits() + 4) + 2
    }

    /// Packs the state into the low [`NodeState::packed_bits`] bits of a word.
    pub fn pack(&self, params: &ProtocolParams) -> u64 {
        fn pack_station(s: &Station, idx_bits: u32) -> u64 {
            match s {
                None => 0,
                Some(w) => {
                    1 | (w.idx as u64) << 1
                        | (w.bit as u64) << (1 + idx_bits)
                        | (w.carry as u64) << (2 + idx_bits)
                        | (w.flag as u64) << (3 + idx_bits)
                }
            }
        }
        let idx_bits = params.idx_bits();
        let station_bits = idx_bits + 4;
        self.rand as u64
            | (self.leader as u64) << 1
            | pack_station(&self.f, idx_bits) << 2
            | pack_station(&self.l, idx_bits) << (2 + station_bits)
    }

    /// Inverse of [`NodeState::pack`]. Rejects non-canonical words so that
    /// pack and unpack are bijective on their shared range.
    pub fn unpack(word: u64, params: &ProtocolParams) -> Result<Self, StateError> {
        fn unpack_station(
            field: u64,
            idx_bits: u32,
            params: &ProtocolParams,
        ) -> Result<Station, StateError> {
            if field & 1 == 0 {
                if field != 0 {
                    return Err(StateError::DirtyPadding);
                }
                return Ok(None);
            }
            let w = Wagon {
                idx: ((field >> 1) & ((1 << idx_bits) - 1)) as u8,
                bit: ((field >> (1 + idx_bits)) & 1) as u8,
                carry: ((field >> (2 + idx_bits)) & 1) as u8,
                flag: ((field >> (3 + idx_bits)) & 1) as u8,
            };
            w.validate(params)?;
            Ok(Some(w))
        }
        let idx_bits = params.idx_bits();
        let station_bits = idx_bits + 4;
        let total_bits = Self::packed_bits(params);
        if total_bits < 64 && word >> total_bits != 0 {
            return Err(StateError::DirtyPadding);
        }
        let mask = (1u64 << station_bits) - 1;
        Ok(NodeState {
            rand: (word & 1) as u8,
            leader: word >> 1 & 1 == 1,
            f: unpack_station(word >> 2 & mask, idx_bits, params)?,
            l: unpack_station(word >> (2 + station_bits) & mask, idx_bits, params)?,
        })
    }
}

/// Two fresh fair coin flips. The protocol only ever uses their conjunction,
/// a Bernoulli(1/4) event, but both raw bits are drawn every round so the
/// randomness consumption of a run is fixed at two bits per node per round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitPair {
    pub first: u8,
    pub second: u8,
}

impl BitPair {
    pub const ZERO: BitPair = BitPair {
        first: 0,
        second: 0,
    };
    pub const ONE: BitPair = BitPair {
        first: 1,
        second: 1,
    };

    pub fn new(first: u8, second: u8) -> Self {
        debug_assert!(first <= 1 && second <= 1);
        BitPair { first, second }
    }

    /// The conjunction of the two flips.
    pub fn x(&self) -> u8 {
        self.first & self.second
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StateError {
    #[error("wagon idx {idx} out of range for train length {train_len}")]
    IdxOutOfRange { idx: u8, train_len: u8 },
    #[error("{field} must be 0 or 1, got {value}")]
    NotABit { field: &'static str, value: u8 },
    #[error("packed state has nonzero padding bits")]
    DirtyPadding,
}

/// True when the wagon `v` must pull next belongs to a marked train: either
/// `v`'s own L wagon is marked and not a train tail, or some neighbor fronts
/// a marked train head.
pub fn succ_is_marked(v: &NodeState, nbrs: &[NodeState], params: &ProtocolParams) -> bool {
    let own = v
        .l
        .is_some_and(|l| l.flag == 1 && l.idx != params.last_idx());
    own || nbrs
        .iter()
        .any(|u| u.f.is_some_and(|f| f.flag == 1 && f.idx == 0))
}

/// Positions (into `nbrs`) of the neighbors `v` may pull its next wagon from.
///
/// With `marked` set, candidates front marked wagons: the continuation of
/// `v`'s own marked train, or a marked head when `v`'s train is unmarked (the
/// collision that eliminates `v`'s train). Without it, candidates front the
/// unmarked wagon whose index follows `v`'s L wagon.
pub fn succ_indices(
    v: &NodeState,
    nbrs: &[NodeState],
    marked: bool,
    params: &ProtocolParams,
) -> Vec<usize> {
    let Some(l) = v.l else {
        return Vec::new();
    };
    let next = params.next_idx(l.idx);
    nbrs.iter()
        .enumerate()
        .filter(|(_, u)| {
            u.f.is_some_and(|f| {
                if marked {
                    f.flag == 1 && ((l.flag == 1 && f.idx == next) || (l.flag == 0 && f.idx == 0))
                } else {
                    f.flag == 0 && f.idx == next
                }
            })
        })
        .map(|(i, _)| i)
        .collect()
}

/// Moves `source` into the slot currently holding `target`, adding one
/// counter digit. A head wagon (idx 0) absorbs the +1 of the increment; any
/// other wagon absorbs the carry left behind in the slot.
///
/// The result always satisfies `bit + 2*carry = source.bit + increment`, so
/// exactly one unit enters the train per visit to the head.
pub fn add_into(target: Station, source: Wagon) -> Wagon {
    let inc = if source.idx == 0 {
        1
    } else {
        target.map_or(0, |t| t.carry)
    };
    let sum = source.bit + inc;
    Wagon {
        idx: source.idx,
        bit: sum % 2,
        carry: sum / 2,
        flag: source.flag,
    }
}

/// Follower station update: shift L into F (or consume it, when a marked
/// train is about to arrive and the local train is unmarked), then pull the
/// successor wagon into L.
///
/// Callers must rule out [`err`] first: it guarantees the L station is loaded
/// and a successor exists.
pub fn wagon_update(v: &NodeState, nbrs: &[NodeState], params: &ProtocolParams) -> (Station, Station) {
    let l = v.l.expect("wagon_update needs a loaded L station");
    let marked = succ_is_marked(v, nbrs, params);
    let new_f = if !marked || l.flag == 1 || l.idx == params.last_idx() {
        Some(add_into(v.f, l))
    } else {
        None
    };
    let succ = succ_indices(v, nbrs, marked, params);
    let mut best: Option<Wagon> = None;
    for &i in &succ {
        let f = nbrs[i].f.expect("successor candidates front a wagon");
        if best.is_none_or(|b| f.bit > b.bit) {
            best = Some(f);
        }
    }
    let pulled = best.expect("a successor exists when err is false");
    (new_f, Some(add_into(v.l, pulled)))
}

/// Inconsistencies a node can spot in its own two stations: missing L wagon,
/// non-consecutive indices, flag mismatch inside a train, or a carry parked
/// on a tail wagon (a tail carry would mean the counter overflowed).
pub fn local_error(v: &NodeState, params: &ProtocolParams) -> bool {
    let Some(l) = v.l else {
        return true;
    };
    if let Some(f) = v.f {
        if l.idx != params.next_idx(f.idx) {
            return true;
        }
        if l.idx != 0 && l.flag != f.flag {
            return true;
        }
        if f.idx == params.last_idx() && f.carry == 1 {
            return true;
        }
    }
    l.idx == params.last_idx() && l.carry == 1
}

/// Inconsistencies visible only against the neighborhood: no valid successor
/// to pull from, or a counter about to overflow (a carry on the next-to-last
/// wagon meeting an incoming 1 bit).
pub fn global_error(v: &NodeState, nbrs: &[NodeState], params: &ProtocolParams) -> bool {
    let Some(l) = v.l else {
        return false;
    };
    let marked = succ_is_marked(v, nbrs, params);
    let succ = succ_indices(v, nbrs, marked, params);
    let Some(max_bit) = succ
        .iter()
        .map(|&i| nbrs[i].f.expect("successor candidates front a wagon").bit)
        .max()
    else {
        return true;
    };
    let last = params.last_idx();
    let overflow_l = l.idx + 1 == last && l.carry == 1 && max_bit == 1 && (l.flag == 1) == marked;
    let overflow_f = v
        .f
        .is_some_and(|f| f.idx + 1 == last && f.carry == 1 && l.bit == 1);
    overflow_l || overflow_f
}

/// Error reset trigger. Leaders never take it; their station layout is
/// re-established by emission.
pub fn err(v: &NodeState, nbrs: &[NodeState], params: &ProtocolParams) -> bool {
    !v.leader && (local_error(v, params) || global_error(v, nbrs, params))
}

/// True when a marked train head has reached `v` while `v`'s own train is
/// unmarked. A leader in this situation loses its leadership.
pub fn is_eliminated(v: &NodeState, nbrs: &[NodeState]) -> bool {
    v.l.is_some_and(|l| l.flag == 0)
        && nbrs
            .iter()
            .any(|u| u.f.is_some_and(|f| f.flag == 1 && f.idx == 0))
}

/// Fresh leader state: one unmarked train of value 1 already underway.
pub fn new_leader(x: BitPair) -> NodeState {
    NodeState {
        rand: x.x(),
        leader: true,
        f: Some(Wagon::new(0, 1, 0, 0)),
        l: Some(Wagon::new(1, 0, 0, 0)),
    }
}

/// Leader station update: shift L into F and emit the next wagon. When the
/// running train is complete, a new head goes out, marked iff every coin
/// flip of the finished emission cycle came up 1.
pub fn wagon_creation(v: &NodeState, x: BitPair, params: &ProtocolParams) -> NodeState {
    let Some(l) = v.l else {
        // A leader whose L station was wiped by the adversary restarts its
        // emission cycle from a fresh head.
        return NodeState {
            rand: x.x(),
            leader: true,
            f: None,
            l: Some(Wagon::new(0, 0, 0, v.rand)),
        };
    };
    let f = Some(add_into(v.f, l));
    if l.idx == params.last_idx() {
        NodeState {
            rand: x.x(),
            leader: true,
            f,
            l: Some(Wagon::new(0, 0, 0, v.rand)),
        }
    } else {
        NodeState {
            rand: v.rand & x.x(),
            leader: true,
            f,
            l: Some(Wagon::new(l.idx + 1, 0, 0, l.flag)),
        }
    }
}

/// One full node transition: error reset, else elimination check, then
/// emission (leaders) or forwarding (followers).
pub fn update_state(
    v: &NodeState,
    nbrs: &[NodeState],
    x: BitPair,
    params: &ProtocolParams,
) -> NodeState {
    if err(v, nbrs, params) {
        return new_leader(x);
    }
    if v.leader && !is_eliminated(v, nbrs) {
        wagon_creation(v, x, params)
    } else {
        let (f, l) = wagon_update(v, nbrs, params);
        NodeState {
            rand: v.rand,
            leader: false,
            f,
            l,
        }
    }
}
