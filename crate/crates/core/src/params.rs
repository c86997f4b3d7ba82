//! Protocol sizing parameters.

use thiserror::Error;

/// Smallest train length the protocol rules are defined for.
pub const MIN_TRAIN_LEN: u8 = 5;

/// Largest train length this implementation supports. Keeps wagon indices in
/// a `u8` and train values comfortably inside a `u64`.
pub const MAX_TRAIN_LEN: u8 = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamsError {
    #[error("train length {0} is below the minimum of {MIN_TRAIN_LEN}")]
    TooShort(u8),
    #[error("train length {0} exceeds the supported maximum of {MAX_TRAIN_LEN}")]
    TooLong(u8),
    #[error("train length {got} is too short for {nodes} nodes (need at least {need})")]
    TooShortForGraph { got: u8, nodes: usize, need: u8 },
}

/// Global protocol parameters shared by every node.
///
/// `train_len` is the number of wagons in a complete train and also the bit
/// width of the distributed counter the trains implement. Correctness of
/// leader elimination additionally needs `train_len >= 1 + ceil(log2 n)` on a
/// graph with `n` nodes; [`ProtocolParams::for_graph`] enforces that bound,
/// [`ProtocolParams::new`] only the unconditional ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolParams {
    train_len: u8,
}

impl ProtocolParams {
    pub fn new(train_len: u8) -> Result<Self, ParamsError> {
        if train_len < MIN_TRAIN_LEN {
            return Err(ParamsError::TooShort(train_len));
        }
        if train_len > MAX_TRAIN_LEN {
            return Err(ParamsError::TooLong(train_len));
        }
        Ok(ProtocolParams { train_len })
    }

    /// Validates `train_len` against the size of the graph the protocol will
    /// run on.
    pub fn for_graph(train_len: u8, nodes: usize) -> Result<Self, ParamsError> {
        let params = Self::new(train_len)?;
        let need = Self::min_len_for_nodes(nodes);
        if train_len < need {
            return Err(ParamsError::TooShortForGraph {
                got: train_len,
                nodes,
                need,
            });
        }
        Ok(params)
    }

    /// Smallest train length that is in-regime for `nodes` nodes:
    /// `max(5, 1 + ceil(log2 nodes))`.
    pub fn min_len_for_nodes(nodes: usize) -> u8 {
        let log = usize::BITS - nodes.next_power_of_two().leading_zeros() - 1;
        let need = 1 + log as u8;
        need.max(MIN_TRAIN_LEN)
    }

    pub fn train_len(&self) -> u8 {
        self.train_len
    }

    /// Index of the last wagon of a train, `train_len - 1`.
    pub fn last_idx(&self) -> u8 {
        self.train_len - 1
    }

    /// Counter value at which a complete train overflows, `2^train_len`.
    pub fn overflow_value(&self) -> u64 {
        1u64 << self.train_len
    }

    /// Bits needed to store a wagon index, `ceil(log2 train_len)`.
    pub fn idx_bits(&self) -> u32 {
        u8::BITS - (self.train_len - 1).leading_zeros()
    }

    /// Cyclic successor of a wagon index.
    pub fn next_idx(&self, idx: u8) -> u8 {
        if idx + 1 == self.train_len {
            0
        } else {
            idx + 1
        }
    }
}
