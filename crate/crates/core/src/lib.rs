//! Self-stabilizing leader election on anonymous graphs.
//!
//! Nodes hold two wagon stations and circulate "trains" of wagons that
//! implement a distributed binary counter. Leaders emit trains, counter
//! overflow and train collisions demote or eliminate leaders, and from any
//! starting configuration the system converges to a single leader with a
//! coherent train layout around it.
//!
//! The crate is split into the protocol rules ([`protocol`]), a synchronous
//! round engine ([`engine`]), graph construction ([`graph`]), configuration
//! analysis ([`analysis`]), adversarial initial-state generation ([`fuzz`]),
//! trace serialization ([`trace`]), and batch experiment drivers
//! ([`campaign`]).

pub mod analysis;
pub mod campaign;
pub mod engine;
pub mod fuzz;
pub mod graph;
pub mod params;
pub mod protocol;
pub(crate) mod rng;
pub mod trace;

pub use params::ProtocolParams;
pub use protocol::{NodeState, Station, Wagon};
