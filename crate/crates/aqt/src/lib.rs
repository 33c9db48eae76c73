//! Discrete-round simulator and algorithm library for adversarial packet
//! injection on paths and directed trees.
//!
//! The model: a network of unit-capacity buffers arranged on a line (with an
//! absorbing sink) or a tree with all edges directed toward the root. An
//! adversary injects packets subject to a rate/burst constraint, and a
//! centralized scheduler decides each round which (pseudo-)buffers forward.
//! The library provides
//!
//! * the network model and its precedence order ([`topology`]),
//! * injection patterns, boundedness validation, excess computation, and a
//!   worst-case adversary construction ([`adversary`], [`lower_bound`]),
//! * the round-synchronous simulation engine ([`engine`]),
//! * the forwarding algorithms: peak-to-sink and its parallel, hierarchical,
//!   and tree variants, plus greedy and brute-force baselines ([`schedulers`]),
//! * badness/excess accounting and runtime invariant checkers ([`metrics`],
//!   [`stale`]),
//! * a CLI and experiment harness ([`harness`]).
//!
//! See the `examples/` directory for runnable walkthroughs of each capability.

pub mod adversary;
pub mod engine;
pub mod harness;
pub mod lower_bound;
pub mod metrics;
pub mod rational;
pub mod schedulers;
pub mod stale;
pub mod topology;
pub mod trace;

pub use adversary::{InjectionPattern, Packet};
pub use engine::{Configuration, PseudoBufferKey};
pub use rational::Rational;
pub use topology::{NodeId, Topology};

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum AqtError {
    #[error("no path from {from} to {to}")]
    NoPath { from: NodeId, to: NodeId },
    #[error("invalid reduction factor {0} (must be >= 1)")]
    InvalidEll(u64),
    #[error("round {0} out of range")]
    OutOfRange(u64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("infeasible activation: node {0} activated twice")]
    InfeasibleActivation(NodeId),
    #[error("edge capacity violated at node {0}")]
    CapacityViolation(NodeId),
    #[error("checker {checker} failed at round {round}: {detail}")]
    CheckerFailure {
        checker: String,
        round: u32,
        detail: String,
    },
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AqtError>;
