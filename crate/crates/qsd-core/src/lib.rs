//! Quantum state discrimination at desk scale: exact collective optima,
//! locally-adaptive measurement strategies (dynamic programming, greedy,
//! min-entropy lookahead), and a from-scratch PPO agent that learns adaptive
//! policies, all over real-valued product states of up to a handful of qubits.

pub mod action;
pub mod collective;
pub mod error;
mod exec;
pub mod local;
pub mod mat;
pub mod qstate;
pub mod rl;

pub use error::{Error, Result};
