//! Stability analysis for controlled branching queueing networks.
//!
//! A network is decided stabilizable by the traffic LP; a static randomized
//! scheduler is synthesized from its optimum, certified with a piecewise-linear
//! Lyapunov function, and cross-checked by simulation and by a truncated-chain
//! stationary solver.

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod lyapunov;
pub mod network;
pub mod oracle;
pub mod scalar;
pub mod sim;
pub mod simplex;
pub mod traffic;
pub mod traffic_lp;
