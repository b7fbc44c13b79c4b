//! Solver for exploiter/exploitee dynamic games on finite grids.
//!
//! The crate computes Markov–Stackelberg equilibria (the exploiter leads, the
//! exploitee responds to each extraction level), enumerates and certifies pure
//! stationary equilibria on small models, and refines them to a sustainable
//! exploitation equilibrium: viable play, renegotiation-proofness against other viable
//! equilibria and exploiter-optimal selection. A catastrophe penalty on leaving the
//! viability set, with a searched threshold, ties viability to the exploiter's own
//! incentives. The [`hc`] module instantiates a hegemon/client model and checks its
//! first-order conditions and steady-state regimes.

pub mod error;
pub mod fixtures;
pub mod game;
pub mod hc;
pub mod cli;
pub mod hierarchy;
pub mod io;
pub mod mse;
pub mod refine;

pub use error::{Error, Result};
