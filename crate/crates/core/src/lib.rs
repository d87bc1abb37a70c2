//! Solvers for two-player zero-sum repeated games with incomplete
//! information on both sides, where each player's private state follows an
//! independent finite Markov chain.

pub mod error;
pub mod game;
pub mod grid;
pub mod linalg;
pub mod lp;
pub mod markov;
pub mod minimax;
pub mod mz;
pub mod nonrevealing;
pub mod simulator;
pub mod table;
pub mod transport;
pub mod value_iteration;

pub use error::{Error, Result};
