//! Random-reshuffling Nash equilibrium seeking for finite-sum games.
//!
//! Each player `i` owns a scalar action in a box and a cost that is the
//! average of `m` component functions. The crate provides
//!
//! * the game objects and the two benchmark games (EV charging, edge
//!   resource admission) in [`game`],
//! * communication graphs, Metropolis mixing and the augmented consensus
//!   matrix `H = L (x) I + Delta` in [`network`],
//! * per-player permutation streams and step-size schedules in
//!   [`sampling`] and [`schedule`],
//! * the full- and partial-information solvers (random reshuffling and
//!   with-replacement SGD) in [`dynamics`],
//! * equilibrium oracles, reference trajectories, shuffling variance and
//!   closed-form convergence bounds in [`analysis`],
//! * the multi-seed experiment harness behind the `rrnash` binary in
//!   [`harness`].

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod harness;
pub mod linalg;
pub mod network;
pub mod sampling;
pub mod schedule;

pub use error::Error;
pub use game::{ActionBox, ActionProfile, GameConstants, GameKind, GameSpec};
