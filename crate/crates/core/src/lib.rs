//! Self-accelerating Airy wavepackets on a one-dimensional tight-binding
//! lattice: initial states, exact and Crank–Nicolson propagators, peak
//! tracking, relativistic trajectory fits and the experiment harness.

pub mod diagnostics;
pub mod error;
pub mod fitting;
pub mod harness;
pub mod lattice;
pub mod propagate;
pub mod special;
pub mod states;

pub use error::{Error, Result};
pub use lattice::{LatticeGrid, WaveState};
