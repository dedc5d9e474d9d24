//! Exact simulation and analysis of the stacked contact process.
//!
//! The stacked contact process is a three-state interacting particle system on
//! a finite torus: each vertex is empty (`0`), occupied by a healthy host (`1`)
//! or occupied by an infected host (`2`). Hosts die at rate one and give birth
//! onto empty neighbors; the infection spreads vertically (offspring inherit the
//! parent's type) and horizontally (infected hosts infect healthy neighbors),
//! and infected hosts recover at rate `delta`.
//!
//! Everything here is driven by a state-independent [`events::EventStream`]
//! (the graphical representation), so several processes can be replayed from
//! one source of randomness and compared event by event.

pub mod coupling;
pub mod error;
pub mod eventlog;
pub mod events;
pub mod estimate;
pub mod lattice;
pub mod meanfield;
pub mod par;
pub mod raster;
pub mod renorm;
pub mod rng;

pub use error::{Error, Result};
pub use events::{Event, EventKind, EventStream, Trajectory};
pub use lattice::{BoxPartition, Configuration, ParamSet, State, Torus};
