//! Kinetic formulation of one-dimensional scalar conservation laws.
//!
//! A solution `u(t, x) ∈ [0, 1]` is represented by its kinetic density
//! `Y(t, x, v) = 1{v ≥ u(t, x)}`, which evolves by free transport in `x`
//! with velocity `f'(v)` and is kept inside the cone of functions
//! non-decreasing in `v`.

pub mod cone;
pub mod config;
pub mod error;
pub mod experiments;
pub mod flux;
pub mod kinetic;
pub mod reference;
pub mod report;
pub mod solver;
pub mod transport;

pub use cone::{interaction_field, project_monotone, FlatTolerance, InteractionProfile};
pub use error::{Error, Result};
pub use flux::{FluxKind, FluxModel};
pub use kinetic::{extract_level, lift_function, lift_measure, mollify_x, Atom, Grid, KineticField, MollifierKernel};
pub use solver::{evolve, step, EvolveOptions, OutputTimes, Trajectory};
pub use transport::TransportOperator;
