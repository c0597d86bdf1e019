//! Two-dimensional shallow-water simulator on a uniform rectangular grid.
//!
//! Conserved variables are the surface elevation `ξ` and the depth-integrated
//! velocity `q = (U, V)`. Interface fluxes are Rusanov (local Lax–Friedrichs)
//! on hydrostatically reconstructed states. Each step is Strang-split into
//! x/y sweeps advanced with two-stage SSP Runge–Kutta, so the per-direction
//! Courant number bounds stability. Bottom friction and Coriolis follow as a
//! pointwise implicit update.

mod basin;
mod config;
pub mod csf;
mod forcing;
mod solver;
mod state;

pub use basin::{BasinKind, BasinSpec, InitialCondition};
pub use config::{BoundaryKind, BoundaryLayout, Constituent, SimConfig};
pub use forcing::{bottom_friction_coeff, default_constituents, tidal_elevation};
pub use solver::{courant_number, run, run_with, step, total_mass, RunSummary};
pub use state::SimState;
