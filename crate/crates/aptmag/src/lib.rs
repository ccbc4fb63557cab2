//! Simulation and analysis toolkit for a pair of magnon modes coupled through a
//! lossy microwave cavity.
//!
//! The cavity acts as a dissipative bus: when its decay rate dominates, the two
//! magnons acquire a purely imaginary effective coupling and the reduced two-mode
//! Hamiltonian is anti-PT symmetric. The crate computes steady-state reflection
//! spectra at each probe antenna by input-output theory, performs the adiabatic
//! elimination of the cavity, traces eigenvalue trajectories across the
//! exceptional point as the cavity loss is tuned, and fits measured spectra to
//! recover drive phases and system parameters.
//!
//! Units: all frequencies and rates are plain numbers in MHz, understood as
//! 2pi-MHz angular quantities. Every formula in the crate is homogeneous in
//! frequency, so the 2pi never materializes. Mode frequencies are stored
//! relative to the rotating-frame center (omega1 + omega2)/2; absolute GHz
//! inputs are converted at config ingestion.

pub mod cli;
pub mod effective;
pub mod fit;
pub mod linalg;
pub mod model;
pub mod scattering;
pub mod sweep;

pub use linalg::C64;
pub use model::{BiasField, DynamicalMatrix, ModeParams, SystemParams};
