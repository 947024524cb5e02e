//! State-vector emulator for a quantum time-marching solver of the
//! advection-diffusion equation.
//!
//! The pipeline mirrors how the algorithm would run on hardware:
//!
//! 1. [`stencil`] assembles the explicit one-step matrix A (and runs it
//!    directly as the classical reference).
//! 2. [`blockenc`] rescales A to unit diagonal, splits off the shift part,
//!    and embeds the remainder in a Hermitian dilation whose exponential is
//!    applied matrix-free.
//! 3. [`lcu`] recombines the pieces as a linear combination of unitaries
//!    with a prepare/select/unprepare circuit acting on an explicit ancilla
//!    register, tracking the per-step success probability.
//! 4. [`boundary`] reduces reflecting walls to the periodic case by mirror
//!    extension.
//! 5. [`scenarios`] wires full experiments together; [`verify`] cross-checks
//!    the fast paths against dense linear-algebra oracles.

pub mod blockenc;
pub mod boundary;
pub mod error;
pub mod lattice;
pub mod lcu;
pub mod scenarios;
pub mod stencil;
pub mod verify;

pub use error::{Error, Result};
