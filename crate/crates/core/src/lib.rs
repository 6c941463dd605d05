//! Simulation and verification suite for a self-propelled Cucker-Smale swarm
//! across its full model hierarchy:
//!
//! - [`particles`] -- the N-agent SDE (noisy velocity consensus + self-propulsion)
//!   in a periodic box, with cell-list neighbor search.
//! - [`kinetic`] -- spatially homogeneous velocity-space solver for the
//!   Fokker-Planck collision operator `Q(f)`, with optional self-propulsion.
//! - [`closure`] -- quadrature oracle for the Chapman-Enskog machinery:
//!   closure functions, solvability conditions, pseudo-inverse identities and
//!   the nonlocal kernel expansion.
//! - [`hydro`] -- finite-volume solvers for the isothermal compressible Euler
//!   system with velocity relaxation and its Navier-Stokes correction.
//! - [`soh`] -- the two fast-relaxation limit models: a density diffusion
//!   equation (high noise) and Self-Organized Hydrodynamics (low noise).
//! - [`coeffs`] -- every model parameter and derived coefficient; single
//!   source of truth for the other modules.
//! - [`harness`] -- scenario runner: phase-transition sweeps, limit-convergence
//!   studies, cross-level validation, CSV emission.
//!
//! Grid and particle updates run data-parallel over cells/agents via rayon
//! when the `parallel` feature is enabled (default); a sequential path is
//! always available and produces bit-identical results (see [`exec`]).

pub mod closure;
pub mod coeffs;
pub mod config;
pub mod exec;
pub mod grid;
pub mod harness;
pub mod hydro;
pub mod kinetic;
pub mod particles;
pub mod soh;

pub use coeffs::{DerivedCoefficients, ModelParams};
