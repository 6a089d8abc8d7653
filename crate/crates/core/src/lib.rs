//! Floquet stability of synchronized oscillations in networks of coupled
//! strongly nonlinear oscillators, with the cyclic three-species competitive
//! Lotka-Volterra system as the reference model.
//!
//! The crate covers the full pipeline:
//!
//! - [`ode`]: adaptive Runge-Kutta integration with dense output and events,
//! - [`models`]: the Lotka-Volterra vector fields, fixed points, and the
//!   (alpha, gamma) parameter-region classification,
//! - [`orbit`]: limit-cycle location with Poincare sections and Newton
//!   shooting, plus a text export format,
//! - [`floquet`]: monodromy matrices and Floquet multipliers of the
//!   variational system for a complex stability parameter,
//! - [`spectral`]: structural and spectral analysis of zero-row-sum coupling
//!   matrices, the eigenbasis reduction of networks, and operator symbols,
//! - [`msf`]: master-stability-function sweeps over the complex plane,
//!   per-ray instability intervals, and the small-parameter expansion of the
//!   leading multiplier,
//! - [`netsim`]: direct nonlinear simulation of coupled networks with
//!   synchronization diagnostics and spectral frequency extraction,
//! - [`cli`]: configuration and command runners behind the `floquet-msf`
//!   binary.

pub mod cli;
mod cubic;
pub mod floquet;
pub mod models;
pub mod msf;
pub mod netsim;
pub mod ode;
pub mod orbit;
pub mod spectral;

pub use models::{GeneralLV3Params, LVParams, ModelSpec, Region, RegionVerdict};
pub use ode::{IntegratorConfig, Trajectory};
