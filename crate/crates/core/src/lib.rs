//! Simulation and analysis of the flux-coupled Chialvo neuron map.
//!
//! The crate covers single-neuron analysis (fixed points, Lyapunov spectra,
//! bifurcation sweeps, continuation, critical curves, basins) and ring-star
//! networks of coupled neurons. Every long computation is a pure function of
//! its inputs; data-parallel loops go through [`par::Exec`] and produce the
//! same bits regardless of worker count.

pub mod basins;
pub mod cli;
pub mod continuation;
pub mod error;
pub mod fixed_points;
pub mod lyapunov;
pub mod map;
pub mod network;
pub mod noninvertibility;
pub mod orbit;
pub mod par;
pub mod sweep;

pub use error::{Error, Result};
pub use map::{MapParams, Param, State, State2};
