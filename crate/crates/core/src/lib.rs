//! Simulation and estimation toolkit for thin-film superfluid cavity
//! optomechanics.
//!
//! Internal units are SI with angular frequencies in rad/s. Anything named
//! `*_hz` is an ordinary frequency (rad/s divided by 2π).

// `!(x > 0.0)` also rejects NaN, which is the point of writing it that way.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backaction;
pub mod bath;
pub mod config;
pub mod dsp;
pub mod error;
pub mod lsq;
pub mod model;
pub mod scenarios;
pub mod sim;
pub mod spectral;
pub mod tracker;

pub use config::Config;
pub use error::{Error, FitError, Result};
pub use model::{
    intracavity_amplitude, zero_point_motion, DriveField, MechanicalMode, OpticalCavity, PhotothermalCoupling,
    PhysicalConstants, SystemParams, CONSTANTS, HBAR, K_B,
};
pub use sim::{simulate, SimConfig, SimMode, SimTrace, Simulator};
pub use spectral::{Psd, SpectrumFit};
pub use tracker::{PhaseSpaceTrack, WienerFilter};
