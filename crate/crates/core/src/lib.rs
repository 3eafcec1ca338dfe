//! Secure-key-rate simulator for point-to-point BB84, MDI-QKD and
//! memory-assisted MDI-QKD over optical fiber.
//!
//! The central node of the memory-assisted protocol is modeled as two
//! defect-cavity spin-photon interfaces behind a toggling optical switch.
//! Each interface writes time-bin photons into an electron spin and performs
//! an asynchronous Bell state measurement by loading two photons in sequence.
//!
//! Layout:
//! - [`device_model`]: cavity enhancement, cooperativity and cavity response.
//! - [`spin_photon`]: exact spin ⊗ time-bin state vector and memory decoherence.
//! - [`channel`]: fiber, detector and passive-component link budget.
//! - [`params`]: the full device/link parameter record with its defaults.
//! - [`protocols`]: analytic asymptotic key rates, regions and crossovers.
//! - [`montecarlo`]: discrete-event simulation of the two-device node.
//! - [`config`] and [`cli`]: config files, sweeps and output files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod config;
pub mod device_model;
pub mod error;
pub mod montecarlo;
pub mod params;
pub mod protocols;
pub mod spin_photon;

pub use error::{Error, Result};
pub use params::{DeviceParams, LinkConfig, ProtocolConfig};
pub use protocols::{Protocol, RateCurve, RatePoint, Region};
