//! Simulation and analysis of saturated absorption of metastable xenon
//! (6s[3/2]₂ → 6p[3/2]₂, 823 nm) inside a high-finesse Fabry–Pérot cavity.
//!
//! The crate is organised bottom-up:
//!
//! * [`catalog`] – isotope / hyperfine line catalog and its JSON file format.
//! * [`lineshape`] – Doppler and collisional widths, the Voigt profile and
//!   per-line absorption cross-sections.
//! * [`medium`] – the saturable absorption coefficient α(ν, I) under three
//!   saturation models.
//! * [`cavity`] – cavity figures of merit, the Airy function and the
//!   self-consistent steady state with an intracavity saturable absorber.
//! * [`protocol`] – the dual-power lock-and-probe measurement and the
//!   temperature-tuned resonance scan.
//! * [`toolkit`] – trace I/O, run configuration and line fitting.
//!
//! Frequencies follow one convention throughout: absolute frequencies are in
//! THz, while detunings and catalog offsets are in MHz relative to the
//! catalog reference frequency.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod cavity;
pub mod constants;
mod error;
pub mod lineshape;
pub mod medium;
pub mod protocol;
pub mod rng;
pub mod toolkit;

pub use catalog::{HalfInt, HyperfineLine, IsotopeSpecies, LineCatalog};
pub use cavity::{CavityFigures, CavitySpec, SteadyState};

pub use error::{Error, Result};
pub use lineshape::{BroadeningParams, LineshapeQuery, ThermalConditions};
pub use medium::{MediumParams, PreparedMedium, SaturationKind, SaturationModel};
pub use protocol::{DetectorNoise, ScanPlan, ScanSample, SpectrumTrace};
