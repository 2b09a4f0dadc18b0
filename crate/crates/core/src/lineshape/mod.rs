//! Doppler and collisional broadening, the Voigt profile and per-line
//! absorption cross-sections.

mod faddeeva;

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use faddeeva::{faddeeva, faddeeva_derivative};

use crate::catalog::{HyperfineLine, LineCatalog};
use crate::constants::{AMU, C, KB};
use crate::{Error, Result};

/// Gaussian FWHM → standard deviation.
pub const FWHM_TO_SIGMA: f64 = 0.424_660_900_144_009_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalConditions {
    pub temperature_k: f64,
    pub helium_pressure_torr: f64,
    pub xenon_pressure_torr: f64,
}

impl Default for ThermalConditions {
    fn default() -> Self {
        ThermalConditions {
            temperature_k: 300.0,
            helium_pressure_torr: 0.9,
            xenon_pressure_torr: 0.1,
        }
    }
}

impl ThermalConditions {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature_k > 0.0 && self.temperature_k.is_finite()) {
            return Err(Error::validation(
                "conditions.temperature_k",
                format!("{} must be positive", self.temperature_k),
            ));
        }
        for (name, p) in [
            ("conditions.helium_pressure_torr", self.helium_pressure_torr),
            ("conditions.xenon_pressure_torr", self.xenon_pressure_torr),
        ] {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::validation(name, format!("{p} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Homogeneous broadening model. Widths are FWHM in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BroadeningParams {
    pub natural_fwhm_mhz: f64,
    /// Helium collisional broadening, MHz/torr.
    pub pressure_coeff_mhz_per_torr: f64,
    /// Helium collisional line shift, MHz/torr. Zero unless configured.
    pub pressure_shift_mhz_per_torr: f64,
}

impl Default for BroadeningParams {
    fn default() -> Self {
        BroadeningParams {
            natural_fwhm_mhz: crate::medium::CALIBRATED_NATURAL_FWHM_MHZ,
            pressure_coeff_mhz_per_torr: 20.0,
            pressure_shift_mhz_per_torr: 0.0,
        }
    }
}

impl BroadeningParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.natural_fwhm_mhz >= 0.0 && self.natural_fwhm_mhz.is_finite()) {
            return Err(Error::validation(
                "broadening.natural_fwhm_mhz",
                format!("{} must be non-negative", self.natural_fwhm_mhz),
            ));
        }
        if !(self.pressure_coeff_mhz_per_torr >= 0.0 && self.pressure_coeff_mhz_per_torr.is_finite()) {
            return Err(Error::validation(
                "broadening.pressure_coeff_mhz_per_torr",
                format!("{} must be non-negative", self.pressure_coeff_mhz_per_torr),
            ));
        }
        if !self.pressure_shift_mhz_per_torr.is_finite() {
            return Err(Error::validation("broadening.pressure_shift_mhz_per_torr", "not finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineshapeQuery {
    pub detuning_mhz: f64,
    pub gaussian_fwhm_mhz: f64,
    pub lorentzian_fwhm_mhz: f64,
}

impl LineshapeQuery {
    pub fn new(detuning_mhz: f64, gaussian_fwhm_mhz: f64, lorentzian_fwhm_mhz: f64) -> Self {
        LineshapeQuery {
            detuning_mhz,
            gaussian_fwhm_mhz,
            lorentzian_fwhm_mhz,
        }
    }
}

/// Doppler FWHM in MHz: ν·sqrt(8 ln2 k_B T / (m c²)).
pub fn doppler_fwhm(center_frequency_thz: f64, mass_amu: f64, temperature_k: f64) -> Result<f64> {
    for (name, v) in [
        ("center_frequency_thz", center_frequency_thz),
        ("mass_amu", mass_amu),
        ("temperature_k", temperature_k),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(name, format!("{v} must be positive")));
        }
    }
    let ratio = 8.0 * LN_2 * KB * temperature_k / (mass_amu * AMU * C * C);
    Ok(center_frequency_thz * 1e6 * ratio.sqrt())
}

/// natural + pressure_coeff · helium pressure, MHz.
pub fn homogeneous_fwhm(params: &BroadeningParams, conditions: &ThermalConditions) -> f64 {
    params.natural_fwhm_mhz + params.pressure_coeff_mhz_per_torr * conditions.helium_pressure_torr
}

/// Area-normalised Voigt profile in 1/MHz.
pub fn voigt(query: &LineshapeQuery) -> Result<f64> {
    let LineshapeQuery {
        detuning_mhz: x,
        gaussian_fwhm_mhz: g,
        lorentzian_fwhm_mhz: l,
    } = *query;
    if !(g >= 0.0 && l >= 0.0 && g.is_finite() && l.is_finite()) {
        return Err(Error::validation("lineshape", "widths must be finite and non-negative"));
    }
    if g == 0.0 && l == 0.0 {
        return Err(Error::validation("lineshape", "Gaussian and Lorentzian widths are both zero"));
    }
    Ok(voigt_unchecked(x, g, l))
}

pub(crate) fn voigt_unchecked(x: f64, g: f64, l: f64) -> f64 {
    let gamma = 0.5 * l;
    if g == 0.0 {
        return gamma / (PI * (x * x + gamma * gamma));
    }
    let sigma = g * FWHM_TO_SIGMA;
    if l == 0.0 {
        return (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt());
    }
    let scale = sigma * std::f64::consts::SQRT_2;
    let z = Complex64::new(x.abs() / scale, gamma / scale);
    faddeeva(z).re / (sigma * (2.0 * PI).sqrt())
}

/// Peak cross-section of a closed two-level line, 3λ²/(2π), in cm².
pub fn resonant_cross_section_cm2(wavelength_nm: f64) -> f64 {
    let lambda_cm = wavelength_nm * 1e-7;
    3.0 * lambda_cm * lambda_cm / (2.0 * PI)
}

/// Integrated line strength σ₀·(π/2)·Γ_nat·relative_strength in cm²·MHz.
pub fn integrated_strength(wavelength_nm: f64, natural_fwhm_mhz: f64, relative_strength: f64) -> f64 {
    resonant_cross_section_cm2(wavelength_nm) * 0.5 * PI * natural_fwhm_mhz * relative_strength
}

/// Line centre offset from the catalog reference including the pressure shift, MHz.
pub fn shifted_offset_mhz(
    line: &HyperfineLine,
    conditions: &ThermalConditions,
    broadening: &BroadeningParams,
) -> f64 {
    line.offset_mhz + broadening.pressure_shift_mhz_per_torr * conditions.helium_pressure_torr
}

/// Absorption cross-section of one line (not weighted by abundance), cm².
pub fn cross_section(
    line: &HyperfineLine,
    catalog: &LineCatalog,
    conditions: &ThermalConditions,
    broadening: &BroadeningParams,
    frequency_thz: f64,
) -> Result<f64> {
    if !catalog.lines.contains(line) {
        return Err(Error::validation(
            "line",
            format!("{} is not in the catalog", line.label()),
        ));
    }
    conditions.validate()?;
    broadening.validate()?;
    catalog.check_coverage(frequency_thz)?;
    let g = doppler_fwhm(
        catalog.line_frequency_thz(line),
        f64::from(line.isotope),
        conditions.temperature_k,
    )?;
    let l = homogeneous_fwhm(broadening, conditions);
    let detuning = catalog.offset_mhz(frequency_thz) - shifted_offset_mhz(line, conditions, broadening);
    let shape = voigt(&LineshapeQuery::new(detuning, g, l))?;
    Ok(integrated_strength(catalog.wavelength_nm, broadening.natural_fwhm_mhz, line.relative_strength) * shape)
}
