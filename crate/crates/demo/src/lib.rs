//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each exported function has a plain Rust counterpart (the `*_values`
//! functions) so the numerics can be tested natively.

use wasm_bindgen::prelude::*;
use xenon_cavity::cavity::{airy_transmission, solve_at_offset};
use xenon_cavity::{CavitySpec, LineCatalog, MediumParams, PreparedMedium};

/// Lock power used to normalize every ratio, W.
pub const LOCK_POWER_W: f64 = 20e-6;

fn prepared(density_cm3: f64, natural_fwhm_mhz: f64) -> Result<PreparedMedium, String> {
    let mut params = MediumParams {
        metastable_density_cm3: density_cm3,
        ..Default::default()
    };
    params.broadening.natural_fwhm_mhz = natural_fwhm_mhz;
    PreparedMedium::new(&params, &LineCatalog::natural_xenon()).map_err(|e| e.to_string())
}

/// Transmission ratio with the cavity resonance and laser both at `offset_mhz`.
fn ratio(medium: &PreparedMedium, spec: &CavitySpec, offset_mhz: f64, power_w: f64) -> Result<f64, String> {
    let low = solve_at_offset(power_w, offset_mhz, 0.0, spec, medium).map_err(|e| e.to_string())?;
    let high = solve_at_offset(LOCK_POWER_W, offset_mhz, 0.0, spec, medium).map_err(|e| e.to_string())?;
    Ok(low.absolute_transmission / high.absolute_transmission)
}

/// Interleaved (frequency THz, ratio) pairs over [start, stop].
pub fn ratio_spectrum_values(
    density_cm3: f64,
    natural_fwhm_mhz: f64,
    probe_power_nw: f64,
    start_thz: f64,
    stop_thz: f64,
    step_mhz: f64,
) -> Result<Vec<f64>, String> {
    if !(stop_thz > start_thz && step_mhz > 0.0 && probe_power_nw > 0.0) {
        return Err("need start < stop, step > 0 and power > 0".into());
    }
    let medium = prepared(density_cm3, natural_fwhm_mhz)?;
    let spec = CavitySpec::default();
    let n = ((stop_thz - start_thz) * 1e6 / step_mhz).floor() as usize + 1;
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let f = start_thz + i as f64 * step_mhz * 1e-6;
        out.push(f);
        out.push(ratio(&medium, &spec, medium.offset_mhz(f), probe_power_nw * 1e-9)?);
    }
    Ok(out)
}

/// Interleaved (probe power nW, ratio) pairs on a log-spaced power grid.
pub fn saturation_curve_values(
    density_cm3: f64,
    natural_fwhm_mhz: f64,
    frequency_thz: f64,
    min_power_nw: f64,
    max_power_nw: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    if !(min_power_nw > 0.0 && max_power_nw > min_power_nw && points >= 2) {
        return Err("need 0 < min power < max power and at least 2 points".into());
    }
    let medium = prepared(density_cm3, natural_fwhm_mhz)?;
    let spec = CavitySpec::default();
    let offset = medium.offset_mhz(frequency_thz);
    let ratio_max = max_power_nw / min_power_nw;
    let mut out = Vec::with_capacity(2 * points);
    for k in 0..points {
        let p = min_power_nw * ratio_max.powf(k as f64 / (points - 1) as f64);
        out.push(p);
        out.push(ratio(&medium, &spec, offset, p * 1e-9)?);
    }
    Ok(out)
}

/// Interleaved (detuning MHz, transmission) pairs of the Airy function for
/// a single-pass absorption α·L.
pub fn airy_values(mirror_transmission: f64, mirror_loss: f64, single_pass_od: f64, span_mhz: f64, points: usize) -> Result<Vec<f64>, String> {
    let spec = CavitySpec {
        mirror_transmission,
        mirror_loss,
        ..Default::default()
    };
    spec.validate().map_err(|e| e.to_string())?;
    if !(single_pass_od >= 0.0 && span_mhz > 0.0 && points >= 2) {
        return Err("need αL ≥ 0, span > 0 and at least 2 points".into());
    }
    let mut out = Vec::with_capacity(2 * points);
    for k in 0..points {
        let d = -span_mhz + 2.0 * span_mhz * k as f64 / (points - 1) as f64;
        out.push(d);
        out.push(airy_transmission(d, &spec, 2.0 * single_pass_od));
    }
    Ok(out)
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ratio_spectrum(
    density_cm3: f64,
    natural_fwhm_mhz: f64,
    probe_power_nw: f64,
    start_thz: f64,
    stop_thz: f64,
    step_mhz: f64,
) -> Result<Vec<f64>, JsError> {
    js(ratio_spectrum_values(density_cm3, natural_fwhm_mhz, probe_power_nw, start_thz, stop_thz, step_mhz))
}

#[wasm_bindgen]
pub fn saturation_curve(
    density_cm3: f64,
    natural_fwhm_mhz: f64,
    frequency_thz: f64,
    min_power_nw: f64,
    max_power_nw: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    js(saturation_curve_values(density_cm3, natural_fwhm_mhz, frequency_thz, min_power_nw, max_power_nw, points))
}

#[wasm_bindgen]
pub fn airy(mirror_transmission: f64, mirror_loss: f64, single_pass_od: f64, span_mhz: f64, points: usize) -> Result<Vec<f64>, JsError> {
    js(airy_values(mirror_transmission, mirror_loss, single_pass_od, span_mhz, points))
}

/// Calibrated defaults for the page's inputs: [density cm⁻³, natural FWHM MHz].
#[wasm_bindgen]
pub fn calibrated_defaults() -> Vec<f64> {
    vec![xenon_cavity::medium::CALIBRATED_DENSITY_CM3, xenon_cavity::medium::CALIBRATED_NATURAL_FWHM_MHZ]
}
