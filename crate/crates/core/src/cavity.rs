//! Fabry–Pérot cavity with an intracavity saturable absorber.
//!
//! The absorber enters the Airy function as a lumped round-trip intensity
//! loss A = 2·α·L. The steady state is the fixed point of
//! I ↦ I_circ(α(I)), which is bracketed by the fully absorbing and the empty
//! cavity and solved with Brent's method in log-intensity.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::catalog::LineCatalog;
use crate::constants::{C, MHZ_PER_THZ};
use crate::medium::{MediumParams, PreparedMedium, QuadraturePlan};
use crate::{Error, Result};

pub const DEFAULT_LENGTH_CM: f64 = 2.4983;
pub const MAX_ITERATIONS: usize = 200;
/// Relative residual |I_circ(α(I)) − I| / I accepted by the solver.
pub const SOLVER_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MIRROR_TRANSMISSION: f64 = 7.5e-4;
/// Chosen so that transmission + loss = π/4000 per mirror (finesse 4000).
pub const DEFAULT_MIRROR_LOSS: f64 = PI / 4000.0 - DEFAULT_MIRROR_TRANSMISSION;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavitySpec {
    pub length_cm: f64,
    /// Power transmission of each mirror.
    pub mirror_transmission: f64,
    /// Scatter/absorption loss of each mirror.
    pub mirror_loss: f64,
    /// 1/e² intensity radius at the waist, µm.
    pub mode_waist_um: f64,
    pub mirror_roc_cm: f64,
}

impl Default for CavitySpec {
    fn default() -> Self {
        CavitySpec {
            length_cm: DEFAULT_LENGTH_CM,
            mirror_transmission: DEFAULT_MIRROR_TRANSMISSION,
            mirror_loss: DEFAULT_MIRROR_LOSS,
            mode_waist_um: 58.0,
            mirror_roc_cm: 2.5,
        }
    }
}

impl CavitySpec {
    pub fn validate(&self) -> Result<()> {
        let t = self.mirror_transmission;
        let l = self.mirror_loss;
        if !(t > 0.0 && l > 0.0 && t + l < 0.01) {
            return Err(Error::validation(
                "cavity.mirror_transmission/mirror_loss",
                format!("need 0 < transmission, loss and transmission + loss < 0.01 (got {t}, {l})"),
            ));
        }
        for (name, v) in [
            ("cavity.length_cm", self.length_cm),
            ("cavity.mode_waist_um", self.mode_waist_um),
            ("cavity.mirror_roc_cm", self.mirror_roc_cm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(name, format!("{v} must be positive")));
            }
        }
        Ok(())
    }

    pub fn fsr_mhz(&self) -> f64 {
        C / (2.0 * self.length_cm * 1e-2) * 1e-6
    }

    pub fn finesse(&self) -> f64 {
        2.0 * PI / (2.0 * (self.mirror_transmission + self.mirror_loss))
    }

    pub fn linewidth_mhz(&self) -> f64 {
        self.fsr_mhz() / self.finesse()
    }

    /// Mode area π·w²/2 in cm².
    pub fn mode_area_cm2(&self) -> f64 {
        let w = self.mode_waist_um * 1e-4;
        0.5 * PI * w * w
    }

    /// Standing-wave peak intensity on axis for a circulating power, W/cm².
    pub fn peak_intensity(&self, circulating_power_w: f64) -> f64 {
        2.0 * circulating_power_w / self.mode_area_cm2()
    }

    fn denominator(&self, detuning_mhz: f64, round_trip_absorption: f64) -> (f64, f64) {
        let r = 1.0 - self.mirror_transmission - self.mirror_loss;
        let sqrt_s = r * (-0.5 * round_trip_absorption).exp();
        let phase = (PI * detuning_mhz / self.fsr_mhz()).sin();
        ((1.0 - sqrt_s).powi(2) + 4.0 * sqrt_s * phase * phase, sqrt_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityFigures {
    pub fsr_ghz: f64,
    pub finesse: f64,
    pub linewidth_mhz: f64,
    pub quality_factor: f64,
    /// Resonant circulating / input power of the empty cavity.
    pub buildup: f64,
}

pub fn figures(spec: &CavitySpec, optical_frequency_thz: f64) -> CavityFigures {
    let linewidth = spec.linewidth_mhz();
    let t = spec.mirror_transmission;
    let s0 = (1.0 - t - spec.mirror_loss).powi(2);
    CavityFigures {
        fsr_ghz: spec.fsr_mhz() * 1e-3,
        finesse: spec.finesse(),
        linewidth_mhz: linewidth,
        quality_factor: optical_frequency_thz * MHZ_PER_THZ / linewidth,
        buildup: t / (1.0 - s0.sqrt()).powi(2),
    }
}

/// Output / input power with round-trip intensity absorption A.
pub fn airy_transmission(detuning_mhz: f64, spec: &CavitySpec, round_trip_absorption: f64) -> f64 {
    let (den, _) = spec.denominator(detuning_mhz, round_trip_absorption);
    let t = spec.mirror_transmission;
    t * t * (-0.5 * round_trip_absorption).exp() / den
}

/// Forward circulating power just inside the input mirror, W.
pub fn circulating_power(
    input_power_w: f64,
    detuning_mhz: f64,
    spec: &CavitySpec,
    round_trip_absorption: f64,
) -> f64 {
    let (den, _) = spec.denominator(detuning_mhz, round_trip_absorption);
    input_power_w * spec.mirror_transmission / den
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub circulating_power_w: f64,
    /// Standing-wave peak intensity at the waist, W/cm².
    pub intensity_w_cm2: f64,
    pub alpha_eff_cm: f64,
    /// Output power relative to the empty cavity on resonance at the same input.
    pub transmission_ratio: f64,
    /// Output / input.
    pub absolute_transmission: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Intensity-dependent absorption coefficient seen by the intracavity field.
pub trait Absorber {
    /// α at zero intensity, cm⁻¹.
    fn unsaturated(&self) -> f64;
    /// α at a standing-wave peak intensity (W/cm²), cm⁻¹. Must be continuous
    /// and non-increasing in intensity.
    fn alpha(&self, intensity: f64) -> f64;
    fn path_length_cm(&self) -> f64;
}

/// Intensity-independent absorber.
#[derive(Debug, Clone, Copy)]
pub struct LinearAbsorber {
    pub alpha_cm: f64,
    pub path_length_cm: f64,
}

impl Absorber for LinearAbsorber {
    fn unsaturated(&self) -> f64 {
        self.alpha_cm
    }
    fn alpha(&self, _intensity: f64) -> f64 {
        self.alpha_cm
    }
    fn path_length_cm(&self) -> f64 {
        self.path_length_cm
    }
}

/// A prepared medium probed at one laser frequency, with quadrature levels
/// frozen over an intensity range so that α(I) is continuous.
pub struct MediumAtFrequency<'a> {
    medium: &'a PreparedMedium,
    offset_mhz: f64,
    alpha0: f64,
    plan: QuadraturePlan,
}

impl<'a> MediumAtFrequency<'a> {
    pub fn new(medium: &'a PreparedMedium, offset_mhz: f64, max_intensity: f64) -> Result<Self> {
        let alpha0 = medium.unsaturated_alpha_at(offset_mhz);
        let probes: Vec<f64> = if max_intensity > 0.0 {
            (0..6).map(|k| max_intensity * 10f64.powi(-2 * k)).collect()
        } else {
            Vec::new()
        };
        let plan = medium.quadrature_plan(offset_mhz, &probes)?;
        Ok(MediumAtFrequency {
            medium,
            offset_mhz,
            alpha0,
            plan,
        })
    }
}

impl Absorber for MediumAtFrequency<'_> {
    fn unsaturated(&self) -> f64 {
        self.alpha0
    }
    fn alpha(&self, intensity: f64) -> f64 {
        if intensity <= 0.0 {
            self.alpha0
        } else {
            self.medium.alpha_with_plan(self.offset_mhz, intensity, &self.plan)
        }
    }
    fn path_length_cm(&self) -> f64 {
        self.medium.path_length_cm()
    }
}

/// Fixed-point solver for the intracavity intensity.
#[derive(Debug, Clone, Copy)]
pub struct SteadyStateSolver<'a> {
    pub spec: &'a CavitySpec,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl<'a> SteadyStateSolver<'a> {
    pub fn new(spec: &'a CavitySpec) -> Self {
        SteadyStateSolver {
            spec,
            tolerance: SOLVER_TOLERANCE,
            max_iterations: MAX_ITERATIONS,
        }
    }

    /// Circulating peak intensity given α.
    pub fn intensity_for_alpha(&self, input_power_w: f64, cavity_detuning_mhz: f64, alpha: f64, path: f64) -> f64 {
        self.spec
            .peak_intensity(circulating_power(input_power_w, cavity_detuning_mhz, self.spec, 2.0 * alpha * path))
    }

    /// Relative residual (I_circ(α(I)) − I)/I.
    pub fn residual<A: Absorber>(&self, absorber: &A, input_power_w: f64, cavity_detuning_mhz: f64, intensity: f64) -> f64 {
        let mapped = self.intensity_for_alpha(
            input_power_w,
            cavity_detuning_mhz,
            absorber.alpha(intensity),
            absorber.path_length_cm(),
        );
        (mapped - intensity) / intensity
    }

    /// Intensity bracket [I_circ(α₀), I_circ(0)].
    pub fn bracket<A: Absorber>(&self, absorber: &A, input_power_w: f64, cavity_detuning_mhz: f64) -> (f64, f64) {
        let path = absorber.path_length_cm();
        (
            self.intensity_for_alpha(input_power_w, cavity_detuning_mhz, absorber.unsaturated(), path),
            self.intensity_for_alpha(input_power_w, cavity_detuning_mhz, 0.0, path),
        )
    }

    pub fn solve<A: Absorber>(&self, absorber: &A, input_power_w: f64, cavity_detuning_mhz: f64) -> Result<SteadyState> {
        if !(input_power_w >= 0.0 && input_power_w.is_finite() && cavity_detuning_mhz.is_finite()) {
            return Err(Error::validation(
                "input_power",
                format!("input {input_power_w} W at detuning {cavity_detuning_mhz} MHz is not a valid operating point"),
            ));
        }
        let path = absorber.path_length_cm();
        let (lo, hi) = self.bracket(absorber, input_power_w, cavity_detuning_mhz);
        let (intensity, iterations, residual) = if input_power_w == 0.0 {
            (0.0, 0, 0.0)
        } else if absorber.unsaturated() == 0.0 || lo == hi {
            (hi, 0, 0.0)
        } else {
            let h = |u: f64| {
                let i = u.exp();
                let mapped = self.intensity_for_alpha(input_power_w, cavity_detuning_mhz, absorber.alpha(i), path);
                mapped.ln() - u
            };
            let (u, iterations) = brent(h, lo.ln(), hi.ln(), self.max_iterations).map_err(|(iterations, last)| {
                Error::Convergence {
                    context: String::new(),
                    iterations,
                    residual: last.abs(),
                }
            })?;
            let i = u.exp();
            let residual = self.residual(absorber, input_power_w, cavity_detuning_mhz, i).abs();
            if residual > self.tolerance {
                return Err(Error::Convergence {
                    context: String::new(),
                    iterations,
                    residual,
                });
            }
            (i, iterations, residual)
        };
        let alpha = absorber.alpha(intensity);
        let a = 2.0 * alpha * path;
        let absolute = airy_transmission(cavity_detuning_mhz, self.spec, a);
        let empty = airy_transmission(0.0, self.spec, 0.0);
        Ok(SteadyState {
            circulating_power_w: circulating_power(input_power_w, cavity_detuning_mhz, self.spec, a),
            intensity_w_cm2: intensity,
            alpha_eff_cm: alpha,
            transmission_ratio: absolute / empty,
            absolute_transmission: absolute,
            iterations,
            residual,
        })
    }
}

/// Brent's method on a sign-changing bracket [a, b]. Returns the root and the
/// number of function evaluations, or the evaluation count and last |f| on
/// failure.
fn brent(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, max_iter: usize) -> Result<(f64, usize), (usize, f64)> {
    let mut fa = f(a);
    let mut fb = f(b);
    let mut evals = 2;
    if fa == 0.0 {
        return Ok((a, evals));
    }
    if fb == 0.0 {
        return Ok((b, evals));
    }
    if fa.signum() == fb.signum() {
        // Monotone map: a same-sign bracket means the root sits at the end
        // with the smaller |f| up to rounding.
        return if fa.abs() < fb.abs() { Ok((a, evals)) } else { Ok((b, evals)) };
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    while evals < max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 1e-15;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb.abs() < 1e-14 {
            return Ok((b, evals));
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        evals += 1;
    }
    Err((evals, fb))
}

/// Solves for the steady state at an absolute laser frequency and cavity
/// resonance frequency (THz).
pub fn solve_steady_state(
    input_power_w: f64,
    laser_frequency_thz: f64,
    cavity_resonance_thz: f64,
    spec: &CavitySpec,
    medium: &MediumParams,
    catalog: &LineCatalog,
) -> Result<SteadyState> {
    spec.validate()?;
    catalog.check_coverage(laser_frequency_thz)?;
    let prepared = PreparedMedium::new(medium, catalog)?;
    solve_prepared(input_power_w, laser_frequency_thz, cavity_resonance_thz, spec, &prepared)
}

pub fn solve_prepared(
    input_power_w: f64,
    laser_frequency_thz: f64,
    cavity_resonance_thz: f64,
    spec: &CavitySpec,
    medium: &PreparedMedium,
) -> Result<SteadyState> {
    let detuning = (laser_frequency_thz - cavity_resonance_thz) * MHZ_PER_THZ;
    solve_at_offset(input_power_w, medium.offset_mhz(laser_frequency_thz), detuning, spec, medium)
}

/// Steady state with the laser at `laser_offset_mhz` from the catalog
/// reference and `cavity_detuning_mhz` from the cavity resonance.
pub fn solve_at_offset(
    input_power_w: f64,
    laser_offset_mhz: f64,
    cavity_detuning_mhz: f64,
    spec: &CavitySpec,
    medium: &PreparedMedium,
) -> Result<SteadyState> {
    let solver = SteadyStateSolver::new(spec);
    let max_intensity = solver.intensity_for_alpha(input_power_w, cavity_detuning_mhz, 0.0, medium.path_length_cm());
    let absorber = MediumAtFrequency::new(medium, laser_offset_mhz, max_intensity)?;
    solver.solve(&absorber, input_power_w, cavity_detuning_mhz)
}
