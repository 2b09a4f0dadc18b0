//! Dual-power lock-and-probe measurement.
//!
//! At each cavity resonance the laser is swept across the transmission peak
//! at the lock power and parked on the refined maximum. The high-power
//! transmission is recorded, then each probe power is applied in turn and the
//! low-power transmission is recorded. The ratio of the two is the observable.
//!
//! Detectors: D1/D3 are the monitor/signal pair read during the high-power
//! phase, D2/D4 the pair read during each low-power phase. Signals are
//! normalized by their monitor, so intensity noise common to both cancels.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::LineCatalog;
use crate::cavity::{airy_transmission, CavitySpec, MediumAtFrequency, SteadyStateSolver};
use crate::constants::MHZ_PER_THZ;
use crate::medium::{MediumParams, PreparedMedium};
use crate::rng::CounterRng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorNoise {
    /// Fractional rms fluctuation of the source power, common to a monitor
    /// and its signal detector.
    pub relative_intensity_noise: f64,
    /// Additive rms noise of every detector reading, W.
    pub readout_noise_w: f64,
    pub enabled: bool,
}

impl Default for DetectorNoise {
    fn default() -> Self {
        DetectorNoise {
            relative_intensity_noise: 0.0,
            readout_noise_w: 0.0,
            enabled: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanPlan {
    pub resonance_start_thz: f64,
    pub resonance_stop_thz: f64,
    pub step_mhz: f64,
    pub probe_powers_w: Vec<f64>,
    pub lock_power_w: f64,
    /// Dead time after each power switch, ms. Nothing is recorded during it.
    pub settle_time_ms: f64,
    pub temp_coefficient_ghz_per_c: f64,
    /// Block temperature at `resonance_start_thz`, °C.
    pub base_temperature_c: f64,
    /// Samples in the ±2 linewidth lock sweep.
    pub lock_sweep_points: usize,
    /// rms Gaussian jitter of the laser during probing, MHz. Zero disables it.
    pub laser_jitter_mhz: f64,
    pub noise: DetectorNoise,
    pub seed: u64,
}

impl Default for ScanPlan {
    fn default() -> Self {
        ScanPlan {
            resonance_start_thz: 364.089,
            resonance_stop_thz: 364.102,
            step_mhz: 25.0,
            probe_powers_w: vec![0.5e-9, 2e-9, 19e-9],
            lock_power_w: 20e-6,
            settle_time_ms: 1.0,
            temp_coefficient_ghz_per_c: 20.0,
            base_temperature_c: 25.0,
            lock_sweep_points: 41,
            laser_jitter_mhz: 0.0,
            noise: DetectorNoise::default(),
            seed: 0,
        }
    }
}

impl ScanPlan {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("scan.{name}"), format!("{v} is not finite")))
            }
        };
        finite("resonance_start_thz", self.resonance_start_thz)?;
        finite("resonance_stop_thz", self.resonance_stop_thz)?;
        finite("base_temperature_c", self.base_temperature_c)?;
        if !(self.resonance_start_thz < self.resonance_stop_thz) {
            return Err(Error::validation(
                "scan.resonance_start_thz",
                format!("start {} must be below stop {}", self.resonance_start_thz, self.resonance_stop_thz),
            ));
        }
        if !(self.step_mhz > 0.0 && self.step_mhz.is_finite()) {
            return Err(Error::validation("scan.step_mhz", format!("{} must be positive", self.step_mhz)));
        }
        if self.probe_powers_w.is_empty() {
            return Err(Error::validation("scan.probe_powers_w", "at least one probe power is required"));
        }
        for (i, &p) in self.probe_powers_w.iter().chain([&self.lock_power_w]).enumerate() {
            if !(p > 0.0 && p.is_finite()) {
                let name = if i < self.probe_powers_w.len() {
                    format!("scan.probe_powers_w[{i}]")
                } else {
                    "scan.lock_power_w".to_string()
                };
                return Err(Error::validation(name, format!("{p} must be positive")));
            }
        }
        for (name, v) in [
            ("settle_time_ms", self.settle_time_ms),
            ("laser_jitter_mhz", self.laser_jitter_mhz),
            ("noise.relative_intensity_noise", self.noise.relative_intensity_noise),
            ("noise.readout_noise_w", self.noise.readout_noise_w),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("scan.{name}"), format!("{v} must be non-negative")));
            }
        }
        if !(self.temp_coefficient_ghz_per_c != 0.0 && self.temp_coefficient_ghz_per_c.is_finite()) {
            return Err(Error::validation(
                "scan.temp_coefficient_ghz_per_c",
                format!("{} must be finite and non-zero", self.temp_coefficient_ghz_per_c),
            ));
        }
        if self.lock_sweep_points < 3 {
            return Err(Error::validation("scan.lock_sweep_points", "at least 3 points are needed"));
        }
        Ok(())
    }

    /// Number of scan points; the last point does not pass `resonance_stop_thz`.
    pub fn point_count(&self) -> usize {
        let span = (self.resonance_stop_thz - self.resonance_start_thz) * MHZ_PER_THZ;
        // Allow for the rounding of THz-scale differences.
        (span / self.step_mhz + 1e-6).floor() as usize + 1
    }

    /// Cavity resonance of scan point `index`, THz.
    pub fn resonance_thz(&self, index: usize) -> f64 {
        self.resonance_start_thz + index as f64 * self.step_mhz / MHZ_PER_THZ
    }

    /// Block temperature that puts the resonance at `resonance_thz` on the
    /// unwrapped tuning line.
    pub fn block_temperature_c(&self, resonance_thz: f64) -> f64 {
        let shift_ghz = (resonance_thz - self.resonance_start_thz) * 1e3;
        self.base_temperature_c + shift_ghz / self.temp_coefficient_ghz_per_c
    }

    /// Total dead time spent settling after power switches, ms.
    pub fn settle_budget_ms(&self) -> f64 {
        // One switch down to each probe power and one back up per point.
        (2 * self.probe_powers_w.len() * self.point_count()) as f64 * self.settle_time_ms
    }
}

/// Unwrapped resonance shift for a temperature change, MHz.
pub fn temperature_shift_mhz(temperature_c: f64, plan: &ScanPlan) -> f64 {
    plan.temp_coefficient_ghz_per_c * (temperature_c - plan.base_temperature_c) * 1e3
}

/// Resonance frequency for a block temperature. The shift is folded into
/// [−FSR/2, FSR/2) around `resonance_start_thz`, since the laser addresses
/// whichever longitudinal mode is nearest.
pub fn temp_to_resonance(temperature_c: f64, plan: &ScanPlan, spec: &CavitySpec) -> f64 {
    let fsr = spec.fsr_mhz();
    let shift = temperature_shift_mhz(temperature_c, plan);
    let folded = shift - fsr * (shift / fsr + 0.5).floor();
    plan.resonance_start_thz + folded / MHZ_PER_THZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub resonance_thz: f64,
    /// Known only for simulated scans; not part of the trace file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_temperature_c: Option<f64>,
    pub t_high: f64,
    pub t_low: f64,
    pub ratio: f64,
    pub optical_depth: f64,
    pub probe_power_nw: f64,
}

impl ScanSample {
    pub fn new(resonance_thz: f64, probe_power_nw: f64, t_high: f64, t_low: f64) -> Self {
        let ratio = t_low / t_high;
        ScanSample {
            resonance_thz,
            block_temperature_c: None,
            t_high,
            t_low,
            ratio,
            optical_depth: optical_depth(ratio),
            probe_power_nw,
        }
    }

    pub fn probe_power_w(&self) -> f64 {
        self.probe_power_nw * 1e-9
    }
}

/// −ln(ratio), or +∞ when noise drives the ratio to zero or below.
pub fn optical_depth(ratio: f64) -> f64 {
    if ratio > 0.0 {
        -ratio.ln()
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<ScanPlan>,
    /// SHA-256 of the configuration that produced the trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub samples: Vec<ScanSample>,
    #[serde(default)]
    pub metadata: TraceMetadata,
}

impl SpectrumTrace {
    pub fn new(samples: Vec<ScanSample>) -> Result<Self> {
        let trace = SpectrumTrace {
            samples,
            metadata: TraceMetadata::default(),
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.samples.first() else {
            return Err(Error::validation("trace", "a trace needs at least one sample"));
        };
        for (i, s) in self.samples.iter().enumerate() {
            if !s.resonance_thz.is_finite() {
                return Err(Error::validation(format!("trace[{i}].resonance_thz"), "not finite"));
            }
            if s.probe_power_nw != first.probe_power_nw {
                return Err(Error::validation(
                    format!("trace[{i}].probe_power_nw"),
                    format!("{} differs from the trace power {}", s.probe_power_nw, first.probe_power_nw),
                ));
            }
            if i > 0 && !(s.resonance_thz > self.samples[i - 1].resonance_thz) {
                return Err(Error::validation(
                    format!("trace[{i}].resonance_thz"),
                    format!("{} does not increase on {}", s.resonance_thz, self.samples[i - 1].resonance_thz),
                ));
            }
        }
        Ok(())
    }

    pub fn probe_power_w(&self) -> f64 {
        self.samples[0].probe_power_w()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn resonances(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.resonance_thz).collect()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.ratio).collect()
    }

    /// Index of the sample closest to `frequency_thz`.
    pub fn nearest(&self, frequency_thz: f64) -> usize {
        let mut best = 0;
        for (i, s) in self.samples.iter().enumerate() {
            if (s.resonance_thz - frequency_thz).abs() < (self.samples[best].resonance_thz - frequency_thz).abs() {
                best = i;
            }
        }
        best
    }
}

/// Laser offset (MHz from the catalog reference) at which the lock settles
/// for a cavity resonance at `resonance_offset_mhz`.
///
/// The lock beam saturates the absorber, so the swept line shape is the empty
/// cavity Airy peak. The sweep grid is fixed in absolute frequency; the peak
/// is refined by a parabola through the best sample and its neighbours.
pub fn lock_offset_mhz(resonance_offset_mhz: f64, plan: &ScanPlan, spec: &CavitySpec) -> f64 {
    let half_span = 2.0 * spec.linewidth_mhz();
    let h = 2.0 * half_span / (plan.lock_sweep_points - 1) as f64;
    let first = ((resonance_offset_mhz - half_span) / h).ceil() as i64;
    let last = ((resonance_offset_mhz + half_span) / h).floor() as i64;
    let t = |k: i64| airy_transmission(k as f64 * h - resonance_offset_mhz, spec, 0.0);
    let best = (first..=last)
        .max_by(|&a, &b| t(a).total_cmp(&t(b)))
        .expect("sweep grid is non-empty");
    let (y0, y1, y2) = (t(best - 1), t(best), t(best + 1));
    let curvature = y0 - 2.0 * y1 + y2;
    let shift = if curvature < 0.0 { 0.5 * (y0 - y2) / curvature } else { 0.0 };
    (best as f64 + shift) * h
}

// RNG channel layout within a scan point's stream.
const CH_RIN: u32 = 0;
const CH_MONITOR: u32 = 1;
const CH_SIGNAL: u32 = 2;
const CH_JITTER: u32 = 3;
const CHANNELS_PER_PHASE: u32 = 4;

fn channel(phase: usize, ch: u32) -> u32 {
    phase as u32 * CHANNELS_PER_PHASE + ch
}

/// Monitor-normalized transmission reading for one measurement phase of a
/// scan point. Phase 0 is the lock phase, phase k+1 the k-th probe power.
pub fn detect(transmission: f64, power_w: f64, noise: &DetectorNoise, seed: u64, point: u64, phase: usize) -> f64 {
    if !noise.enabled {
        return transmission;
    }
    let draw = |ch| CounterRng::new(seed, point, channel(phase, ch));
    let source = power_w * (1.0 + draw(CH_RIN).normal(noise.relative_intensity_noise));
    let monitor = source + draw(CH_MONITOR).normal(noise.readout_noise_w);
    let signal = transmission * source + draw(CH_SIGNAL).normal(noise.readout_noise_w);
    signal / monitor
}

/// One lock-and-probe cycle at scan point `index`; returns one sample per
/// probe power, in plan order.
pub fn lock_and_probe(
    index: usize,
    plan: &ScanPlan,
    spec: &CavitySpec,
    medium: &PreparedMedium,
    reference_thz: f64,
) -> Result<Vec<ScanSample>> {
    let resonance_thz = plan.resonance_thz(index);
    let resonance_offset = (resonance_thz - reference_thz) * MHZ_PER_THZ;
    let laser = lock_offset_mhz(resonance_offset, plan, spec);
    let solver = SteadyStateSolver::new(spec);
    let point = index as u64;

    let context = |e: Error| match e {
        Error::Convergence {
            context,
            iterations,
            residual,
        } => Error::Convergence {
            context: format!("{context} at scan point {index} ({resonance_thz} THz)"),
            iterations,
            residual,
        },
        other => other,
    };
    let solve = |power: f64, laser: f64| -> Result<f64> {
        let max_i = solver.intensity_for_alpha(power, laser - resonance_offset, 0.0, medium.path_length_cm());
        let absorber = MediumAtFrequency::new(medium, laser, max_i)?;
        Ok(solver.solve(&absorber, power, laser - resonance_offset)?.absolute_transmission)
    };

    let t_high_true = solve(plan.lock_power_w, laser).map_err(context)?;
    let t_high = detect(t_high_true, plan.lock_power_w, &plan.noise, plan.seed, point, 0);
    let temperature = plan.block_temperature_c(resonance_thz);

    plan.probe_powers_w
        .iter()
        .enumerate()
        .map(|(k, &power)| {
            let phase = k + 1;
            let jitter = CounterRng::new(plan.seed, point, channel(phase, CH_JITTER)).normal(plan.laser_jitter_mhz);
            let t_low_true = solve(power, laser + jitter).map_err(context)?;
            let t_low = detect(t_low_true, power, &plan.noise, plan.seed, point, phase);
            let mut sample = ScanSample::new(resonance_thz, power * 1e9, t_high, t_low);
            sample.block_temperature_c = Some(temperature);
            Ok(sample)
        })
        .collect()
}

/// How scan points are scheduled. Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Serial
        }
    }
}

/// Hash identifying a scan configuration.
pub fn config_hash(plan: &ScanPlan, spec: &CavitySpec, medium: &MediumParams, catalog: &LineCatalog) -> String {
    let doc = serde_json::json!({
        "scan": plan,
        "cavity": spec,
        "medium": medium,
        "catalog": serde_json::from_str::<serde_json::Value>(&catalog.to_json()).expect("catalog JSON"),
    });
    let digest = Sha256::digest(doc.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn run_scan(plan: &ScanPlan, spec: &CavitySpec, medium: &MediumParams, catalog: &LineCatalog) -> Result<Vec<SpectrumTrace>> {
    run_scan_with(plan, spec, medium, catalog, Execution::default())
}

/// Runs the full scan; one trace per probe power in plan order.
pub fn run_scan_with(
    plan: &ScanPlan,
    spec: &CavitySpec,
    medium: &MediumParams,
    catalog: &LineCatalog,
    execution: Execution,
) -> Result<Vec<SpectrumTrace>> {
    plan.validate()?;
    spec.validate()?;
    catalog.check_coverage(plan.resonance_start_thz)?;
    catalog.check_coverage(plan.resonance_stop_thz)?;
    let prepared = PreparedMedium::new(medium, catalog)?;
    let n = plan.point_count();
    let reference = catalog.reference_frequency_thz;
    let point = |i: usize| lock_and_probe(i, plan, spec, &prepared, reference);

    let results: Vec<Result<Vec<ScanSample>>> = match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(point).collect()
        }
        _ => (0..n).map(point).collect(),
    };

    let mut rows = Vec::with_capacity(n);
    let mut failed = Vec::new();
    let mut first_error = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(samples) => rows.push(samples),
            Err(e) => {
                failed.push(i);
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(first) = first_error {
        return Err(Error::Scan {
            failed: failed.len(),
            total: n,
            first_index: failed[0],
            first: Box::new(first),
            indices: failed,
        });
    }

    let metadata = TraceMetadata {
        plan: Some(plan.clone()),
        config_hash: Some(config_hash(plan, spec, medium, catalog)),
    };
    let traces = (0..plan.probe_powers_w.len())
        .map(|k| SpectrumTrace {
            samples: rows.iter().map(|row| row[k].clone()).collect(),
            metadata: metadata.clone(),
        })
        .collect::<Vec<_>>();
    for t in &traces {
        t.validate()?;
    }
    Ok(traces)
}

/// Full width (MHz) of the dip around `center_thz` at half depth, where
/// half depth is (1 + local minimum)/2. Crossings are linearly interpolated.
pub fn apparent_dip_width(trace: &SpectrumTrace, center_thz: f64) -> Result<f64> {
    let not_found = |reason: &str| Error::DipNotFound {
        center_thz,
        reason: reason.to_string(),
    };
    let s = &trace.samples;
    if s.len() < 3 {
        return Err(not_found("trace has fewer than 3 samples"));
    }
    let (lo, hi) = (s[0].resonance_thz, s[s.len() - 1].resonance_thz);
    if !(lo..=hi).contains(&center_thz) {
        return Err(not_found("center is outside the trace"));
    }
    // Walk downhill from the nearest sample to the local minimum.
    let mut m = trace.nearest(center_thz);
    loop {
        let left = m > 0 && s[m - 1].ratio < s[m].ratio;
        let right = m + 1 < s.len() && s[m + 1].ratio < s[m].ratio;
        m = match (left, right) {
            (true, true) if s[m - 1].ratio <= s[m + 1].ratio => m - 1,
            (true, true) | (false, true) => m + 1,
            (true, false) => m - 1,
            (false, false) => break,
        };
    }
    let threshold = 0.5 * (1.0 + s[m].ratio);
    if !(s[m].ratio < threshold) {
        return Err(not_found("no sample lies below the half-depth threshold"));
    }
    let cross = |a: &ScanSample, b: &ScanSample| {
        let f = (threshold - a.ratio) / (b.ratio - a.ratio);
        a.resonance_thz + f * (b.resonance_thz - a.resonance_thz)
    };
    let mut l = m;
    while l > 0 && s[l - 1].ratio < threshold {
        l -= 1;
    }
    let mut r = m;
    while r + 1 < s.len() && s[r + 1].ratio < threshold {
        r += 1;
    }
    if l == 0 || r + 1 == s.len() {
        return Err(not_found("dip extends past the end of the trace"));
    }
    let left = cross(&s[l - 1], &s[l]);
    let right = cross(&s[r], &s[r + 1]);
    Ok((right - left) * MHZ_PER_THZ)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_plan(start: f64, stop: f64, step: f64) -> ScanPlan {
        ScanPlan {
            resonance_start_thz: start,
            resonance_stop_thz: stop,
            step_mhz: step,
            ..Default::default()
        }
    }

    #[test]
    fn temperature_map() {
        let plan = ScanPlan::default();
        let spec = CavitySpec::default();
        assert_eq!(temp_to_resonance(plan.base_temperature_c, &plan, &spec), plan.resonance_start_thz);
        assert_relative_eq!(temperature_shift_mhz(plan.base_temperature_c + 0.3, &plan), 6000.0, epsilon = 1e-9);
        let f = |dt: f64| temp_to_resonance(plan.base_temperature_c + dt, &plan, &spec);
        assert_relative_eq!((f(0.02) - f(0.01)) * 1e6, (f(0.03) - f(0.02)) * 1e6, epsilon = 1e-6);
        // One FSR of shift folds back onto the starting mode.
        let fsr_dt = spec.fsr_mhz() / (plan.temp_coefficient_ghz_per_c * 1e3);
        assert_relative_eq!(f(fsr_dt), plan.resonance_start_thz, epsilon = 1e-12);
    }

    #[test]
    fn lock_is_unbiased() {
        let plan = ScanPlan::default();
        let spec = CavitySpec::default();
        let lw = spec.linewidth_mhz();
        for k in 0..50 {
            let res = -3000.0 + 0.123_456 * k as f64;
            let err = lock_offset_mhz(res, &plan, &spec) - res;
            assert!(err.abs() < 0.01 * lw, "resonance {res}: lock error {err}");
        }
    }

    #[test]
    fn zero_density_gives_unit_ratio() {
        let cat = LineCatalog::natural_xenon();
        let medium = MediumParams { metastable_density_cm3: 0.0, ..Default::default() };
        let traces = run_scan(&small_plan(364.0965, 364.0975, 100.0), &CavitySpec::default(), &medium, &cat).unwrap();
        assert_eq!(traces.len(), 3);
        for t in &traces {
            for s in &t.samples {
                assert_eq!(s.ratio, 1.0);
                assert_eq!(s.optical_depth, 0.0);
            }
        }
    }

    #[test]
    fn probe_at_lock_power_is_unity() {
        let cat = LineCatalog::natural_xenon();
        let mut plan = small_plan(364.0965, 364.0975, 250.0);
        plan.probe_powers_w = vec![plan.lock_power_w];
        let traces = run_scan(&plan, &CavitySpec::default(), &MediumParams::default(), &cat).unwrap();
        for s in &traces[0].samples {
            assert_relative_eq!(s.ratio, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn common_mode_noise_cancels() {
        let cat = LineCatalog::natural_xenon();
        let spec = CavitySpec::default();
        let medium = MediumParams::default();
        let clean_plan = small_plan(364.0955, 364.0975, 250.0);
        let mut noisy_plan = clean_plan.clone();
        noisy_plan.noise = DetectorNoise {
            relative_intensity_noise: 0.05,
            readout_noise_w: 0.0,
            enabled: true,
        };
        let clean = run_scan(&clean_plan, &spec, &medium, &cat).unwrap();
        let noisy = run_scan(&noisy_plan, &spec, &medium, &cat).unwrap();
        for (a, b) in clean.iter().zip(&noisy) {
            for (x, y) in a.samples.iter().zip(&b.samples) {
                assert_relative_eq!(x.ratio, y.ratio, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn serial_and_parallel_agree() {
        let cat = LineCatalog::natural_xenon();
        let mut plan = small_plan(364.0950, 364.0975, 125.0);
        plan.noise = DetectorNoise {
            relative_intensity_noise: 0.01,
            readout_noise_w: 1e-12,
            enabled: true,
        };
        plan.laser_jitter_mhz = 0.05;
        let spec = CavitySpec::default();
        let m = MediumParams::default();
        let a = run_scan_with(&plan, &spec, &m, &cat, Execution::Serial).unwrap();
        let b = run_scan_with(&plan, &spec, &m, &cat, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_plans() {
        let good = ScanPlan::default();
        assert!(good.validate().is_ok());
        let mut p = good.clone();
        p.resonance_stop_thz = p.resonance_start_thz;
        assert!(p.validate().is_err());
        let mut p = good.clone();
        p.step_mhz = 0.0;
        assert!(p.validate().is_err());
        let mut p = good.clone();
        p.probe_powers_w.push(-1.0);
        assert!(matches!(p.validate(), Err(Error::Validation { location, .. }) if location == "scan.probe_powers_w[3]"));
    }

    #[test]
    fn point_grid() {
        let p = small_plan(364.0, 364.001, 100.0);
        assert_eq!(p.point_count(), 11);
        assert_relative_eq!(p.resonance_thz(10), 364.001, epsilon = 1e-12);
        assert_eq!(p.settle_budget_ms(), 2.0 * 3.0 * 11.0);
    }

    fn synthetic(width_mhz: f64, depth: f64, step_mhz: f64) -> SpectrumTrace {
        let samples = (0..201)
            .map(|i| {
                let x = (i as f64 - 100.0) * step_mhz;
                let r = 1.0 - depth * (-(2.0 * x / width_mhz).powi(2) * std::f64::consts::LN_2).exp();
                ScanSample::new(364.0 + x / MHZ_PER_THZ, 1.0, 1.0, r)
            })
            .collect();
        SpectrumTrace::new(samples).unwrap()
    }

    #[test]
    fn dip_width_of_constructed_dip() {
        // Gaussian dip of depth d: ratio < (1 + 1 − d)/2 exactly where the
        // Gaussian exceeds 1/2, i.e. over its FWHM.
        for (w, step) in [(300.0, 10.0), (57.0, 2.5)] {
            let width = apparent_dip_width(&synthetic(w, 0.8, step), 364.0).unwrap();
            assert!((width - w).abs() < step, "{width} vs {w}");
        }
    }

    #[test]
    fn flat_trace_has_no_dip() {
        let flat = SpectrumTrace::new((0..10).map(|i| ScanSample::new(364.0 + i as f64 * 1e-4, 1.0, 1.0, 1.0)).collect()).unwrap();
        assert!(matches!(apparent_dip_width(&flat, 364.0004), Err(Error::DipNotFound { .. })));
    }

    #[test]
    fn trace_invariants() {
        let s = |f: f64| ScanSample::new(f, 1.0, 0.9, 0.5);
        assert!(SpectrumTrace::new(vec![s(1.0), s(1.0)]).is_err());
        assert!(SpectrumTrace::new(vec![s(2.0), s(1.0)]).is_err());
        let mut other = s(3.0);
        other.probe_power_nw = 2.0;
        assert!(SpectrumTrace::new(vec![s(1.0), other]).is_err());
        assert!(SpectrumTrace::new(vec![s(1.0), s(2.0)]).is_ok());
    }
}
