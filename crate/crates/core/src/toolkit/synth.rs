//! Synthetic traces drawn from a fit model, read through the scan's detector
//! model. Used as ground truth for fitting round trips.

use crate::protocol::{detect, DetectorNoise, ScanSample, SpectrumTrace};
use crate::toolkit::fit::FitModel;
use crate::Result;

/// Lock-phase power assumed for synthetic traces, W.
const SYNTHETIC_LOCK_POWER_W: f64 = 20e-6;

/// One trace per probe power over `grid_thz`. The true high-power
/// transmission is 1, so the true ratio is the model value. With
/// `noise_fraction` > 0 every detector gets additive noise equal to that
/// fraction of its full-transmission probe-level signal.
pub fn synthesize_traces(
    model: &FitModel,
    grid_thz: &[f64],
    powers_w: &[f64],
    noise_fraction: f64,
    seed: u64,
) -> Result<Vec<SpectrumTrace>> {
    powers_w
        .iter()
        .enumerate()
        .map(|(k, &power)| {
            let noise = DetectorNoise {
                relative_intensity_noise: 0.0,
                readout_noise_w: noise_fraction * power,
                enabled: noise_fraction > 0.0,
            };
            let samples = grid_thz
                .iter()
                .enumerate()
                .map(|(i, &f)| {
                    let t_high = detect(1.0, SYNTHETIC_LOCK_POWER_W, &noise, seed, i as u64, 0);
                    let t_low = detect(model.ratio_at_power(f, power), power, &noise, seed, i as u64, k + 1);
                    ScanSample::new(f, power * 1e9, t_high, t_low)
                })
                .collect();
            SpectrumTrace::new(samples)
        })
        .collect()
}

/// Evenly spaced grid of `n` frequencies from `start_thz` in steps of `step_mhz`.
pub fn frequency_grid(start_thz: f64, step_mhz: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start_thz + i as f64 * step_mhz * 1e-6).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toolkit::fit::Dip;

    fn model() -> FitModel {
        FitModel {
            baseline: 1.0,
            dips: vec![Dip {
                center_thz: 364.097,
                gaussian_fwhm_mhz: 400.0,
                lorentzian_fwhm_mhz: 100.0,
                depth: 0.8,
                saturation_power_w: 5e-9,
            }],
            probe_power_w: 1e-9,
        }
    }

    #[test]
    fn noiseless_traces_equal_model() {
        let m = model();
        let grid = frequency_grid(364.095, 20.0, 200);
        let traces = synthesize_traces(&m, &grid, &[1e-9, 10e-9], 0.0, 0).unwrap();
        for t in &traces {
            for s in &t.samples {
                assert_eq!(s.ratio, m.ratio_at_power(s.resonance_thz, s.probe_power_w()));
            }
        }
    }

    #[test]
    fn noise_level_and_determinism() {
        let m = FitModel { dips: vec![], ..model() };
        let grid = frequency_grid(364.095, 20.0, 4000);
        let a = synthesize_traces(&m, &grid, &[1e-9], 0.01, 9).unwrap();
        let b = synthesize_traces(&m, &grid, &[1e-9], 0.01, 9).unwrap();
        assert_eq!(a, b);
        let r = a[0].ratios();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let sd = (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / r.len() as f64).sqrt();
        // Signal and monitor each contribute 1%.
        assert!((sd - 0.01 * 2f64.sqrt()).abs() < 0.002, "{sd}");
    }
}
