use proptest::prelude::*;
use xenon_cavity::protocol::{run_scan_with, temp_to_resonance, Execution};
use xenon_cavity::toolkit::synth::frequency_grid;
use xenon_cavity::toolkit::{fit_trace, read_trace, synthesize_traces, write_trace, Dip, FitModel, FitOptions};
use xenon_cavity::{CavitySpec, DetectorNoise, LineCatalog, MediumParams, ScanPlan, ScanSample, SpectrumTrace};

fn model(center_thz: f64, g: f64, l: f64, depth: f64) -> FitModel {
    FitModel {
        baseline: 1.0,
        dips: vec![Dip {
            center_thz,
            gaussian_fwhm_mhz: g,
            lorentzian_fwhm_mhz: l,
            depth,
            saturation_power_w: 2e-9,
        }],
        probe_power_w: 0.5e-9,
    }
}

fn perturbed(m: &FitModel) -> FitModel {
    let mut p = m.clone();
    p.baseline = 0.99;
    p.dips[0].center_thz += 3e-6;
    p.dips[0].gaussian_fwhm_mhz *= 1.1;
    p.dips[0].lorentzian_fwhm_mhz *= 0.9;
    p.dips[0].depth *= 0.8;
    p
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn fit_is_translation_invariant(g in 200.0f64..500.0, l in 100.0f64..400.0, depth in 0.2f64..0.9, shift_mhz in -3000.0f64..3000.0) {
        let truth = model(364.0970, g, l, depth);
        let grid = frequency_grid(364.0950, 20.0, 201);
        let noisy = |m: &FitModel, grid: &[f64]| synthesize_traces(m, grid, &[0.5e-9], 0.01, 9).unwrap().remove(0);
        let a = fit_trace(&noisy(&truth, &grid), &perturbed(&truth), &FitOptions::default()).unwrap();

        let shift = shift_mhz * 1e-6;
        let moved = model(364.0970 + shift, g, l, depth);
        let grid_b: Vec<f64> = grid.iter().map(|f| f + shift).collect();
        let b = fit_trace(&noisy(&moved, &grid_b), &perturbed(&moved), &FitOptions::default()).unwrap();

        let (da, db) = (&a.model.dips[0], &b.model.dips[0]);
        prop_assert!(((db.center_thz - da.center_thz) * 1e6 - shift_mhz).abs() < 1e-3);
        prop_assert!((da.gaussian_fwhm_mhz - db.gaussian_fwhm_mhz).abs() < 1e-3 * da.gaussian_fwhm_mhz);
        prop_assert!((da.depth - db.depth).abs() < 1e-5);
        prop_assert!((a.residual_rms - b.residual_rms).abs() < 1e-6 * a.residual_rms.max(1e-12));
    }

    #[test]
    fn residual_history_never_increases(g in 100.0f64..600.0, l in 50.0f64..400.0, depth in 0.1f64..0.95, noise in 0.0f64..0.03, seed in 0u64..1000) {
        let truth = model(364.0970, g, l, depth);
        let grid = frequency_grid(364.0955, 15.0, 201);
        let trace = synthesize_traces(&truth, &grid, &[0.5e-9], noise, seed).unwrap().remove(0);
        let fit = fit_trace(&trace, &perturbed(&truth), &FitOptions::default()).unwrap();
        prop_assert!(fit.residual_history.windows(2).all(|w| w[1] <= w[0]), "{:?}", fit.residual_history);
        prop_assert_eq!(*fit.residual_history.last().unwrap(), fit.residual_rms);
    }

    #[test]
    fn trace_csv_round_trips(
        start in 363.0f64..365.0,
        steps in prop::collection::vec(1e-7f64..1e-3, 1..40),
        power in 1e-3f64..1e3,
        values in prop::collection::vec((1e-6f64..2.0, -0.1f64..2.0), 40),
    ) {
        let mut f = start;
        let samples: Vec<ScanSample> = steps
            .iter()
            .zip(&values)
            .map(|(step, &(hi, lo))| {
                f += step;
                ScanSample::new(f, power, hi, lo)
            })
            .collect();
        let trace = SpectrumTrace::new(samples).unwrap();
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let back = read_trace(&buf[..]).unwrap();
        prop_assert_eq!(back.samples, trace.samples);
    }

    #[test]
    fn temperature_maps_into_one_free_spectral_range(t in -50.0f64..150.0) {
        let plan = ScanPlan::default();
        let spec = CavitySpec::default();
        let f = temp_to_resonance(t, &plan, &spec);
        let offset_mhz = (f - plan.resonance_start_thz) * 1e6;
        prop_assert!(offset_mhz.abs() <= 0.5 * spec.fsr_mhz() + 1e-3, "{}", offset_mhz);
    }
}

fn small_plan(seed: u64) -> ScanPlan {
    ScanPlan {
        resonance_start_thz: 364.0953,
        resonance_stop_thz: 364.0958,
        step_mhz: 50.0,
        noise: DetectorNoise {
            relative_intensity_noise: 1e-3,
            readout_noise_w: 1e-12,
            enabled: true,
        },
        laser_jitter_mhz: 0.2,
        seed,
        ..Default::default()
    }
}

fn scan_bytes(plan: &ScanPlan, execution: Execution) -> Vec<Vec<u8>> {
    let traces = run_scan_with(plan, &CavitySpec::default(), &MediumParams::default(), &LineCatalog::natural_xenon(), execution).unwrap();
    traces
        .iter()
        .map(|t| {
            let mut buf = Vec::new();
            write_trace(t, &mut buf).unwrap();
            buf
        })
        .collect()
}

#[test]
fn scans_are_reproducible_from_the_seed() {
    let a = scan_bytes(&small_plan(7), Execution::Serial);
    assert_eq!(a, scan_bytes(&small_plan(7), Execution::Serial));
    assert_eq!(a, scan_bytes(&small_plan(7), Execution::Parallel));
    assert_ne!(a, scan_bytes(&small_plan(8), Execution::Serial));
}
